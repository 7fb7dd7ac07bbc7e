"""
Tests for trial statistics: Wilson intervals, CSV files and batch merging.
"""

import pytest

from app.models.game import TrialRecord
from app.services.stats_service import SUMMARY_MARKER, TrialStats, stats_service, wilson_interval


def make_stats(start: int, count: int, label: str = "batch") -> TrialStats:
    rows = [
        {"trial": k, "r": k % 2, "r_prime": 0, "accept": k % 3 != 0, "detected": k % 3 == 0}
        for k in range(start, start + count)
    ]
    return TrialStats.from_rows(rows, label)


@pytest.mark.unit
class TestWilsonInterval:
    """Test the binomial confidence interval."""

    def test_contains_rate(self):
        """Test the interval brackets the observed rate."""
        low, high = wilson_interval(50, 100)
        assert low < 0.5 < high
        assert high - low == pytest.approx(0.19, abs=0.01)

    def test_extremes_stay_in_unit_interval(self):
        """Test zero and full success counts."""
        low, high = wilson_interval(0, 20)
        assert low == pytest.approx(0.0, abs=1e-12) and 0 < high < 1
        low, high = wilson_interval(20, 20)
        assert 0 < low < 1 and high == pytest.approx(1.0, abs=1e-12)

    def test_no_trials(self):
        """Test the empty experiment."""
        assert wilson_interval(0, 0) == (0.0, 1.0)


@pytest.mark.unit
class TestTrialStats:
    """Test counting, CSV output and merging."""

    def test_rates(self):
        """Test win, accept and detect rates."""
        stats = make_stats(0, 6)
        assert stats.count("win") == 3
        assert stats.accept_rate == pytest.approx(4 / 6)
        assert stats.detect_rate == pytest.approx(2 / 6)
        with pytest.raises(ValueError):
            stats.count("loss")

    def test_record_win(self):
        """Test a win is r equal to the guess."""
        assert TrialRecord(trial=0, r=1, r_prime=1, accept=True, detected=False).win

    def test_csv_file_roundtrip(self, tmp_path):
        """Test write_csv then from_csv keeps every trial."""
        stats = make_stats(0, 10)
        path = stats.write_csv(tmp_path / "trials.csv")
        text = path.read_text()
        assert text.splitlines()[0] == "trial,r,r_prime,accept,detected"
        assert SUMMARY_MARKER in text
        assert "# trials,10" in text
        assert TrialStats.from_csv(path).to_rows() == stats.to_rows()

    def test_summary_keys(self):
        """Test one rate and interval per metric."""
        summary = make_stats(0, 4).summary()
        for metric in ("win", "accept", "detect"):
            assert summary[f"{metric}_ci_low"] <= summary[f"{metric}_rate"] <= summary[f"{metric}_ci_high"]

    def test_merge_orders_by_trial(self):
        """Test merged batches are sorted by trial index."""
        merged = make_stats(5, 5).merge(make_stats(0, 5))
        assert [rec.trial for rec in merged.records] == list(range(10))

    def test_merge_all(self):
        """Test disjoint batches merge to the full run."""
        merged = stats_service.merge_all([make_stats(0, 3), make_stats(3, 3), make_stats(6, 4)], label="run")
        assert merged.n == 10
        assert merged.label == "run"
        assert merged.to_rows() == make_stats(0, 10).to_rows()

    def test_merge_all_overlap(self):
        """Test overlapping trial ranges are refused."""
        with pytest.raises(ValueError):
            stats_service.merge_all([make_stats(0, 5), make_stats(4, 5)])
