"""
Trial statistics: win, accept and detection rates with 95% Wilson
intervals, CSV export and merging of batches computed elsewhere.
"""

import io
import logging
from pathlib import Path
from typing import Iterable, Optional, Union

import pandas as pd
from scipy.stats import binomtest

from app.models.game import TrialRecord

logger = logging.getLogger("app.stats")

CSV_COLUMNS = ["trial", "r", "r_prime", "accept", "detected"]
SUMMARY_MARKER = "# summary"
METRICS = ("win", "accept", "detect")


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval of a binomial proportion ((0, 1) when there are no trials)."""
    if trials == 0:
        return 0.0, 1.0
    ci = binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


class TrialStats:
    """Per-trial records of one experiment plus the aggregates computed from them."""

    def __init__(self, records: Iterable[TrialRecord] = (), label: str = ""):
        self.records: list[TrialRecord] = list(records)
        self.label = label

    def __len__(self) -> int:
        return len(self.records)

    def add(self, record: TrialRecord) -> None:
        self.records.append(record)

    def merge(self, other: "TrialStats") -> "TrialStats":
        """Union of two batches, ordered by trial index."""
        merged = sorted([*self.records, *other.records], key=lambda rec: rec.trial)
        return TrialStats(merged, self.label or other.label)

    @property
    def n(self) -> int:
        return len(self.records)

    def count(self, metric: str) -> int:
        if metric == "win":
            return sum(rec.win for rec in self.records)
        if metric == "accept":
            return sum(rec.accept for rec in self.records)
        if metric == "detect":
            return sum(rec.detected for rec in self.records)
        raise ValueError(f"unknown metric {metric!r}")

    def rate(self, metric: str) -> float:
        return self.count(metric) / self.n if self.n else 0.0

    @property
    def win_rate(self) -> float:
        return self.rate("win")

    @property
    def accept_rate(self) -> float:
        return self.rate("accept")

    @property
    def detect_rate(self) -> float:
        return self.rate("detect")

    def interval(self, metric: str, confidence: float = 0.95) -> tuple[float, float]:
        return wilson_interval(self.count(metric), self.n, confidence)

    def half_width(self, metric: str) -> float:
        low, high = self.interval(metric)
        return (high - low) / 2

    def summary(self) -> dict[str, float]:
        data: dict[str, float] = {"trials": self.n}
        for metric in METRICS:
            low, high = self.interval(metric)
            data[f"{metric}_rate"] = self.rate(metric)
            data[f"{metric}_ci_low"] = low
            data[f"{metric}_ci_high"] = high
        return data

    # CSV

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {"trial": rec.trial, "r": rec.r, "r_prime": rec.r_prime, "accept": int(rec.accept), "detected": int(rec.detected)}
            for rec in self.records
        ]
        return pd.DataFrame(rows, columns=CSV_COLUMNS)

    def to_csv(self) -> str:
        """One line per trial, then a commented summary block with rate and Wilson interval per metric."""
        buffer = io.StringIO()
        self.to_frame().to_csv(buffer, index=False, lineterminator="\n")
        lines = [SUMMARY_MARKER, f"# trials,{self.n}"]
        for metric in METRICS:
            low, high = self.interval(metric)
            lines.append(f"# {metric}_rate,{self.rate(metric):.6f},{low:.6f},{high:.6f}")
        return buffer.getvalue() + "\n".join(lines) + "\n"

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text(self.to_csv(), encoding="utf-8")
        logger.info(f"Trial statistics written path={path} trials={self.n}")
        return path

    @classmethod
    def from_frame(cls, df: pd.DataFrame, label: str = "") -> "TrialStats":
        missing = set(CSV_COLUMNS) - set(df.columns)
        if missing:
            raise ValueError(f"trial table lacks columns {sorted(missing)}")
        records = [
            TrialRecord(
                trial=int(row.trial),
                r=int(row.r),
                r_prime=int(row.r_prime),
                accept=bool(row.accept),
                detected=bool(row.detected),
            )
            for row in df.itertuples(index=False)
        ]
        return cls(records, label)

    @classmethod
    def from_csv(cls, source: Union[str, Path], label: str = "") -> "TrialStats":
        """Read a CSV written by ``to_csv`` (the summary block is skipped as comments)."""
        return cls.from_frame(pd.read_csv(source, comment="#"), label)

    @classmethod
    def from_rows(cls, rows: Iterable[dict], label: str = "") -> "TrialStats":
        return cls([TrialRecord(**row) for row in rows], label)

    def to_rows(self) -> list[dict]:
        return [rec.model_dump() for rec in self.records]


class StatsService:
    """Aggregation helpers shared by the experiments and the worker."""

    def __init__(self):
        self.logger = logger

    def merge_all(self, batches: Iterable[TrialStats], label: Optional[str] = None) -> TrialStats:
        merged = TrialStats(label=label or "")
        for batch in batches:
            merged = merged.merge(batch)
        trials = [rec.trial for rec in merged.records]
        if len(trials) != len(set(trials)):
            raise ValueError("batches overlap in trial indices")
        return merged

    def log_summary(self, stats: TrialStats) -> None:
        data = stats.summary()
        self.logger.info(
            f"Experiment summary label={stats.label} trials={stats.n} "
            f"win_rate={data['win_rate']:.4f} accept_rate={data['accept_rate']:.4f} detect_rate={data['detect_rate']:.4f}"
        )


# Global instance
stats_service = StatsService()
