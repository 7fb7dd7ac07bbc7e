"""
Celery tasks running batches of game trials and correctness circuits.

Trial k always draws from the stream split off the master seed at index
k, so a run split into batches reproduces the serial run exactly.
"""
import logging
from typing import Any, Dict, List, Optional

from celery import group

from app.models.game import GameKind, GameOptions
from app.services.experiment_service import ExperimentReport, experiment_service
from app.services.game_service import game_service
from app.services.stats_service import TrialStats, stats_service
from worker.celery_app import celery_app

logger = logging.getLogger("worker.game_tasks")

RESULT_TIMEOUT = 60 * 60


@celery_app.task(bind=True, name="games.run_trial_batch")
def run_trial_batch(
    self,
    scheme: str,
    adversary: str,
    seed: int,
    start: int,
    count: int,
    options: Optional[Dict[str, Any]] = None,
    kind: str = GameKind.IND_VER.value,
) -> List[Dict[str, Any]]:
    """
    Play trials start..start+count-1 of one game experiment.

    Args:
        scheme: Scheme name (trapcode, traptp, prime, double-prime)
        adversary: Built-in adversary name
        seed: Master seed of the whole experiment
        start: First trial index of this batch
        count: Number of trials
        options: GameOptions fields
        kind: Game kind

    Returns:
        One CSV-ready row per trial
    """
    logger.info(f"Starting trial batch kind={kind} scheme={scheme} adversary={adversary} start={start} count={count}")
    stats = game_service.run_game(kind, scheme, adversary, count, seed, GameOptions(**(options or {})), start)
    logger.info(f"Trial batch finished start={start} wins={stats.count('win')} accepts={stats.count('accept')}")
    return stats.to_rows()


@celery_app.task(bind=True, name="games.run_correctness_batch")
def run_correctness_batch(self, seed: int, start: int, count: int, level: int = 1) -> List[Dict[str, Any]]:
    """Honest end-to-end runs on random circuits start..start+count-1."""
    logger.info(f"Starting correctness batch start={start} count={count} level={level}")
    return [experiment_service.correctness_trial(seed, trial, level) for trial in range(start, start + count)]


def batches(total: int, workers: int) -> List[tuple]:
    """(start, count) pairs covering 0..total-1 in at most ``workers`` nearly equal parts."""
    workers = max(1, min(workers, total)) if total else 1
    size, extra = divmod(total, workers)
    spans, start = [], 0
    for k in range(workers):
        count = size + (1 if k < extra else 0)
        if count:
            spans.append((start, count))
        start += count
    return spans


def dispatch_trials(
    kind: str,
    scheme: str,
    adversary: str,
    trials: int,
    seed: int,
    options: Optional[GameOptions] = None,
    workers: int = 4,
) -> TrialStats:
    """Split a game run into batches, run them as a group and merge the rows."""
    fields = (options or GameOptions()).model_dump()
    job = group(
        run_trial_batch.s(scheme, adversary, seed, start, count, fields, GameKind(kind).value)
        for start, count in batches(trials, workers)
    )
    results = job.apply_async().get(timeout=RESULT_TIMEOUT)
    label = f"{GameKind(kind).value}:{scheme}:{adversary}"
    merged = stats_service.merge_all((TrialStats.from_rows(rows) for rows in results), label)
    stats_service.log_summary(merged)
    return merged


def dispatch_correctness(seed: int, count: int, workers: int = 4, level: int = 1) -> ExperimentReport:
    job = group(run_correctness_batch.s(seed, start, n, level) for start, n in batches(count, workers))
    rows = [row for batch in job.apply_async().get(timeout=RESULT_TIMEOUT) for row in batch]
    return experiment_service.correctness_report(rows)
