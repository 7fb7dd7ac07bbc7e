"""
Counter-based, splittable random streams.

Every random decision of the simulator (measurement sampling, key sampling,
nonces, adversary choices) is drawn from an ``RngStream``; a trial's stream is
split off the master seed by trial index so trials are independent and
replayable one by one.
"""

import logging
from typing import Optional

import numpy as np

logger = logging.getLogger("app.rng")

SEED_MASK = 2**64 - 1


class RngStream:
    """Philox stream identified by (seed, counter); counts draws for lineage records."""

    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed) & SEED_MASK
        self.counter = int(counter) & SEED_MASK
        self._gen = np.random.Generator(np.random.Philox(key=self.seed, counter=self.counter))
        self.draws = 0

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, counter={self.counter}, draws={self.draws})"

    def random(self) -> float:
        self.draws += 1
        return float(self._gen.random())

    def bit(self) -> int:
        self.draws += 1
        return int(self._gen.integers(0, 2))

    def bits(self, n: int) -> np.ndarray:
        """Uniform bit vector of length n (dtype uint8)."""
        self.draws += 1
        return self._gen.integers(0, 2, size=n, dtype=np.uint8)

    def integers(self, low: int, high: Optional[int] = None, size: Optional[int] = None):
        self.draws += 1
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        """Uniform permutation of range(n) (Fisher-Yates shuffle)."""
        self.draws += 1
        return self._gen.permutation(n)

    def choice(self, n: int, k: int) -> np.ndarray:
        """k distinct elements of range(n), uniformly."""
        self.draws += 1
        return self._gen.choice(n, size=k, replace=False)

    def uint64(self) -> int:
        self.draws += 1
        return int(self._gen.integers(0, 2**64, dtype=np.uint64))

    def bytes(self, n: int) -> bytes:
        self.draws += 1
        return self._gen.bytes(n)

    def unit_vector(self, dim: int) -> np.ndarray:
        """Haar-random unit vector of the given dimension."""
        self.draws += 1
        v = self._gen.normal(size=dim) + 1j * self._gen.normal(size=dim)
        return v / np.linalg.norm(v)

    def split(self, index: int) -> "RngStream":
        """Independent child stream derived from (seed, index)."""
        child = np.random.SeedSequence([self.seed, int(index)]).generate_state(1, np.uint64)[0]
        return RngStream(int(child))


class RngService:
    """Factory for streams used by experiments and trials."""

    def __init__(self):
        self.logger = logger

    def stream(self, seed: int, counter: int = 0) -> RngStream:
        return RngStream(seed, counter)

    def trial_stream(self, master_seed: int, trial: int) -> RngStream:
        """
        Stream for one trial of an experiment.

        Args:
            master_seed: Experiment seed
            trial: Trial index

        Returns:
            Stream independent of every other trial index
        """
        stream = RngStream(master_seed).split(trial)
        self.logger.debug(f"Trial stream master_seed={master_seed} trial={trial} seed={stream.seed}")
        return stream


# Global instance
rng_service = RngService()
