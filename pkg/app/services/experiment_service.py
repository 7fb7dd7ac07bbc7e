"""
Acceptance experiments behind ``traptp run``: end-to-end correctness on
random circuits, security games and trap-detection statistics.
"""

import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import pandas as pd

from app.exceptions import ConfigError, ProjectionError
from app.models.circuit import CircuitDesc
from app.models.game import GameKind, GameOptions, SchemeName
from app.models.quantum import Basis
from app.models.traptp import SchemeParams
from app.services.circuit_service import circuit_service
from app.services.css_code import get_code
from app.services.game_service import game_service
from app.services.rng_service import rng_service
from app.services.statevector import qsim
from app.services.stats_service import SUMMARY_MARKER, TrialStats, wilson_interval
from app.services.trapcode_service import random_positions, trapcode_service
from app.services.traptp_service import traptp_service

logger = logging.getLogger("app.stats")

FIDELITY_TOLERANCE = 1e-9
ORACLE_TOLERANCE = 0.02

CORRECTNESS_COLUMNS = ["trial", "wires", "gates", "t_count", "accept", "fidelity"]
ATTACK_COLUMNS = ["trial", "weight", "basis", "accept"]

# Gates of the compactness circuits: Pauli and CNOT only, so no resource budget limits their length
_COMPACT_GATES = ("X 0", "Z 1", "CNOT 0 1", "X 1", "Z 0")


class Experiment:
    CORRECTNESS = "correctness"
    GAME = "game"
    ATTACK_STATS = "attack-stats"

    ALL = (CORRECTNESS, GAME, ATTACK_STATS)


@dataclass
class ExperimentReport:
    """Per-trial table plus summary values of one experiment."""

    name: str
    frame: pd.DataFrame
    summary: dict[str, Any] = field(default_factory=dict)
    passed: Optional[bool] = None
    stats: Optional[TrialStats] = None

    def summary_lines(self) -> list[str]:
        lines = [f"experiment={self.name}"]
        for key, value in self.summary.items():
            lines.append(f"{key}={value:.6f}" if isinstance(value, float) else f"{key}={value}")
        if self.passed is not None:
            lines.append(f"passed={str(self.passed).lower()}")
        return lines

    def to_csv(self) -> str:
        if self.stats is not None:
            return self.stats.to_csv()
        buffer = io.StringIO()
        self.frame.to_csv(buffer, index=False, lineterminator="\n")
        lines = [SUMMARY_MARKER]
        for key, value in self.summary.items():
            lines.append(f"# {key},{value:.6f}" if isinstance(value, float) else f"# {key},{value}")
        return buffer.getvalue() + "\n".join(lines) + "\n"

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text(self.to_csv(), encoding="utf-8")
        logger.info(f"Experiment report written experiment={self.name} path={path} rows={len(self.frame)}")
        return path


class ExperimentService:
    """Runs the acceptance experiments from a seed and a handful of knobs."""

    def __init__(self):
        self.logger = logger

    # correctness

    def correctness_trial(self, seed: int, trial: int, level: int = 1, max_wires: int = 2, n_gates: int = 8) -> dict:
        """
        One honest KeyGen -> Enc -> Eval -> VerDec run on a random circuit.

        Args:
            seed: Master seed
            trial: Trial index; selects the circuit, the input and all key randomness
            level: Code level
            max_wires: Largest number of logical qubits drawn
            n_gates: Gates per random circuit (at most two of them T)

        Returns:
            Row with the circuit shape, the verdict and the fidelity against plaintext simulation
        """
        rng = rng_service.trial_stream(seed, trial)
        n_wires = 1 + int(rng.integers(0, max_wires))
        circuit = circuit_service.random_circuit(rng, n_wires=n_wires, n_gates=n_gates, max_t=2)
        params = SchemeParams(level=level, t=circuit.t_count, p=circuit.p_count, h=circuit.h_count)
        sk, evk = traptp_service.keygen(params, rng)
        state = qsim.random_state(n_wires, rng)
        ct = traptp_service.enc(sk, state, rng)
        out, log = traptp_service.eval_circuit(evk, ct, circuit, rng)
        result = traptp_service.verdec(sk, out, log, circuit, rng)
        fidelity = 0.0
        if result.accepted:
            try:
                ideal = circuit_service.simulate(circuit, state, rng, forced=result.bits)
                fidelity = qsim.fidelity(ideal.state, result.state)
            except ProjectionError as e:
                self.logger.warning(f"Decrypted outcome impossible in plaintext trial={trial} error={e}")
        else:
            self.logger.warning(f"Honest run rejected trial={trial} reason={result.reason!r}")
        return {
            "trial": trial,
            "wires": n_wires,
            "gates": len(circuit),
            "t_count": circuit.t_count,
            "accept": int(result.accepted),
            "fidelity": fidelity,
        }

    def correctness_report(self, rows: list[dict]) -> ExperimentReport:
        frame = pd.DataFrame(rows, columns=CORRECTNESS_COLUMNS).sort_values("trial", ignore_index=True)
        accepted = int(frame["accept"].sum())
        min_fidelity = float(frame["fidelity"].min()) if len(frame) else 1.0
        summary = {"circuits": len(frame), "accepted": accepted, "min_fidelity": min_fidelity}
        passed = accepted == len(frame) and min_fidelity >= 1 - FIDELITY_TOLERANCE
        return ExperimentReport(Experiment.CORRECTNESS, frame, summary, passed)

    def run_correctness(self, count: int = 200, seed: int = 0, level: int = 1, start: int = 0) -> ExperimentReport:
        rows = [self.correctness_trial(seed, trial, level) for trial in range(start, start + count)]
        report = self.correctness_report(rows)
        self.logger.info(
            f"Correctness finished circuits={count} accepted={report.summary['accepted']} "
            f"min_fidelity={report.summary['min_fidelity']:.12f}"
        )
        return report

    # trap detection

    def attack_trial(self, seed: int, trial: int, weight: int, basis: Basis, level: int = 1) -> dict:
        """Weight-w attack on one unmeasured trap-code block, then verified decryption of the empty circuit."""
        rng = rng_service.trial_stream(seed, trial)
        key = trapcode_service.keygen(1, get_code(level), rng)
        ct = trapcode_service.encrypt(key, qsim.random_state(1, rng))
        size = key.size
        pauli = [0] * size
        for position in random_positions(rng, size, weight):
            pauli[position] = 1
        if basis is Basis.X:
            trapcode_service.apply_attack(ct, 0, x_bits=pauli)
        else:
            trapcode_service.apply_attack(ct, 0, z_bits=pauli)
        result = trapcode_service.verdec(key, ct, CircuitDesc(n_wires=1), rng)
        return {"trial": trial, "weight": weight, "basis": basis.value, "accept": int(result.accepted)}

    def run_attack_stats(
        self, weight: int = 1, basis: Union[Basis, str] = Basis.X, trials: int = 10000, seed: int = 0, level: int = 1
    ) -> ExperimentReport:
        """
        Empirical accept rate of weight-w attacks against the exact hypergeometric oracle.

        Args:
            weight: Number of distinct physical positions hit
            basis: X or Z errors
            trials: Number of attacks
            seed: Master seed
            level: Code level

        Returns:
            Report whose summary holds the accept/reject rates, their Wilson interval,
            the oracle and the (2/3)^ceil(w/2) bound
        """
        basis = Basis(basis)
        m = get_code(level).m
        if not 1 <= weight <= 3 * m:
            raise ConfigError(f"weight must lie in 1..{3 * m}, got {weight}")
        rows = [self.attack_trial(seed, trial, weight, basis, level) for trial in range(trials)]
        frame = pd.DataFrame(rows, columns=ATTACK_COLUMNS)
        accepted = int(frame["accept"].sum())
        accept_rate = accepted / trials if trials else 0.0
        low, high = wilson_interval(accepted, trials)
        oracle = trapcode_service.detection_oracle(m, weight)
        bound = trapcode_service.acceptance_bound(weight)
        summary = {
            "trials": trials,
            "weight": weight,
            "basis": basis.value,
            "accept_rate": accept_rate,
            "reject_rate": 1 - accept_rate,
            "accept_ci_low": low,
            "accept_ci_high": high,
            "oracle_accept": oracle,
            "oracle_reject": 1 - oracle,
            "bound": bound,
        }
        passed = abs(accept_rate - oracle) <= ORACLE_TOLERANCE and low <= bound
        self.logger.info(
            f"Attack statistics finished weight={weight} basis={basis.value} trials={trials} "
            f"reject_rate={1 - accept_rate:.4f} oracle_reject={1 - oracle:.4f}"
        )
        return ExperimentReport(Experiment.ATTACK_STATS, frame, summary, passed)

    # games

    def run_game(
        self,
        kind: Union[GameKind, str] = GameKind.IND_VER,
        scheme: Union[SchemeName, str] = SchemeName.TRAPTP,
        adversary: str = "honest",
        trials: int = 10000,
        seed: int = 0,
        options: Optional[GameOptions] = None,
        stats: Optional[TrialStats] = None,
    ) -> ExperimentReport:
        """Play a game (or wrap trials already played elsewhere) and report its rates."""
        if stats is None:
            stats = game_service.run_game(kind, scheme, adversary, trials, seed, options)
        return ExperimentReport(Experiment.GAME, stats.to_frame(), stats.summary(), None, stats)

    # compactness

    def compactness(self, seed: int = 0, short: int = 5, long: int = 50) -> dict[str, int]:
        """
        Dec simulator calls and Ver steps for a short and a long circuit with two quantum outputs.

        Dec's call count should not depend on the circuit length; Ver's step count should.
        """
        measured: dict[str, int] = {}
        for label, length in (("short", short), ("long", long)):
            lines = ["wires 2", *(_COMPACT_GATES[k % len(_COMPACT_GATES)] for k in range(length))]
            circuit = CircuitDesc.from_text("\n".join(lines))
            rng = rng_service.trial_stream(seed, length)
            sk, evk = traptp_service.keygen(SchemeParams(), rng)
            ct = traptp_service.enc(sk, qsim.random_state(2, rng), rng)
            out, log = traptp_service.eval_circuit(evk, ct, circuit, rng)
            result = traptp_service.verdec(sk, out, log, circuit, rng)
            measured[f"{label}_accepted"] = int(result.accepted)
            measured[f"{label}_dec_operations"] = result.dec_operations
            measured[f"{label}_ver_steps"] = result.ver_steps
        self.logger.info(
            f"Compactness measured dec_short={measured['short_dec_operations']} dec_long={measured['long_dec_operations']} "
            f"ver_short={measured['short_ver_steps']} ver_long={measured['long_ver_steps']}"
        )
        return measured


# Global instance
experiment_service = ExperimentService()
