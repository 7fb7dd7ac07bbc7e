"""
Self-test: a short invariant suite per module, run from ``traptp selftest``
and the health check script.

The report holds no timestamps, so two runs with the same seed produce the
same bytes.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from app.models.circuit import CircuitDesc
from app.models.game import GameOptions
from app.models.traptp import SchemeParams
from app.services.adversaries import get_adversary
from app.services.css_code import get_code
from app.services.experiment_service import FIDELITY_TOLERANCE, experiment_service
from app.services.game_service import game_service
from app.services.gardenhose_service import gardenhose_service
from app.services.he_functions import apply_function, encode_bits
from app.services.he_service import homomorphic_service
from app.services.mac_service import mac_service
from app.services.qotp_service import qotp_service
from app.services.rng_service import RngStream, rng_service
from app.services.scheme_adapters import make_scheme
from app.services.serialization_service import serialization_service
from app.services.statevector import qsim
from app.services.trapcode_service import trapcode_service
from app.services.traptp_service import traptp_service

logger = logging.getLogger("app.selftest")

CheckResult = tuple[bool, str]


@dataclass
class CheckOutcome:
    name: str
    passed: bool
    detail: str

    def to_line(self) -> str:
        status = "pass" if self.passed else "fail"
        return f"check={self.name} status={status} detail={self.detail}"


@dataclass
class SelftestReport:
    seed: int
    outcomes: list[CheckOutcome] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(o.passed for o in self.outcomes)

    @property
    def failed(self) -> list[str]:
        return [o.name for o in self.outcomes if not o.passed]

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def to_text(self) -> str:
        lines = [o.to_line() for o in self.outcomes]
        lines.append(f"selftest seed={self.seed} checks={len(self.outcomes)} failed={len(self.failed)}")
        return "\n".join(lines) + "\n"


class SelftestService:
    """Invariant checks for every module, each on its own random stream."""

    def __init__(self):
        self.logger = logger
        self.vectors_path: Optional[Path] = None

    # qsim

    def check_twirl(self, rng: RngStream) -> CheckResult:
        worst = 0.0
        for _ in range(3):
            average = qsim.pauli_twirl_average(qsim.random_state(2, rng))
            worst = max(worst, float(np.max(np.abs(average - np.eye(4) / 4))))
        return worst <= 1e-9, f"max_deviation={worst:.3e}"

    # codes

    def check_steane(self, rng: RngStream) -> CheckResult:
        code = get_code(1)
        state = qsim.random_state(1, rng)
        encoded = code.encode(state)
        worst = 1.0
        for q in range(code.m):
            for x, z in ((1, 0), (0, 1), (1, 1)):
                decoded, report = code.decode(qsim.apply_pauli(encoded, q, x, z), rng)
                worst = min(worst, qsim.fidelity(decoded, state) if report.correctable else 0.0)
        return worst >= 1 - FIDELITY_TOLERANCE, f"min_fidelity={worst:.12f}"

    # clcrypto

    def check_mac_vectors(self, rng: RngStream) -> CheckResult:
        failures = mac_service.check_vectors(self.vectors_path)
        return not failures, f"failures={','.join(failures) or 'none'}"

    def check_backend(self, rng: RngStream) -> CheckResult:
        keys = homomorphic_service.keygen(0, rng)
        pair = keys.pair(0)
        wrong = 0
        for _ in range(20):
            a, b = encode_bits(rng.bits(8)), encode_bits(rng.bits(8))
            ca, _ = homomorphic_service.enc(pair.pk, a, rng)
            cb, _ = homomorphic_service.enc(pair.pk, b, rng)
            (out,), _ = homomorphic_service.eval(pair.evk, "xor", [ca, cb], rng)
            wrong += homomorphic_service.dec(pair, out) != apply_function("xor", [a, b])[0]
        return wrong == 0, f"pairs=20 wrong={wrong}"

    # trapcode

    def check_trapcode(self, rng: RngStream) -> CheckResult:
        key = trapcode_service.keygen(1, get_code(1), rng)
        state = qsim.random_state(1, rng)
        result = trapcode_service.verdec(key, trapcode_service.encrypt(key, state), CircuitDesc(n_wires=1), rng)
        fidelity = qsim.fidelity(result.state, state) if result.accepted else 0.0
        oracle_ok = abs(trapcode_service.detection_oracle(7, 3) - 364 / 1330) < 1e-12
        ok = result.accepted and fidelity >= 1 - FIDELITY_TOLERANCE and oracle_ok
        return ok, f"accepted={result.accepted} fidelity={fidelity:.12f} oracle={oracle_ok}"

    # gardenhose

    def check_gadget(self, rng: RngStream) -> CheckResult:
        worst = 1.0
        for b in (0, 1):
            for entry in ((0, 0), (0, 1), (1, 0), (1, 1)):
                state = qsim.random_state(1, rng)
                run = gardenhose_service.run_channel(state, b, rng, entry=entry)
                expected = qsim.apply_gate(state, "P", 0) if b else state
                worst = min(worst, qsim.fidelity(run.state, expected))
        return worst >= 1 - FIDELITY_TOLERANCE, f"min_fidelity={worst:.12f}"

    # traptp

    def check_correctness(self, rng: RngStream) -> CheckResult:
        seed = rng.uint64()
        report = experiment_service.correctness_report([experiment_service.correctness_trial(seed, k) for k in range(4)])
        return bool(report.passed), f"circuits=4 accepted={report.summary['accepted']}"

    def check_log_integrity(self, rng: RngStream) -> CheckResult:
        seed = rng.uint64()
        options = GameOptions(circuit="H 0; T 0")
        scheme = make_scheme("traptp")
        detected = 0
        for name in ("log-tamper", "mac-forgery", "wrong-circuit"):
            stats = game_service.run_indver(scheme, get_adversary(name), 3, seed, options)
            detected += stats.count("detect")
        honest = game_service.run_indver(scheme, get_adversary("honest"), 3, seed, options)
        ok = detected == 9 and honest.count("accept") == 3
        return ok, f"detected={detected}/9 honest_accepted={honest.count('accept')}/3"

    def check_compactness(self, rng: RngStream) -> CheckResult:
        m = experiment_service.compactness(int(rng.integers(0, 2**31)))
        ok = (
            m["short_accepted"] == m["long_accepted"] == 1
            and m["short_dec_operations"] == m["long_dec_operations"]
            and m["long_ver_steps"] > m["short_ver_steps"]
        )
        return ok, (
            f"dec={m['short_dec_operations']}/{m['long_dec_operations']} "
            f"ver={m['short_ver_steps']}/{m['long_ver_steps']}"
        )

    def check_serialization(self, rng: RngStream) -> CheckResult:
        sk, evk = traptp_service.keygen(SchemeParams(t=1, p=1, h=1), rng)
        ct = traptp_service.enc(sk, qsim.random_state(2, rng), rng)
        ct_bytes = serialization_service.encode_ciphertext(ct)
        evk_bytes = serialization_service.encode_eval_key(evk)
        same_ct = serialization_service.encode_ciphertext(serialization_service.decode_ciphertext(ct_bytes)) == ct_bytes
        same_evk = serialization_service.encode_eval_key(serialization_service.decode_eval_key(evk_bytes)) == evk_bytes
        return same_ct and same_evk, f"ciphertext={same_ct} eval_key={same_evk}"

    # qotp

    def check_qotp(self, rng: RngStream) -> CheckResult:
        seed = int(rng.integers(0, 2**31))
        wrong = []
        for a in (0, 1):
            for b in (0, 1):
                output = qotp_service.qotp_demo((a,), (b,), seed)
                if not output.accepted or output.bits.get(2) != (a & b):
                    wrong.append(f"{a}{b}")
        return not wrong, f"wrong={','.join(wrong) or 'none'}"

    def checks(self) -> list[tuple[str, Callable[[RngStream], CheckResult]]]:
        return [
            ("qsim.twirl", self.check_twirl),
            ("codes.steane", self.check_steane),
            ("clcrypto.mac_vectors", self.check_mac_vectors),
            ("clcrypto.backend", self.check_backend),
            ("trapcode.honest", self.check_trapcode),
            ("gardenhose.channel", self.check_gadget),
            ("traptp.correctness", self.check_correctness),
            ("traptp.log_integrity", self.check_log_integrity),
            ("traptp.compactness", self.check_compactness),
            ("cli.serialization", self.check_serialization),
            ("games.qotp", self.check_qotp),
        ]

    def run(self, seed: int, vectors_path: Optional[Path] = None) -> SelftestReport:
        """
        Run every check.

        Args:
            seed: Master seed; check k draws from the stream split off at index k
            vectors_path: MAC test vector file (the shipped one by default)

        Returns:
            Report with one line per check
        """
        self.vectors_path = vectors_path
        report = SelftestReport(seed=seed)
        for k, (name, check) in enumerate(self.checks()):
            try:
                passed, detail = check(rng_service.trial_stream(seed, k))
            except Exception as e:
                self.logger.error(f"Self-test check crashed check={name} error={e}")
                passed, detail = False, f"error={type(e).__name__}"
            report.outcomes.append(CheckOutcome(name, passed, detail))
            if not passed:
                self.logger.error(f"Self-test check failed check={name} detail={detail}")
        self.logger.info(f"Self-test finished seed={seed} checks={len(report.outcomes)} failed={len(report.failed)}")
        return report


# Global instance
selftest_service = SelftestService()
