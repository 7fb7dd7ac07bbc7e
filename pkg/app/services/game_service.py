"""
Indistinguishability-of-verification games.

In each trial the challenger flips r. With r = 0 it encrypts the
adversary's plaintext; with r = 1 it encrypts |0...0> instead and keeps the
real plaintext aside. After verified decryption of whatever the adversary
returns, the r = 1 branch replaces an accepted output by the ideal channel
of the claimed circuit on the kept plaintext (and by Omega on reject). The
adversary then sees the output and the acc/rej flag and guesses r.
"""

import logging
from typing import Any, Optional, Union

from app.context import trial_id_var
from app.exceptions import AdversaryContractError, ConfigError, TrapTPError
from app.models.circuit import CircuitDesc
from app.models.game import Delivered, Evaluated, GameKind, GameOptions, SchemeName, TrialOutcome, TrialRecord
from app.models.trap import VerDecResult
from app.models.traptp import SchemeVariant
from app.services.adversaries import Adversary, AdversaryView, get_adversary
from app.services.circuit_service import circuit_service
from app.services.rng_service import RngStream, rng_service
from app.services.scheme_adapters import SchemeAdapter, SchemeKeys, TrapTPScheme, make_scheme
from app.services.statevector import StateVector, qsim
from app.services.stats_service import TrialStats, stats_service
from app.services.trapcode_service import reject_output

logger = logging.getLogger("app.games")


class GameService:
    """Runs IND-VER, two-round IND-VER and the hybrid game over a scheme adapter."""

    def __init__(self):
        self.logger = logger

    # stage contracts

    @staticmethod
    def _plaintext(value: Any, n_wires: int, stage: str) -> tuple[StateVector, Any]:
        if not isinstance(value, tuple) or len(value) != 2:
            raise AdversaryContractError(f"{stage} must return (state, memo)")
        state, memo = value
        if not isinstance(state, StateVector) or state.n_qubits != n_wires:
            raise AdversaryContractError(f"{stage} must return a {n_wires}-qubit state")
        return state, memo

    @staticmethod
    def _evaluated(value: Any) -> Evaluated:
        if not isinstance(value, Evaluated) or not isinstance(value.circuit, CircuitDesc):
            raise AdversaryContractError("evaluate must return an Evaluated with a claimed circuit")
        return value

    @staticmethod
    def _guess(value: Any) -> int:
        if isinstance(value, bool) or value not in (0, 1):
            raise AdversaryContractError(f"guess must return 0 or 1, got {value!r}")
        return int(value)

    def _check_scheme(self, scheme: SchemeAdapter, adversary: Adversary) -> None:
        if adversary.requires_log and not scheme.has_log:
            raise AdversaryContractError(f"adversary {adversary.name} needs a scheme with a computation log")

    # the r = 1 swap back

    def deliver(self, result: VerDecResult, r: int, plaintext: StateVector, circuit: CircuitDesc, rng: RngStream) -> Delivered:
        """
        Output handed to the guessing stage.

        Args:
            result: Verified decryption of the returned ciphertext
            r: Challenger's coin
            plaintext: Adversary's real plaintext
            circuit: Circuit the adversary claims to have applied
            rng: Randomness of the ideal channel

        Returns:
            The decrypted output (r = 0), the ideal output on the real plaintext (r = 1, accepted) or Omega
        """
        if not result.accepted:
            omega = reject_output(circuit, result.reason)
            return Delivered(accepted=False, state=omega.state, bits=omega.bits, reason=result.reason)
        if r == 0:
            return Delivered(accepted=True, state=result.state, bits=dict(result.bits))
        try:
            ideal = circuit_service.simulate(circuit, plaintext, rng)
        except TrapTPError as e:
            self.logger.warning(f"Ideal channel not applicable circuit_wires={circuit.n_wires} error={e}")
            omega = reject_output(circuit, str(e))
            return Delivered(accepted=False, state=omega.state, bits=omega.bits, reason=str(e))
        return Delivered(accepted=True, state=ideal.state, bits=dict(ideal.bits))

    # single trials

    def play_indver(
        self,
        scheme: SchemeAdapter,
        adversary: Adversary,
        rng: RngStream,
        options: Optional[GameOptions] = None,
        trial: int = 0,
        r: Optional[int] = None,
    ) -> TrialOutcome:
        """One IND-VER trial; ``r`` forces the coin (matched-seed wiring checks)."""
        options = options or GameOptions()
        self._check_scheme(scheme, adversary)
        circuit = circuit_service.parse(options.circuit, options.n_wires)
        r = rng.bit() if r is None else r
        keys = scheme.keygen(circuit, options, rng)
        view = AdversaryView(scheme=scheme, evk=keys.evk, options=options)
        plaintext, memo = self._plaintext(adversary.choose_input(view, circuit.n_wires, rng), circuit.n_wires, "choose_input")
        ct = scheme.encrypt(keys, plaintext if r == 0 else qsim.new_register(circuit.n_wires), rng)
        return self._finish(scheme, adversary, keys, view, ct, circuit, plaintext, memo, r, rng, trial)

    def play_indver2(
        self,
        scheme: SchemeAdapter,
        adversary: Adversary,
        rng: RngStream,
        options: Optional[GameOptions] = None,
        trial: int = 0,
        r: Optional[int] = None,
    ) -> TrialOutcome:
        """
        One two-round trial: both rounds encrypt under one key and share the coin r.

        The second plaintext is chosen after seeing the first ciphertext; the
        evaluation then runs once over both rounds' wires.
        """
        options = options or GameOptions()
        self._check_scheme(scheme, adversary)
        n1, n2 = options.first_wires, options.second_wires
        circuit = circuit_service.parse(options.two_round_circuit, n1 + n2)
        r = rng.bit() if r is None else r
        keys = scheme.keygen(circuit, options, rng)
        view = AdversaryView(scheme=scheme, evk=keys.evk, options=options)
        first, memo = self._plaintext(adversary.choose_first(view, n1, rng), n1, "choose_first")
        ct1 = scheme.encrypt(keys, first if r == 0 else qsim.new_register(n1), rng)
        second, memo = self._plaintext(adversary.choose_second(view, ct1, n2, rng, memo), n2, "choose_second")
        ct2 = scheme.encrypt(keys, second if r == 0 else qsim.new_register(n2), rng, offset=n1)
        ct = scheme.combine(ct1, ct2)
        plaintext = qsim.tensor(first, second)
        return self._finish(scheme, adversary, keys, view, ct, circuit, plaintext, memo, r, rng, trial)

    def _finish(
        self,
        scheme: SchemeAdapter,
        adversary: Adversary,
        keys: SchemeKeys,
        view: AdversaryView,
        ct: Any,
        circuit: CircuitDesc,
        plaintext: StateVector,
        memo: Any,
        r: int,
        rng: RngStream,
        trial: int,
    ) -> TrialOutcome:
        evaluated = self._evaluated(adversary.evaluate(view, ct, circuit, rng, memo))
        result = scheme.verdec(keys, evaluated, rng)
        delivered = self.deliver(result, r, plaintext, evaluated.circuit, rng)
        guess = self._guess(adversary.guess(delivered, rng, memo))
        record = TrialRecord(
            trial=trial,
            r=r,
            r_prime=guess,
            accept=result.accepted,
            detected=evaluated.tampered and not result.accepted,
        )
        self.logger.debug(f"Trial finished trial={trial} r={r} guess={guess} accept={result.accepted}")
        return TrialOutcome(record=record, delivered=delivered, plaintext=plaintext)

    # experiments

    def _run(self, play, scheme: SchemeAdapter, adversary: Adversary, trials: int, seed: int, options, start: int, label: str):
        stats = TrialStats(label=label)
        for trial in range(start, start + trials):
            token = trial_id_var.set(f"{label}#{trial}")
            try:
                rng = rng_service.trial_stream(seed, trial)
                stats.add(play(scheme, adversary, rng, options, trial).record)
            finally:
                trial_id_var.reset(token)
        stats_service.log_summary(stats)
        return stats

    def run_indver(
        self,
        scheme: SchemeAdapter,
        adversary: Adversary,
        trials: int,
        seed: int,
        options: Optional[GameOptions] = None,
        start: int = 0,
    ) -> TrialStats:
        """
        Play ``trials`` independent IND-VER trials.

        Args:
            scheme: Scheme adapter
            adversary: Staged adversary
            trials: Number of trials
            seed: Master seed; trial k draws from the stream split off at index k
            options: Circuit, budgets and attack parameters
            start: Index of the first trial (batches of one experiment use disjoint ranges)

        Returns:
            Per-trial records with their aggregates
        """
        label = f"{GameKind.IND_VER.value}:{scheme.name.value}:{adversary.name}"
        return self._run(self.play_indver, scheme, adversary, trials, seed, options, start, label)

    def run_indver2(
        self,
        scheme: SchemeAdapter,
        adversary: Adversary,
        trials: int,
        seed: int,
        options: Optional[GameOptions] = None,
        start: int = 0,
    ) -> TrialStats:
        label = f"{GameKind.IND_VER_2.value}:{scheme.name.value}:{adversary.name}"
        return self._run(self.play_indver2, scheme, adversary, trials, seed, options, start, label)

    def run_hybrid(
        self,
        variant: Union[SchemeVariant, str],
        adversary: Adversary,
        trials: int,
        seed: int,
        options: Optional[GameOptions] = None,
        start: int = 0,
    ) -> TrialStats:
        """
        IND-VER with the KeyGen -> VerDec and Enc -> VerDec channels wired.

        TrapTP receives the channel values and ignores them, so its trials
        match ``run_indver`` on the same seed one for one.
        """
        try:
            variant = SchemeVariant(variant)
        except ValueError as e:
            raise ConfigError(f"unknown scheme variant {variant!r}") from e
        scheme = TrapTPScheme(variant, side_channel=True)
        label = f"{GameKind.HYBRID.value}:{variant.value}:{adversary.name}"
        return self._run(self.play_indver, scheme, adversary, trials, seed, options, start, label)

    def run_game(
        self,
        kind: Union[GameKind, str],
        scheme_name: Union[SchemeName, str],
        adversary_name: str,
        trials: int,
        seed: int,
        options: Optional[GameOptions] = None,
        start: int = 0,
    ) -> TrialStats:
        """Entry point for the command line and the worker: everything by name."""
        kind = GameKind(kind)
        options = options or GameOptions()
        adversary = get_adversary(adversary_name)
        if kind is GameKind.HYBRID:
            return self.run_hybrid(SchemeName(scheme_name).value, adversary, trials, seed, options, start)
        scheme = make_scheme(scheme_name)
        if kind is GameKind.IND_VER_2:
            return self.run_indver2(scheme, adversary, trials, seed, options, start)
        return self.run_indver(scheme, adversary, trials, seed, options, start)


# Global instance
game_service = GameService()
