"""
Tests for the security games, the built-in adversaries and the hybrid wiring.
"""

import pytest

from app.exceptions import AdversaryContractError, ConfigError
from app.models.game import GameKind, GameOptions
from app.services.adversaries import Adversary, builtin_adversaries, get_adversary
from app.services.game_service import game_service
from app.services.rng_service import rng_service
from app.services.scheme_adapters import make_scheme
from app.services.statevector import qsim

T_CIRCUIT = GameOptions(circuit="H 0; T 0")


class WrongSizeInput(Adversary):
    name = "wrong-size"

    def choose_input(self, view, n_wires, rng, memo=None):
        return qsim.new_register(n_wires + 1), memo


class BooleanGuess(Adversary):
    name = "boolean-guess"

    def guess(self, delivered, rng, memo):
        return True


@pytest.mark.unit
class TestIndVer:
    """Test single IND-VER trials and short runs."""

    def test_r_one_delivers_ideal_output(self, rng):
        """Test the swap back applies the circuit to the real plaintext."""
        outcome = game_service.play_indver(make_scheme("trapcode"), Adversary(), rng, r=1)
        assert outcome.delivered.accepted
        expected = qsim.apply_gate(outcome.plaintext, "X", 0)
        assert qsim.fidelity(outcome.delivered.state, expected) == pytest.approx(1.0, abs=1e-9)

    def test_r_zero_delivers_decryption(self, rng):
        """Test r = 0 hands back the decrypted output."""
        outcome = game_service.play_indver(make_scheme("traptp"), Adversary(), rng, r=0)
        assert outcome.record.accept
        expected = qsim.apply_gate(outcome.plaintext, "X", 0)
        assert qsim.fidelity(outcome.delivered.state, expected) == pytest.approx(1.0, abs=1e-9)

    def test_guess_zero_short_run(self):
        """Test the win rate of a constant guess stays near one half."""
        stats = game_service.run_indver(make_scheme("trapcode"), get_adversary("guess-zero"), 200, seed=17)
        assert stats.n == 200
        assert 0.35 <= stats.win_rate <= 0.65
        assert stats.count("accept") == 200

    def test_single_pauli_flags_every_rejection(self):
        """Test every rejected attacked trial counts as detected."""
        stats = game_service.run_indver(make_scheme("trapcode"), get_adversary("single-pauli"), 200, seed=23)
        assert stats.count("detect") > 0
        assert all(rec.detected == (not rec.accept) for rec in stats.records)

    @pytest.mark.parametrize("name", ["log-tamper", "mac-forgery", "wrong-circuit"])
    def test_log_attacks_detected(self, name):
        """Test attacks on the log, its signatures and the claimed circuit."""
        stats = game_service.run_indver(make_scheme("traptp"), get_adversary(name), 3, seed=41, options=T_CIRCUIT)
        assert stats.count("detect") == 3

    def test_honest_t_circuit_accepted(self):
        """Test honest play on a circuit with a T gadget."""
        stats = game_service.run_indver(make_scheme("traptp"), get_adversary("honest"), 3, seed=41, options=T_CIRCUIT)
        assert stats.count("accept") == 3

    @pytest.mark.slow
    @pytest.mark.parametrize("name", ["honest", "guess-zero"])
    def test_win_rate_near_half(self, name):
        """Test 10^4 trials of adversaries with no attack."""
        stats = game_service.run_game(GameKind.IND_VER, "trapcode", name, 10000, seed=2024)
        assert 0.48 <= stats.win_rate <= 0.52


    @pytest.mark.slow
    def test_single_pauli_win_rate_bound(self):
        """Test 10^4 single-Pauli trials stay within 1/2 + (1/2)(2/3)^d_c with d_c = 1."""
        stats = game_service.run_game(GameKind.IND_VER, "trapcode", "single-pauli", 10000, seed=2024)
        assert stats.win_rate <= 0.5 + 0.5 * (2 / 3) + 0.02

    @pytest.mark.slow
    @pytest.mark.parametrize("name", ["log-tamper", "mac-forgery", "wrong-circuit"])
    def test_log_attacks_always_detected(self, name):
        """Test 10^3 trials of each attack on the log are all rejected."""
        stats = game_service.run_indver(make_scheme("traptp"), get_adversary(name), 1000, seed=97, options=T_CIRCUIT)
        assert stats.count("detect") == 1000

    @pytest.mark.slow
    def test_honest_never_rejected(self):
        """Test 10^3 honest trials on the T circuit without a false rejection."""
        stats = game_service.run_indver(make_scheme("traptp"), get_adversary("honest"), 1000, seed=97, options=T_CIRCUIT)
        assert stats.count("accept") == 1000


@pytest.mark.unit
class TestOtherGames:
    """Test the two-round game and the hybrid variants."""

    def test_two_round_adaptive(self):
        """Test the adaptive second-round choice with honest evaluation."""
        stats = game_service.run_game(GameKind.IND_VER_2, "traptp", "adaptive-two-round", 4, seed=8)
        assert stats.count("accept") == 4

    def test_hybrid_traptp_matches_indver(self):
        """Test the wired channels leave TrapTP trials unchanged."""
        adversary = get_adversary("guess-zero")
        plain = game_service.run_indver(make_scheme("traptp"), adversary, 4, seed=12)
        hybrid = game_service.run_hybrid("traptp", adversary, 4, seed=12)
        assert plain.to_rows() == hybrid.to_rows()

    @pytest.mark.parametrize("variant", ["prime", "double-prime"])
    def test_hybrid_variants_accept_honest_runs(self, variant):
        """Test honest play against both side-channel variants."""
        stats = game_service.run_hybrid(variant, get_adversary("honest"), 3, seed=5, options=T_CIRCUIT)
        assert stats.count("accept") == 3

    def test_unknown_variant(self):
        """Test a variant name outside the scheme family."""
        with pytest.raises(ConfigError):
            game_service.run_hybrid("fourth", get_adversary("honest"), 1, seed=0)


@pytest.mark.unit
class TestAdversaryContract:
    """Test stage outputs are checked."""

    def test_registry(self):
        """Test the built-in names."""
        names = builtin_adversaries()
        for name in ("honest", "guess-zero", "single-pauli", "fixed-weight", "log-tamper", "mac-forgery"):
            assert name in names

    def test_unknown_adversary(self):
        """Test an unregistered name."""
        with pytest.raises(AdversaryContractError):
            get_adversary("oracle")

    def test_wrong_input_size(self):
        """Test choose_input returning too many qubits."""
        with pytest.raises(AdversaryContractError):
            game_service.play_indver(make_scheme("trapcode"), WrongSizeInput(), rng_service.stream(1))

    def test_boolean_guess(self):
        """Test guesses must be the integers 0 or 1."""
        with pytest.raises(AdversaryContractError):
            game_service.play_indver(make_scheme("trapcode"), BooleanGuess(), rng_service.stream(1))

    def test_log_attack_needs_a_log(self):
        """Test log tampering against the log-free trap code."""
        with pytest.raises(AdversaryContractError):
            game_service.play_indver(make_scheme("trapcode"), get_adversary("log-tamper"), rng_service.stream(1))
