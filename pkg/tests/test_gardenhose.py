"""
Tests for the garden-hose conditional-P channel.
"""

import numpy as np
import pytest

from app.exceptions import GadgetError
from app.models.gardenhose import GardenHoseSpec
from app.services.gardenhose_service import gardenhose_service
from app.services.rng_service import rng_service
from app.services.statevector import qsim

ENTRY_CLASSES = [(0, 0), (0, 1), (1, 0), (1, 1)]


@pytest.mark.unit
class TestGardenHoseSpec:
    """Test the gadget description."""

    def test_default_protocol_routes(self):
        """Test route b crosses the P link b times modulo 2."""
        spec = gardenhose_service.protocol()
        for b in (0, 1):
            assert spec.p_crossings(b) % 2 == b
            assert spec.path(b)[-1][0] == spec.out_socket

    def test_text_roundtrip(self):
        """Test the canonical text form parses back."""
        spec = gardenhose_service.protocol()
        assert GardenHoseSpec.from_text(spec.to_text()) == spec

    def test_non_canonical_text(self):
        """Test extra whitespace is refused."""
        text = gardenhose_service.protocol().to_text().replace("pair 3", "pair  3")
        with pytest.raises(GadgetError):
            GardenHoseSpec.from_text(text)

    def test_wrong_parity_rejected(self):
        """Test a layout whose route 1 never meets the P link."""
        with pytest.raises(ValueError):
            GardenHoseSpec(pair_count=2, links=((0, 2), (1, 3)), p_link=0, routes={0: ((2, 1),), 1: ((2, 1),)})

    def test_trace_route_outcome_count(self):
        """Test the frame needs two outcome bits per hop."""
        spec = gardenhose_service.protocol()
        with pytest.raises(GadgetError):
            spec.trace_route(1, 0, 0, [0, 1])


@pytest.mark.unit
class TestChannel:
    """Test the plaintext channel delivers P^b."""

    @pytest.mark.parametrize("b", [0, 1])
    @pytest.mark.parametrize("entry", ENTRY_CLASSES)
    def test_output_is_p_power_of_input(self, b, entry):
        """Test 50 random inputs for every entry class."""
        for seed in range(50):
            rng = rng_service.stream(seed)
            state = qsim.random_state(1, rng)
            run = gardenhose_service.run_channel(state, b, rng, entry=entry)
            expected = qsim.apply_gate(state, "P", 0) if b else state
            assert run.entry == entry
            assert qsim.fidelity(run.state, expected) >= 1 - 1e-9

    def test_measured_entry(self, rng):
        """Test the channel with a sampled entry measurement."""
        state = qsim.random_state(1, rng)
        run = gardenhose_service.run_channel(state, 1, rng)
        assert len(run.outcomes) == 4
        assert qsim.fidelity(run.state, qsim.apply_gate(state, "P", 0)) >= 1 - 1e-9


@pytest.mark.unit
class TestKeyUpdate:
    """Test folding a route's Pauli frame into the output pads."""

    def test_zero_frame_keeps_pads(self):
        """Test all-zero outcomes leave the pads unchanged."""
        spec = gardenhose_service.protocol()
        x = np.array([i % 2 for i in range(21)], dtype=np.uint8)
        z = 1 - x
        new_x, new_z = gardenhose_service.gh_key_update(1, x, z, np.arange(21), 0, 0, [0, 0, 0, 0], 1, spec)
        assert np.array_equal(new_x, x)
        assert np.array_equal(new_z, z)

    def test_frame_lands_on_code_positions(self):
        """Test the traced frame flips exactly the data positions under the identity permutation."""
        spec = gardenhose_service.protocol()
        zeros = np.zeros(21, dtype=np.uint8)
        fx, fz = spec.trace_route(0, 1, 0, [0, 0])
        new_x, new_z = gardenhose_service.gh_key_update(1, zeros, zeros, np.arange(21), 1, 0, [0, 0], 0, spec)
        assert fx == 1
        assert list(new_x) == [fx] * 7 + [0] * 14
        assert list(new_z) == [fz] * 7 + [0] * 14
