"""
Garden-hose gadgets for the T gate.

A gadget is a chain of EPR pairs, one of them twisted by P. Teleporting a
qubit into the input socket and Bell-measuring along the route chosen by an
encrypted bit b delivers P^b of the qubit at the output socket, up to a
Pauli the trace of the route determines.
"""

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from app.exceptions import GadgetError
from app.models.crypto import HeKeySet, MacKey, SignedMessage
from app.models.gardenhose import GardenHoseSpec
from app.models.quantum import Basis
from app.models.traptp import SideChannel, gadget_label, pad_label
from app.services.block_register import BlockRegister
from app.services.he_functions import apply_function, decode_bits, encode_bits, encode_perm
from app.services.he_service import HomomorphicService, homomorphic_service
from app.services.macro_expansion import socket_block
from app.services.record_service import RecordService
from app.services.rng_service import RngStream
from app.services.statevector import StateVector, qsim
from app.services.workspace import QubitWorkspace

if TYPE_CHECKING:
    from app.services.evaluation_session import EvaluationSession, Handle

logger = logging.getLogger("app.gardenhose")


@dataclass
class GadgetState:
    """Block ids of one gadget's sockets."""

    index: int
    gamma_in: int
    gamma_out: int
    gamma_mid: list[int] = field(default_factory=list)


@dataclass
class GeneratedGadget:
    spec: GardenHoseSpec
    state: GadgetState
    blocks: dict[str, int]
    pads: dict[str, SignedMessage]
    record: SignedMessage
    pi_i: np.ndarray


@dataclass
class ChannelRun:
    """Plaintext run of a gadget: output state and every Bell outcome."""

    state: StateVector
    entry: tuple[int, int]
    outcomes: list[int]
    frame: tuple[int, int]


class GardenHoseService:
    """Gadget generation, conditional-P evaluation and the T key update."""

    def __init__(self, he: Optional[HomomorphicService] = None):
        self.he = he or homomorphic_service
        self.records = RecordService(self.he)
        self.logger = logger

    def protocol(self) -> GardenHoseSpec:
        spec = self.he.backend.garden_hose_protocol()
        if spec is None:
            raise GadgetError(f"backend {self.he.backend.tag} declares no garden-hose protocol")
        return spec

    def _entangle(self, spec: GardenHoseSpec, ws: QubitWorkspace) -> dict[int, int]:
        """One EPR pair per link, P on the second half of the twisted link; returns socket -> handle."""
        handles: dict[int, int] = {}
        for index, (a, b) in enumerate(spec.links):
            _, _, pair = qsim.make_epr()
            if index == spec.p_link:
                pair = qsim.apply_gate(pair, "P", 1)
            ha, hb = ws.add(pair)
            handles[a], handles[b] = ha, hb
        return handles

    def gadget_gen(
        self,
        register: BlockRegister,
        index: int,
        pi: np.ndarray,
        he_keys: HeKeySet,
        mac_key: MacKey,
        rng: RngStream,
        side: Optional[SideChannel] = None,
    ) -> GeneratedGadget:
        """
        Create gadget ``index`` inside an evaluation-key register.

        The input and output sockets sit under the global permutation with
        epoch-0 pads; the inner sockets under a fresh permutation pi_i with
        epoch-i pads. The signed gadget record holds g_i, pi_i and the
        epoch-(i-1) secret key, all under pk_i.

        Args:
            register: Register receiving the socket blocks
            index: Gadget number, from 1
            pi: Global permutation
            he_keys: Key pairs of every epoch
            mac_key: Signing key
            rng: Randomness for pi_i, pads and nonces
            side: Hybrid side channel

        Returns:
            Spec, socket blocks, their signed pads and the gadget record
        """
        if not 1 <= index <= he_keys.t:
            raise GadgetError(f"gadget {index} needs epochs {index - 1} and {index}, keys cover 0..{he_keys.t}")
        spec = self.protocol()
        size = 3 * register.m
        pi_i = rng.permutation(size)
        handles = self._entangle(spec, register.workspace)
        outer = (spec.in_socket, spec.out_socket)
        blocks: dict[str, int] = {}
        pads: dict[str, SignedMessage] = {}
        for socket in sorted(handles):
            name = socket_block(index, socket)
            perm = pi if socket in outer else pi_i
            pk = he_keys.pk(0) if socket in outer else he_keys.pk(index)
            x, z = rng.bits(size), rng.bits(size)
            blocks[name] = register.add_block(handles[socket], perm, x, z, label=name)
            pads[pad_label(name)] = self.records.seal(
                pad_label(name), [encode_bits(x), encode_bits(z)], pk, mac_key, rng, side
            )
        material = self.he.backend.secret_material(he_keys.pair(index - 1))
        record = self.records.seal(
            gadget_label(index),
            [spec.to_text().encode("ascii"), encode_perm(pi_i), material],
            he_keys.pk(index),
            mac_key,
            rng,
            side,
        )
        state = GadgetState(
            index=index,
            gamma_in=blocks[socket_block(index, spec.in_socket)],
            gamma_out=blocks[socket_block(index, spec.out_socket)],
            gamma_mid=[blocks[socket_block(index, s)] for s in sorted(handles) if s not in outer],
        )
        self.logger.debug(f"Gadget generated index={index} pairs={spec.pair_count}")
        return GeneratedGadget(spec, state, blocks, pads, record, pi_i)

    def gh_key_update(
        self,
        level: int,
        x: np.ndarray,
        z: np.ndarray,
        pi: np.ndarray,
        a1: int,
        a2: int,
        outcomes: Sequence[int],
        route: int,
        spec: GardenHoseSpec,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Plaintext form of the T key update: fold the route's Pauli frame into the output pads."""
        new_x, new_z = apply_function(
            f"t-key-update:{level}",
            [
                encode_bits(x),
                encode_bits(z),
                encode_perm(pi),
                str(a1 & 1).encode("ascii"),
                str(a2 & 1).encode("ascii"),
                encode_bits(outcomes),
                str(route).encode("ascii"),
                spec.to_text().encode("ascii"),
            ],
        )
        return decode_bits(new_x), decode_bits(new_z)

    def run_channel(
        self,
        state: StateVector,
        b: int,
        rng: RngStream,
        spec: Optional[GardenHoseSpec] = None,
        entry: Optional[tuple[int, int]] = None,
    ) -> ChannelRun:
        """
        Unencrypted gadget run on a one-qubit state.

        Args:
            state: Input qubit
            b: Route bit
            rng: Measurement randomness
            spec: Gadget layout (the backend's by default)
            entry: Forced (a1, a2) of the entry Bell measurement

        Returns:
            Corrected output (P^b of the input) with the outcomes and the frame removed
        """
        spec = spec or self.protocol()
        ws = QubitWorkspace()
        (data,) = ws.add(state)
        sockets = self._entangle(spec, ws)
        if entry is None:
            a1, a2 = ws.bell_measure(data, sockets[spec.in_socket], rng)
        else:
            a1, a2 = entry
            ws.apply_cnot(data, sockets[spec.in_socket])
            ws.project(data, a2, Basis.X)
            ws.project(sockets[spec.in_socket], a1, Basis.Z)
        outcomes: list[int] = []
        for u, v in spec.routes[b]:
            a, bb = ws.bell_measure(sockets[u], sockets[v], rng)
            outcomes.extend([a, bb])
        fx, fz = spec.trace_route(b, a1, a2, outcomes)
        out = sockets[spec.out_socket]
        ws.apply_pauli(out, fx, fz)
        leftovers = [h for s, h in sockets.items() if s != spec.out_socket and h in ws]
        ws.discard(leftovers, rng)
        return ChannelRun(ws.extract([out], rng), (a1, a2), outcomes, (fx, fz))

    def eval_cond_p(self, session: "EvaluationSession", data: str, index: int, condition: str) -> str:
        """
        Conditional P through gadget ``index`` on an encrypted block.

        Args:
            session: Evaluation in progress (epoch ``index``)
            data: Block to teleport into the gadget
            index: Gadget number
            condition: Block whose encrypted outcome b (epoch index-1) selects the route

        Returns:
            Name of the output socket block now holding the data
        """
        if index in session.used_gadgets:
            raise GadgetError(f"gadget {index} was already consumed")
        spec = self.protocol()
        session.used_gadgets.add(index)
        b_ct: "Handle" = session.outcome(condition)
        g_ct, _, _ = session.gadget(index)
        a1, a2 = session.bell(data, socket_block(index, spec.in_socket))
        (route_ct,) = session.eval_function("gh-route", [b_ct, g_ct])
        route = self.he.backend.route_choice(b_ct.ct)
        hops: list["Handle"] = []
        for u, v in spec.routes[route]:
            a, bb = session.bell(socket_block(index, u), socket_block(index, v))
            hops.extend([a, bb])
        (outcomes_ct,) = session.eval_function("concat", hops)
        out = socket_block(index, spec.out_socket)
        x, z = session.pads_of(out)
        new_x, new_z = session.eval_function(
            f"t-key-update:{session.level}", [x, z, session.perm_for(out), a1, a2, outcomes_ct, route_ct, g_ct]
        )
        session.set_pads(out, new_x, new_z)
        for socket in range(2 * spec.pair_count):
            name = socket_block(index, socket)
            if name != out:
                session.drop_block(name)
        self.logger.debug(f"Conditional P evaluated gadget={index} hops={len(spec.routes[route])}")
        return out


# Global instance
gardenhose_service = GardenHoseService()
