"""
Registry of classical functions evaluated under homomorphic encryption.

Plaintexts are ascii byte strings: bit strings as b"0110", permutations as
b"3,0,1,2", bases as b"Z"/b"X", garden-hose descriptions in their text form.
A function id may carry parameters after a colon ("expand-bit:7").
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from app.exceptions import GadgetError, HomomorphicError
from app.models.gardenhose import GardenHoseSpec
from app.models.quantum import Basis
from app.services.block_register import logical_mask, permute_bits, unpermute_bits
from app.services.css_code import get_code
from app.services.trapcode_service import check_record, cnot_key_update

logger = logging.getLogger("app.clcrypto")


def encode_bits(bits) -> bytes:
    return "".join("1" if int(b) else "0" for b in np.asarray(bits).reshape(-1)).encode("ascii")


def decode_bits(data: bytes, length: Optional[int] = None) -> np.ndarray:
    if any(ch not in b"01" for ch in data):
        raise HomomorphicError("bit-string plaintext may only hold '0' and '1'")
    arr = np.frombuffer(data, dtype=np.uint8) - ord("0")
    if length is not None and arr.shape[0] != length:
        raise HomomorphicError(f"expected {length} bits, got {arr.shape[0]}")
    return arr.astype(np.uint8)


def encode_perm(pi) -> bytes:
    return ",".join(str(int(p)) for p in pi).encode("ascii")


def decode_perm(data: bytes) -> np.ndarray:
    try:
        pi = np.array([int(p) for p in data.decode("ascii").split(",")], dtype=np.int64)
    except (UnicodeDecodeError, ValueError) as e:
        raise HomomorphicError("permutation plaintext is malformed") from e
    if sorted(pi.tolist()) != list(range(len(pi))):
        raise HomomorphicError("permutation plaintext is not a permutation")
    return pi


def decode_bit(data: bytes) -> int:
    if data not in (b"0", b"1"):
        raise HomomorphicError(f"expected a single bit, got {data!r}")
    return int(data == b"1")


def decode_basis(data: bytes) -> Basis:
    try:
        return Basis(data.decode("ascii"))
    except (UnicodeDecodeError, ValueError) as e:
        raise HomomorphicError(f"expected a basis, got {data!r}") from e


def decode_spec(data: bytes) -> GardenHoseSpec:
    try:
        return GardenHoseSpec.from_text(data.decode("ascii"))
    except (UnicodeDecodeError, GadgetError) as e:
        raise HomomorphicError(f"bad garden-hose description: {e}") from e


def _int_param(params: Sequence[str], name: str) -> int:
    if len(params) != 1 or not params[0].isdigit():
        raise HomomorphicError(f"{name} takes one integer parameter")
    return int(params[0])


def _xor(params, inputs):
    a, b = decode_bits(inputs[0]), decode_bits(inputs[1])
    if a.shape != b.shape:
        raise HomomorphicError("xor operands differ in length")
    return [encode_bits(a ^ b)]


def _expand_bit(params, inputs):
    m = _int_param(params, "expand-bit")
    out = np.zeros(3 * m, dtype=np.uint8)
    out[:m] = decode_bit(inputs[0])
    return [encode_bits(out)]


def _bit_flip_mask(params, inputs):
    m = _int_param(params, "bit-flip-mask")
    v = decode_bits(inputs[0], 3 * m)
    flip = np.zeros(3 * m, dtype=np.uint8)
    flip[:m] = 1
    return [encode_bits(v ^ flip)]


def _permute(params, inputs):
    pi = decode_perm(inputs[1])
    return [encode_bits(permute_bits(decode_bits(inputs[0], len(pi)), pi))]


def _unpermute(params, inputs):
    pi = decode_perm(inputs[1])
    return [encode_bits(unpermute_bits(decode_bits(inputs[0], len(pi)), pi))]


def _cnot_key_update(params, inputs):
    xi, zi, xj, zj = (decode_bits(v) for v in inputs)
    if len({len(xi), len(zi), len(xj), len(zj)}) != 1:
        raise HomomorphicError("cnot-key-update pads differ in length")
    return [encode_bits(v) for v in cnot_key_update(xi, zi, xj, zj)]


def _verdec_measurement(params, inputs):
    code = get_code(_int_param(params, "tc-verdec-measurement"))
    pi = decode_perm(inputs[0])
    size = 3 * code.m
    if len(pi) != size:
        raise HomomorphicError("permutation does not match the code")
    x, z, bits = (decode_bits(v, size) for v in inputs[1:4])
    check = check_record(code, pi, x, z, bits, decode_basis(inputs[4]))
    return [b"1" if check.bit else b"0", b"1" if check.accepted else b"0"]


def _gh_route(params, inputs):
    b = decode_bit(inputs[0])
    spec = decode_spec(inputs[1])
    if b not in spec.routes:
        raise HomomorphicError(f"gadget has no route for bit {b}")
    return [b"1" if b else b"0"]


def _t_key_update(params, inputs):
    code = get_code(_int_param(params, "t-key-update"))
    size = 3 * code.m
    x, z = decode_bits(inputs[0], size), decode_bits(inputs[1], size)
    pi = decode_perm(inputs[2])
    a1, a2 = decode_bit(inputs[3]), decode_bit(inputs[4])
    outcomes = decode_bits(inputs[5])
    route = decode_bit(inputs[6])
    spec = decode_spec(inputs[7])
    try:
        fx, fz = spec.trace_route(route, a1, a2, [int(v) for v in outcomes])
    except (GadgetError, ValueError) as e:
        raise HomomorphicError(f"t-key-update: {e}") from e
    mask = logical_mask(pi, code.m)
    return [encode_bits(x ^ (mask * fx)), encode_bits(z ^ (mask * fz))]


def _concat(params, inputs):
    return [b"".join(inputs)]


@dataclass(frozen=True)
class HeFunction:
    name: str
    arity: Optional[int]
    outputs: int
    fn: Callable[[Sequence[str], Sequence[bytes]], list[bytes]]
    cross_epoch: bool = False
    doc: str = ""


_REGISTRY: dict[str, HeFunction] = {
    f.name: f
    for f in (
        HeFunction("xor", 2, 1, _xor, doc="bitwise xor of two bit strings"),
        HeFunction("expand-bit", 1, 1, _expand_bit, doc="b -> b^m 0^2m"),
        HeFunction("bit-flip-mask", 1, 1, _bit_flip_mask, doc="flip the first m bits"),
        HeFunction("permute", 2, 1, _permute, doc="[v, pi] -> permute_pi(v)"),
        HeFunction("unpermute", 2, 1, _unpermute, doc="[v, pi] -> unpermute_pi(v)"),
        HeFunction("cnot-key-update", 4, 4, _cnot_key_update, doc="(xi, zi, xj, zj) -> (xi, zi^zj, xi^xj, zj)"),
        HeFunction("tc-verdec-measurement", 5, 2, _verdec_measurement, doc="[pi, x, z, record, basis] -> [bit, flag]"),
        HeFunction("gh-route", 2, 1, _gh_route, cross_epoch=True, doc="[b, g] -> route bit, re-encrypted"),
        HeFunction("t-key-update", 8, 2, _t_key_update, doc="[x, z, pi, a1, a2, a, route, g] -> [x', z']"),
        HeFunction("concat", None, 1, _concat, doc="concatenate plaintexts"),
    )
}


def registered_functions() -> list[str]:
    return sorted(_REGISTRY)


def lookup(function_id: str) -> tuple[HeFunction, tuple[str, ...]]:
    """Resolve "name" or "name:param" to the registered function and its parameters."""
    name, _, param = function_id.partition(":")
    if name not in _REGISTRY:
        raise HomomorphicError(f"unknown function id {function_id!r}")
    return _REGISTRY[name], tuple(param.split(",")) if param else ()


def apply_function(function_id: str, plaintexts: Sequence[bytes]) -> list[bytes]:
    """Evaluate a registered function on plaintexts."""
    func, params = lookup(function_id)
    if func.arity is not None and len(plaintexts) != func.arity:
        raise HomomorphicError(f"{func.name} takes {func.arity} inputs, got {len(plaintexts)}")
    outputs = func.fn(params, list(plaintexts))
    if len(outputs) != func.outputs:
        raise HomomorphicError(f"{func.name} produced {len(outputs)} outputs")
    return outputs
