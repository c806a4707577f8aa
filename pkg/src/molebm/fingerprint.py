"""Circular (Morgan-style) fingerprints and Tanimoto similarity."""

from __future__ import annotations

from dataclasses import dataclass
from hashlib import blake2b

import numpy as np

from .errors import EmptyGraph, LengthMismatch
from .graph import MolecularGraph

DEFAULT_RADIUS = 2
DEFAULT_NBITS = 2048


@dataclass(frozen=True, eq=False)
class Fingerprint:
    bits: np.ndarray  # bool, length nbits
    radius: int

    @property
    def nbits(self) -> int:
        return self.bits.shape[0]

    def on_bits(self) -> list[int]:
        return np.flatnonzero(self.bits).tolist()

    def __eq__(self, other):
        if not isinstance(other, Fingerprint):
            return NotImplemented
        return self.radius == other.radius and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash((self.radius, self.bits.tobytes()))


def _h(text: str) -> int:
    return int.from_bytes(blake2b(text.encode(), digest_size=8).digest(), "little")


def morgan_fingerprint(
    g: MolecularGraph,
    radius: int = DEFAULT_RADIUS,
    nbits: int = DEFAULT_NBITS,
) -> Fingerprint:
    real = g.real_atoms().tolist()
    if not real:
        raise EmptyGraph("cannot fingerprint a graph without real atoms")
    types = g.atom_types()
    orders = g.bond_orders()
    ids = {v: _h(f"atom:{types[v]}") for v in real}
    bits = np.zeros(nbits, dtype=bool)
    for v in real:
        bits[ids[v] % nbits] = True
    for _ in range(radius):
        new = {}
        for v in real:
            env = sorted((int(orders[v, u]), ids[u]) for u in real if orders[v, u])
            new[v] = _h(f"{ids[v]}:{env}")
        ids = new
        for v in real:
            bits[ids[v] % nbits] = True
    bits.setflags(write=False)
    return Fingerprint(bits, radius)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    if a.nbits != b.nbits:
        raise LengthMismatch(f"fingerprint widths differ: {a.nbits} vs {b.nbits}")
    union = np.count_nonzero(a.bits | b.bits)
    if union == 0:
        return 1.0
    return np.count_nonzero(a.bits & b.bits) / union
