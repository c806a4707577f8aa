"""Discrete and relaxed molecular-graph tensors.

A molecule with at most ``n`` heavy atoms is stored as a one-hot node matrix
``X`` of shape ``(n, b + 1)`` and a one-hot adjacency tensor ``A`` of shape
``(n, n, c + 1)``. The last node channel is the virtual (padding) atom and the
last edge channel the virtual (no-bond) edge. Bond channel ``k < c`` encodes
bond order ``k + 1``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DataError,
    DuplicateBond,
    EmptyGraph,
    IndexOutOfVocab,
    InvalidPermutation,
    ShapeMismatch,
    TooManyAtoms,
)

VIRTUAL_SYMBOL = "⋆"

# maximum total bond order for neutral, hydrogen-suppressed atoms
DEFAULT_VALENCE = {
    "C": 4, "N": 3, "O": 2, "F": 1, "P": 5, "S": 6,
    "Cl": 1, "Br": 1, "I": 1, "B": 3,
}


@dataclass(frozen=True)
class Dims:
    n: int
    b: int
    c: int

    def __post_init__(self):
        if self.n < 1 or self.b < 1 or self.c < 1:
            raise DataError(f"dimensions must be positive, got {self}")

    @property
    def x_shape(self):
        return (self.n, self.b + 1)

    @property
    def a_shape(self):
        return (self.n, self.n, self.c + 1)


@dataclass(frozen=True)
class AtomVocab:
    """Ordered real atom symbols with their maximum valences.

    The virtual symbol is implicit and always occupies index ``b``.
    """

    symbols: tuple[str, ...]
    valence: tuple[int, ...]

    def __post_init__(self):
        if len(self.symbols) != len(self.valence):
            raise DataError("symbols and valence must have equal length")
        if not self.symbols:
            raise DataError("vocabulary needs at least one atom type")
        if len(set(self.symbols)) != len(self.symbols) or VIRTUAL_SYMBOL in self.symbols:
            raise DataError(f"atom symbols must be unique and real: {self.symbols}")
        if any(v < 1 for v in self.valence):
            raise DataError(f"valences must be >= 1: {self.valence}")

    @classmethod
    def from_symbols(cls, symbols: Iterable[str], overrides: Mapping[str, int] | None = None):
        symbols = tuple(symbols)
        table = dict(DEFAULT_VALENCE)
        if overrides:
            table.update(overrides)
        missing = [s for s in symbols if s not in table]
        if missing:
            raise DataError(f"no valence known for {missing}; supply an override")
        return cls(symbols, tuple(int(table[s]) for s in symbols))

    @property
    def b(self) -> int:
        return len(self.symbols)

    @property
    def all_symbols(self) -> tuple[str, ...]:
        return self.symbols + (VIRTUAL_SYMBOL,)

    def index(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise IndexOutOfVocab(f"atom symbol {symbol!r} not in vocabulary {self.symbols}") from None

    def dims(self, n: int, c: int = 3) -> Dims:
        return Dims(n, self.b, c)


QM9_VOCAB = AtomVocab.from_symbols(["C", "N", "O", "F"])
ZINC_VOCAB = AtomVocab.from_symbols(["C", "N", "O", "F", "P", "S", "Cl", "Br", "I"])

# name -> (vocab, max atom count)
PRESETS = {
    "qm9": (QM9_VOCAB, 9),
    "zinc": (ZINC_VOCAB, 38),
}


def _readonly(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MolecularGraph:
    dims: Dims
    X: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        if self.X.shape != self.dims.x_shape or self.A.shape != self.dims.a_shape:
            raise ShapeMismatch(
                f"expected X{self.dims.x_shape} and A{self.dims.a_shape}, "
                f"got X{self.X.shape} and A{self.A.shape}"
            )

    @classmethod
    def from_types(cls, dims: Dims, types: Sequence[int], orders: np.ndarray) -> "MolecularGraph":
        """Build from per-node type indices and a symmetric bond-order matrix.

        ``types[i] == dims.b`` marks a virtual node and ``orders[i, j] == 0``
        a virtual edge.
        """
        types = np.asarray(types, dtype=np.int64)
        orders = np.asarray(orders, dtype=np.int64)
        n = dims.n
        X = np.zeros(dims.x_shape, dtype=np.uint8)
        X[np.arange(n), types] = 1
        channel = np.where(orders > 0, orders - 1, dims.c)
        np.fill_diagonal(channel, dims.c)
        A = np.zeros(dims.a_shape, dtype=np.uint8)
        ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        A[ii, jj, channel] = 1
        return cls(dims, _readonly(X), _readonly(A))

    def atom_types(self) -> np.ndarray:
        return np.argmax(self.X, axis=1)

    def bond_orders(self) -> np.ndarray:
        """Symmetric ``(n, n)`` integer matrix; 0 means no bond."""
        ch = np.argmax(self.A, axis=2)
        return np.where(ch == self.dims.c, 0, ch + 1)

    def real_atoms(self) -> np.ndarray:
        return np.flatnonzero(self.atom_types() != self.dims.b)

    def num_atoms(self) -> int:
        return int(np.count_nonzero(self.atom_types() != self.dims.b))

    def bonds(self) -> list[tuple[int, int, int]]:
        orders = self.bond_orders()
        ii, jj = np.nonzero(np.triu(orders, 1))
        return [(int(i), int(j), int(orders[i, j])) for i, j in zip(ii, jj)]

    def __eq__(self, other):
        if not isinstance(other, MolecularGraph):
            return NotImplemented
        return (
            self.dims == other.dims
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.A, other.A)
        )

    def __hash__(self):
        return hash((self.dims, self.X.tobytes(), self.A.tobytes()))

    def __repr__(self):
        return f"MolecularGraph(atoms={self.atom_types().tolist()}, bonds={self.bonds()})"


@dataclass(eq=False)
class DenseGraphTensor:
    """Continuous relaxation of ``(X, A)`` that Langevin dynamics moves around."""

    X: np.ndarray
    A: np.ndarray
    dims: Dims | None = field(default=None, repr=False)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.A = np.asarray(self.A, dtype=np.float64)
        if self.dims is not None and (self.X.shape != self.dims.x_shape or self.A.shape != self.dims.a_shape):
            raise ShapeMismatch(f"tensor shapes X{self.X.shape}, A{self.A.shape} do not match {self.dims}")

    @classmethod
    def from_graph(cls, g: MolecularGraph) -> "DenseGraphTensor":
        return cls(g.X.astype(np.float64), g.A.astype(np.float64), g.dims)

    def copy(self) -> "DenseGraphTensor":
        return DenseGraphTensor(self.X.copy(), self.A.copy(), self.dims)


def encode_one_hot(atoms: Sequence[int], bonds: Iterable[tuple[int, int, int]], dims: Dims) -> MolecularGraph:
    atoms = list(atoms)
    if len(atoms) > dims.n:
        raise TooManyAtoms(f"{len(atoms)} atoms exceed the maximum of {dims.n}")
    for a in atoms:
        if not 0 <= a < dims.b:
            raise IndexOutOfVocab(f"atom type index {a} outside 0..{dims.b - 1}")
    types = atoms + [dims.b] * (dims.n - len(atoms))
    orders = np.zeros((dims.n, dims.n), dtype=np.int64)
    for i, j, order in bonds:
        if not 0 <= i < j < len(atoms):
            raise DataError(f"bond ({i}, {j}) needs 0 <= i < j < {len(atoms)}")
        if not 1 <= order <= dims.c:
            raise DataError(f"bond order {order} outside 1..{dims.c}")
        if orders[i, j]:
            raise DuplicateBond(f"bond ({i}, {j}) listed twice")
        orders[i, j] = orders[j, i] = order
    return MolecularGraph.from_types(dims, types, orders)


def permute(g: MolecularGraph, perm: Sequence[int]) -> MolecularGraph:
    """Reorder nodes so that new node ``i`` is old node ``perm[i]``."""
    perm = np.asarray(perm)
    if perm.shape != (g.dims.n,) or not np.array_equal(np.sort(perm), np.arange(g.dims.n)):
        raise InvalidPermutation(f"not a permutation of {g.dims.n} nodes: {perm.tolist()}")
    X = g.X[perm]
    A = g.A[perm][:, perm]
    return MolecularGraph(g.dims, _readonly(np.ascontiguousarray(X)), _readonly(np.ascontiguousarray(A)))


def permute_dense(s: DenseGraphTensor, perm: Sequence[int]) -> DenseGraphTensor:
    perm = np.asarray(perm)
    return DenseGraphTensor(s.X[perm], s.A[perm][:, perm], s.dims)


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    excess: dict[int, int]  # real atom index -> total bond order minus valence


def check_valency(g: MolecularGraph, vocab: AtomVocab) -> ValidityReport:
    types = g.atom_types()
    totals = g.bond_orders().sum(axis=1)
    excess = {}
    for i in np.flatnonzero(types != g.dims.b):
        excess[int(i)] = int(totals[i]) - vocab.valence[types[i]]
    return ValidityReport(all(e <= 0 for e in excess.values()), excess)


def correct_validity(g: MolecularGraph, vocab: AtomVocab) -> MolecularGraph:
    """Lower bond orders until every atom satisfies its valence.

    Repeatedly takes the atom with the largest excess (lowest index on ties)
    and decrements its highest-order bond (lowest ``(i, j)`` on ties); a
    single bond that is decremented disappears.
    """
    types = g.atom_types()
    orders = g.bond_orders().copy()
    real = types != g.dims.b
    cap = np.array([vocab.valence[t] if r else 0 for t, r in zip(types, real)])
    changed = False
    while True:
        excess = np.where(real, orders.sum(axis=1) - cap, np.iinfo(np.int64).min)
        i = int(np.argmax(excess))
        if excess[i] <= 0:
            break
        # for a fixed atom the lowest partner index is also the lowest (i, j) pair
        row = orders[i]
        j = int(np.flatnonzero(row == row.max())[0])
        orders[i, j] -= 1
        orders[j, i] -= 1
        changed = True
    if not changed:
        return g
    return MolecularGraph.from_types(g.dims, types, orders)


def connected_components(g: MolecularGraph) -> list[list[int]]:
    """Components over real bonds, each sorted, listed by smallest member."""
    orders = g.bond_orders()
    seen = set()
    comps = []
    for start in g.real_atoms().tolist():
        if start in seen:
            continue
        comp = []
        queue = deque([start])
        seen.add(start)
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in np.flatnonzero(orders[u]).tolist():
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        comps.append(sorted(comp))
    return comps


def largest_component(g: MolecularGraph) -> MolecularGraph:
    comps = connected_components(g)
    if not comps:
        raise EmptyGraph("graph has no real atoms")
    if len(comps) == 1:
        return g
    # max() keeps the first of equal-size components, which has the smallest index
    keep = max(comps, key=len)
    mask = np.zeros(g.dims.n, dtype=bool)
    mask[keep] = True
    types = np.where(mask, g.atom_types(), g.dims.b)
    orders = g.bond_orders() * np.outer(mask, mask)
    return MolecularGraph.from_types(g.dims, types, orders)


def discretize(s: DenseGraphTensor, dims: Dims | None = None) -> MolecularGraph:
    """Symmetrize, then argmax node and edge channels.

    Edges touching a virtual node are forced to the virtual channel.
    """
    dims = dims or s.dims
    if dims is None:
        n, bp1 = s.X.shape
        dims = Dims(n, bp1 - 1, s.A.shape[2] - 1)
    types = np.argmax(s.X, axis=1)
    sym = s.A + s.A.transpose(1, 0, 2)
    channel = np.argmax(sym, axis=2)
    orders = np.where(channel == dims.c, 0, channel + 1)
    real = types != dims.b
    orders = orders * np.outer(real, real)
    np.fill_diagonal(orders, 0)
    # sym is symmetric, so orders already is; keep the upper triangle authoritative anyway
    upper = np.triu(orders, 1)
    return MolecularGraph.from_types(dims, types, upper + upper.T)
