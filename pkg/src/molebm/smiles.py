"""A deliberately small SMILES dialect for kekulized, hydrogen-suppressed molecules.

Grammar (EBNF)::

    smiles  = chain ;
    chain   = atom , { [ bond ] , ( atom | ring ) | branch } ;
    branch  = "(" , [ bond ] , chain , ")" ;
    ring    = digit | "%" , digit , digit ;
    atom    = "B" | "C" | "N" | "O" | "F" | "P" | "S" | "Cl" | "Br" | "I" ;
    bond    = "-" | "=" | "#" ;
    digit   = "1" | ... | "9" ;          (two-digit form after "%")

No brackets, aromatic atoms, charges, isotopes, stereo marks or dots.
Unsupported input fails with the 0-based character position.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .canon import canonical_order
from .errors import Disconnected, EmptyGraph, ParseError
from .graph import AtomVocab, MolecularGraph, connected_components

ORGANIC = ("Cl", "Br", "B", "C", "N", "O", "F", "P", "S", "I")
BOND_ORDER = {"-": 1, "=": 2, "#": 3}
BOND_SYMBOL = {1: "", 2: "=", 3: "#"}


class SmilesError(ParseError):
    pass


class UnsupportedToken(SmilesError):
    pass


class UnclosedRing(SmilesError):
    pass


class UnbalancedParen(SmilesError):
    pass


class EmptyInput(SmilesError):
    pass


@dataclass
class DatasetRecord:
    atoms: list[str]
    bonds: list[tuple[int, int, int]]
    y_raw: float | None = None
    extra: dict = field(default_factory=dict, repr=False)


def parse_smiles_lite(text: str) -> DatasetRecord:
    atoms: list[str] = []
    bonds: dict[tuple[int, int], int] = {}
    prev = None
    pending = None  # (order, position) of a bond symbol awaiting its partner
    stack = []  # (atom to return to, position of "(", atom count at "(")
    rings = {}  # ring number -> (atom, order or None, position)

    def add_bond(a, b, order, pos):
        key = (min(a, b), max(a, b))
        if a == b:
            raise SmilesError("ring closure bonds an atom to itself", position=pos)
        if key in bonds:
            raise SmilesError(f"atoms {key[0]} and {key[1]} are bonded twice", position=pos)
        bonds[key] = order

    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        symbol = next((s for s in ORGANIC if text.startswith(s, i)), None)
        if symbol is not None:
            idx = len(atoms)
            atoms.append(symbol)
            if prev is not None:
                add_bond(prev, idx, pending[0] if pending else 1, i)
            pending = None
            prev = idx
            i += len(symbol)
            continue
        if ch in BOND_ORDER:
            if prev is None:
                raise SmilesError(f"bond {ch!r} has no preceding atom", position=i)
            if pending is not None:
                raise SmilesError("two bond symbols in a row", position=i)
            pending = (BOND_ORDER[ch], i)
        elif ch == "(":
            if prev is None:
                raise SmilesError("branch has no preceding atom", position=i)
            if pending is not None:
                raise SmilesError("bond symbol before a branch", position=pending[1])
            stack.append((prev, i, len(atoms)))
        elif ch == ")":
            if not stack:
                raise UnbalancedParen("unmatched ')'", position=i)
            if pending is not None:
                raise SmilesError("bond symbol without a following atom", position=pending[1])
            anchor, _, count = stack.pop()
            if len(atoms) == count:
                raise SmilesError("empty branch", position=i)
            prev = anchor
        elif ch.isdigit() or ch == "%":
            start = i
            if ch == "%":
                digits = text[i + 1:i + 3]
                if len(digits) != 2 or not (digits.isascii() and digits.isdigit()):
                    raise UnsupportedToken("'%' must be followed by two digits", position=i)
                num = int(digits)
                i += 2
            else:
                if ch not in "123456789":
                    raise UnsupportedToken(f"unsupported ring label {ch!r}", position=i)
                num = int(ch)
            if prev is None:
                raise SmilesError("ring label has no preceding atom", position=start)
            order = pending[0] if pending else None
            if num in rings:
                atom, open_order, _ = rings.pop(num)
                if order and open_order and order != open_order:
                    raise SmilesError(f"ring {num} opened and closed with different bonds", position=start)
                add_bond(atom, prev, order or open_order or 1, start)
            else:
                rings[num] = (prev, order, start)
            pending = None
        else:
            raise UnsupportedToken(f"unsupported character {ch!r}", position=i)
        i += 1

    if not atoms:
        raise EmptyInput("no atoms in input", position=0)
    if pending is not None:
        raise SmilesError("bond symbol without a following atom", position=pending[1])
    if stack:
        raise UnbalancedParen("unclosed '('", position=stack[-1][1])
    if rings:
        num, (_, _, pos) = min(rings.items(), key=lambda kv: kv[1][2])
        raise UnclosedRing(f"ring {num} never closed", position=pos)
    return DatasetRecord(atoms, [(a, b, o) for (a, b), o in bonds.items()])


def _ring_label(num: int) -> str:
    return str(num) if num < 10 else f"%{num:02d}"


def write_smiles_lite(g: MolecularGraph, vocab: AtomVocab) -> str:
    """Serialize a connected graph, walking from the canonically first atom."""
    comps = connected_components(g)
    if not comps:
        raise EmptyGraph("cannot write a graph without real atoms")
    if len(comps) > 1:
        raise Disconnected(f"graph has {len(comps)} fragments")
    order = canonical_order(g)
    rank = {v: r for r, v in enumerate(order)}
    types = g.atom_types()
    orders = g.bond_orders()
    nbrs = {v: sorted((u for u in order if orders[v, u]), key=rank.__getitem__) for v in order}

    children = {v: [] for v in order}
    preorder = []
    ring_edges = []
    seen_rings = set()
    visited = set()

    def dfs(v, parent):
        visited.add(v)
        preorder.append(v)
        for u in nbrs[v]:
            if u == parent:
                continue
            if u in visited:
                edge = frozenset((u, v))
                if edge not in seen_rings:
                    seen_rings.add(edge)
                    ring_edges.append((u, v))
            else:
                children[v].append(u)
                dfs(u, v)

    dfs(order[0], None)
    pos = {v: i for i, v in enumerate(preorder)}
    # ring edges incident to each atom, ordered by the partner's position
    at_atom = {v: [] for v in order}
    for a, b in ring_edges:
        at_atom[a].append(b)
        at_atom[b].append(a)
    for v in at_atom:
        at_atom[v].sort(key=pos.__getitem__)

    open_labels = {}  # frozenset edge -> ring number
    parts = []

    def emit(v):
        parts.append(vocab.symbols[types[v]])
        released = []
        for u in at_atom[v]:
            edge = frozenset((u, v))
            if edge in open_labels:
                num = open_labels.pop(edge)
                parts.append(_ring_label(num))
                released.append(num)
            else:
                used = set(open_labels.values()) | set(released)
                num = next(k for k in range(1, 100) if k not in used)
                open_labels[edge] = num
                parts.append(BOND_SYMBOL[int(orders[u, v])] + _ring_label(num))
        kids = children[v]
        for k, u in enumerate(kids):
            bond = BOND_SYMBOL[int(orders[v, u])]
            if k < len(kids) - 1:
                parts.append("(" + bond)
                emit(u)
                parts.append(")")
            else:
                parts.append(bond)
                emit(u)

    emit(order[0])
    return "".join(parts)
