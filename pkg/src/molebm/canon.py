"""Canonical labeling of molecular graphs.

Colors are refined Weisfeiler-Lehman style until stable; remaining ties are
split by individualizing each member of the first non-singleton cell in turn,
and the lexicographically smallest serialization over all leaves wins.
Every choice is driven by colors alone, so the result does not depend on the
input node order.
"""

from __future__ import annotations

from .errors import EmptyGraph
from .graph import AtomVocab, MolecularGraph


def _dense_rank(keys):
    order = {k: r for r, k in enumerate(sorted(set(keys)))}
    return [order[k] for k in keys]


def _refine(colors, nbrs):
    while True:
        sigs = [
            (colors[v], tuple(sorted((o, colors[u]) for u, o in nbrs[v])))
            for v in range(len(colors))
        ]
        new = _dense_rank(sigs)
        if max(new) == max(colors):
            return new
        colors = new


def _individualize(colors, v):
    return _dense_rank([(c, w != v) for w, c in enumerate(colors)])


def _leaf_form(colors, types, nbrs):
    m = len(colors)
    by_label = [0] * m
    for v, c in enumerate(colors):
        by_label[c] = types[v]
    bonds = sorted(
        (min(colors[v], colors[u]), max(colors[v], colors[u]), o)
        for v in range(m) for u, o in nbrs[v] if u > v
    )
    return tuple(by_label), tuple(bonds)


def _search(colors, types, nbrs):
    colors = _refine(colors, nbrs)
    m = len(colors)
    if max(colors) == m - 1:
        return _leaf_form(colors, types, nbrs), colors
    sizes = [0] * m
    for c in colors:
        sizes[c] += 1
    target = min(c for c in range(m) if sizes[c] > 1)
    best = None
    for v in range(m):
        if colors[v] == target:
            cand = _search(_individualize(colors, v), types, nbrs)
            if best is None or cand[0] < best[0]:
                best = cand
    return best


def _compact(g: MolecularGraph):
    """Real atoms only, as (original indices, types, neighbor lists)."""
    real = g.real_atoms().tolist()
    if not real:
        raise EmptyGraph("cannot canonicalize a graph without real atoms")
    pos = {v: i for i, v in enumerate(real)}
    types = g.atom_types()
    orders = g.bond_orders()
    nbrs = [[] for _ in real]
    for i, v in enumerate(real):
        for u in real:
            o = int(orders[v, u])
            if o:
                nbrs[i].append((pos[u], o))
    return real, [int(types[v]) for v in real], nbrs


def canonical_form(g: MolecularGraph):
    """Return ``(form, order)``.

    ``form`` is ``(atom types by label, sorted (label_i, label_j, order))`` and
    ``order[k]`` is the original node index that received label ``k``.
    """
    real, types, nbrs = _compact(g)
    seed = _dense_rank([(t, tuple(sorted(o for _, o in nbrs[v]))) for v, t in enumerate(types)])
    form, colors = _search(seed, types, nbrs)
    order = [0] * len(real)
    for i, c in enumerate(colors):
        order[c] = real[i]
    return form, order


def serialize_form(form, vocab: AtomVocab) -> bytes:
    types, bonds = form
    atoms = ".".join(vocab.symbols[t] for t in types)
    edges = ".".join(f"{i}-{j}-{o}" for i, j, o in bonds)
    return f"{atoms}|{edges}".encode("ascii")


def canonical_key(g: MolecularGraph, vocab: AtomVocab) -> bytes:
    """Byte string equal for two graphs iff they are isomorphic."""
    return serialize_form(canonical_form(g)[0], vocab)


def canonical_order(g: MolecularGraph) -> list[int]:
    return canonical_form(g)[1]
