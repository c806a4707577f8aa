import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from molebm.canon import canonical_form, canonical_key, canonical_order
from molebm.errors import EmptyGraph
from molebm.graph import QM9_VOCAB, Dims, MolecularGraph, encode_one_hot, permute

from conftest import CNO, graphs, random_graph
from oracles import brute_force_form, small_molecules


def test_key_format():
    g = encode_one_hot([0, 2, 0], [(0, 1, 1), (1, 2, 1)], Dims(4, 4, 3))
    assert canonical_key(g, QM9_VOCAB) == b"C.C.O|0-2-1.1-2-1"


def test_distinguishes_co_from_cc():
    d = Dims(2, 4, 3)
    assert canonical_key(encode_one_hot([0, 2], [(0, 1, 1)], d), QM9_VOCAB) != canonical_key(
        encode_one_hot([0, 0], [(0, 1, 1)], d), QM9_VOCAB
    )


def test_empty_graph():
    g = MolecularGraph.from_types(Dims(2, 4, 3), [4, 4], np.zeros((2, 2), int))
    with pytest.raises(EmptyGraph):
        canonical_key(g, QM9_VOCAB)


def test_padding_swap_keeps_key():
    g = encode_one_hot([0, 1], [(0, 1, 1)], Dims(5, 4, 3))
    assert canonical_key(permute(g, [0, 1, 4, 3, 2]), QM9_VOCAB) == canonical_key(g, QM9_VOCAB)


def test_hundred_permutations():
    rng = np.random.default_rng(5)
    g = random_graph(rng, Dims(9, 4, 3), n_atoms=8)
    key = canonical_key(g, QM9_VOCAB)
    for _ in range(100):
        assert canonical_key(permute(g, rng.permutation(9)), QM9_VOCAB) == key


@given(graphs(), st.data())
def test_permutation_invariance(g, data):
    perm = data.draw(st.permutations(list(range(g.dims.n))))
    assert canonical_key(permute(g, perm), QM9_VOCAB) == canonical_key(g, QM9_VOCAB)


@given(graphs(Dims(5, 3, 3)))
def test_order_relabels_to_form(g):
    form, order = canonical_form(g)
    types = g.atom_types()
    assert tuple(int(types[v]) for v in order) == form[0]
    pos = {v: k for k, v in enumerate(order)}
    relabeled = sorted((min(pos[i], pos[j]), max(pos[i], pos[j]), o) for i, j, o in g.bonds())
    assert tuple(relabeled) == form[1]
    assert sorted(canonical_order(g)) == g.real_atoms().tolist()


def test_regular_graphs_separated():
    # two triangles vs a hexagon: identical degree sequences, refinement alone cannot split them
    d = Dims(6, 4, 3)
    hexagon = encode_one_hot([0] * 6, [(i, (i + 1) % 6, 1) if i < 5 else (0, 5, 1) for i in range(6)], d)
    triangles = encode_one_hot([0] * 6, [(0, 1, 1), (1, 2, 1), (0, 2, 1), (3, 4, 1), (4, 5, 1), (3, 5, 1)], d)
    assert canonical_key(hexagon, QM9_VOCAB) != canonical_key(triangles, QM9_VOCAB)


def test_agrees_with_brute_force_three_atoms():
    mols = small_molecules(CNO, 3)
    keys = [canonical_key(g, CNO) for g in mols]
    forms = [brute_force_form(g) for g in mols]
    key_classes = {}
    for k, f in zip(keys, forms):
        key_classes.setdefault(k, set()).add(f)
    assert all(len(v) == 1 for v in key_classes.values())
    assert len(set(keys)) == len(set(forms))
