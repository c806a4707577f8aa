"""Random valence-respecting molecules for smoke tests and demos."""

from __future__ import annotations

import numpy as np

from .graph import AtomVocab, Dims, MolecularGraph, encode_one_hot

# rough heavy-atom frequencies of small organic molecules
QM9_LIKE_WEIGHTS = {"C": 0.70, "N": 0.11, "O": 0.16, "F": 0.03}


def random_molecule(
    vocab: AtomVocab,
    dims: Dims,
    rng: np.random.Generator,
    weights=None,
    min_atoms: int = 1,
    ring_prob: float = 0.3,
    multi_prob: float = 0.2,
) -> MolecularGraph:
    """A connected molecule with between ``min_atoms`` and ``dims.n`` atoms."""
    if weights is None:
        weights = [QM9_LIKE_WEIGHTS.get(s, 0.05) for s in vocab.symbols]
    p = np.asarray(weights, dtype=np.float64)
    p = p / p.sum()
    k = int(rng.integers(min_atoms, dims.n + 1))
    atoms = [int(rng.choice(vocab.b, p=p))]
    cap = [vocab.valence[atoms[0]]]
    bonds = {}
    for _ in range(1, k):
        parents = [i for i, c in enumerate(cap) if c >= 1]
        if not parents:
            break
        t = int(rng.choice(vocab.b, p=p))
        parent = int(rng.choice(parents))
        i = len(atoms)
        atoms.append(t)
        cap.append(vocab.valence[t] - 1)
        cap[parent] -= 1
        bonds[(parent, i)] = 1
    n_real = len(atoms)
    if n_real >= 3 and rng.random() < ring_prob:
        free = [i for i in range(n_real) if cap[i] >= 1]
        pairs = [(i, j) for i in free for j in free if i < j and (i, j) not in bonds]
        if pairs:
            i, j = pairs[int(rng.integers(len(pairs)))]
            bonds[(i, j)] = 1
            cap[i] -= 1
            cap[j] -= 1
    for (i, j) in sorted(bonds):
        while bonds[(i, j)] < dims.c and cap[i] >= 1 and cap[j] >= 1 and rng.random() < multi_prob:
            bonds[(i, j)] += 1
            cap[i] -= 1
            cap[j] -= 1
    return encode_one_hot(atoms, [(i, j, o) for (i, j), o in sorted(bonds.items())], dims)


def random_corpus(count: int, vocab: AtomVocab, dims: Dims, seed: int = 0, **kwargs) -> list[MolecularGraph]:
    rng = np.random.default_rng(seed)
    return [random_molecule(vocab, dims, rng, **kwargs) for _ in range(count)]
