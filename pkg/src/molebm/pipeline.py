"""Generation flows: random, compositional, and seeded optimization."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .canon import canonical_key
from .energy import EnergyModel
from .errors import DataError, DimsMismatch, EmptyGraph, VocabMismatch
from .fingerprint import morgan_fingerprint, tanimoto
from .graph import (
    AtomVocab,
    DenseGraphTensor,
    MolecularGraph,
    check_valency,
    correct_validity,
    discretize,
    largest_component,
)
from .langevin import CompositeEnergy, LangevinConfig, chain_rngs, init_batch, run_chains
from .training import dequantize

# chains are evaluated in fixed-size chunks so results never depend on count
CHUNK = 256


@dataclass
class GeneratedMolecule:
    graph: MolecularGraph | None
    key: bytes | None
    energy: float
    provenance: dict
    trace: list[float] | None = field(default=None, repr=False)
    similarity: float | None = None

    @property
    def valid(self) -> bool:
        return self.key is not None


def config_digest(cfg: LangevinConfig) -> str:
    text = json.dumps(dataclasses.asdict(cfg), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def decode(s: DenseGraphTensor, vocab: AtomVocab, dims=None) -> MolecularGraph | None:
    """Discretize, repair valences, and keep the largest fragment.

    Returns None when nothing real survives.
    """
    g = correct_validity(discretize(s, dims), vocab)
    try:
        g = largest_component(g)
    except EmptyGraph:
        return None
    return g if check_valency(g, vocab).valid else None


def _vocab_of(energy, vocab):
    vocab = vocab or getattr(energy, "vocab", None)
    if vocab is None:
        raise DataError("no atom vocabulary supplied and the model carries none")
    if vocab.b != energy.dims.b:
        raise VocabMismatch(f"vocabulary has {vocab.b} atom types, model expects {energy.dims.b}")
    return vocab


def _molecules(res, vocab, dims, seed, start, digest, keep_traces):
    out = []
    for i in range(res.X.shape[0]):
        prov = {"seed": seed, "chain": start + i, "config": digest}
        trace = res.trace[:, i].tolist() if keep_traces else None
        g = None if res.failed[i] else decode(DenseGraphTensor(res.X[i], res.A[i], dims), vocab, dims)
        key = canonical_key(g, vocab) if g is not None else None
        out.append(GeneratedMolecule(g, key, float(res.final_energy[i]), prov, trace))
    return out


def generate(
    energy,
    count: int,
    cfg: LangevinConfig,
    vocab: AtomVocab | None = None,
    keep_traces: bool = False,
) -> list[GeneratedMolecule]:
    """Sample ``count`` molecules; invalid decodes stay in the list as invalid."""
    if count < 1:
        raise DataError(f"count must be >= 1, got {count}")
    vocab = _vocab_of(energy, vocab)
    dims = energy.dims
    digest = config_digest(cfg)
    out = []
    for start in range(0, count, CHUNK):
        rngs = chain_rngs(cfg.seed, min(CHUNK, count - start), start)
        X0, A0 = init_batch(dims, cfg.t, rngs)
        res = run_chains(energy, X0, A0, cfg, rngs, strict=False)
        out.extend(_molecules(res, vocab, dims, cfg.seed, start, digest, keep_traces))
    return out


def compose(models: Sequence[EnergyModel]) -> CompositeEnergy:
    models = list(models)
    if len(models) < 2:
        raise DataError("composition needs at least two models")
    for m in models[1:]:
        if m.dims != models[0].dims:
            raise DimsMismatch(f"model dims {m.dims} differ from {models[0].dims}")
        if m.vocab != models[0].vocab:
            raise VocabMismatch("models were trained on different atom vocabularies")
    return CompositeEnergy(models)


def optimize_from(
    energy,
    seed_mol: MolecularGraph,
    cfg: LangevinConfig,
    vocab: AtomVocab | None = None,
    chains: int = 1,
    seed_index: int = 0,
) -> list[GeneratedMolecule]:
    """Run chains started from a dequantized real molecule.

    Each candidate carries its Tanimoto similarity to ``seed_mol``. Chain
    ``j`` of seed molecule ``seed_index`` uses the stream
    ``(cfg.seed, seed_index * chains + j)``.
    """
    vocab = _vocab_of(energy, vocab)
    if seed_mol.dims != energy.dims:
        raise DimsMismatch(f"seed molecule dims {seed_mol.dims} differ from {energy.dims}")
    seed_fp = morgan_fingerprint(seed_mol)
    start = seed_index * chains
    rngs = chain_rngs(cfg.seed, chains, start)
    starts = [dequantize(seed_mol, cfg.t, r) for r in rngs]
    X0 = np.stack([s.X for s in starts])
    A0 = np.stack([s.A for s in starts])
    res = run_chains(energy, X0, A0, cfg, rngs, strict=False)
    mols = _molecules(res, vocab, energy.dims, cfg.seed, start, config_digest(cfg), False)
    for m in mols:
        m.similarity = tanimoto(seed_fp, morgan_fingerprint(m.graph)) if m.valid else 0.0
    return mols
