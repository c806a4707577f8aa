"""Property scorers used by goal-directed reporting and optimization.

Two kinds are supported:

``atom_fraction:SYM``
    fraction of real atoms with symbol ``SYM``.
``cmd:<shell command>``
    an external program that reads one SMILES-lite string per line on stdin
    and prints one float per line on stdout.
"""

from __future__ import annotations

import math
import shlex
import subprocess
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .graph import AtomVocab, MolecularGraph
from .smiles import write_smiles_lite

Scorer = Callable[[Sequence[MolecularGraph | None]], list[float]]


def atom_fraction(g: MolecularGraph, type_index: int) -> float:
    types = g.atom_types()[g.real_atoms()]
    return float(np.mean(types == type_index)) if types.size else 0.0


def _external(command: str, vocab: AtomVocab) -> Scorer:
    argv = shlex.split(command)
    if not argv:
        raise ConfigError("empty scorer command")

    def score(graphs):
        live = [i for i, g in enumerate(graphs) if g is not None]
        out = [math.nan] * len(graphs)
        if not live:
            return out
        text = "".join(write_smiles_lite(graphs[i], vocab) + "\n" for i in live)
        proc = subprocess.run(argv, input=text, capture_output=True, text=True, check=False)
        if proc.returncode != 0:
            raise DataError(f"scorer exited with {proc.returncode}: {proc.stderr.strip()[:200]}")
        lines = proc.stdout.split()
        if len(lines) != len(live):
            raise DataError(f"scorer returned {len(lines)} values for {len(live)} molecules")
        try:
            for i, v in zip(live, lines):
                out[i] = float(v)
        except ValueError:
            raise DataError("scorer printed a non-numeric value") from None
        return out

    return score


def make_scorer(spec: str, vocab: AtomVocab) -> Scorer:
    """Build a batch scorer; invalid (None) molecules score NaN."""
    kind, _, arg = spec.partition(":")
    if kind == "atom_fraction":
        if arg not in vocab.symbols:
            raise ConfigError(f"atom_fraction symbol {arg!r} not in vocabulary {vocab.symbols}")
        idx = vocab.index(arg)
        return lambda graphs: [math.nan if g is None else atom_fraction(g, idx) for g in graphs]
    if kind == "cmd":
        return _external(arg, vocab)
    raise ConfigError(f"unknown property scorer {spec!r}; use atom_fraction:SYM or cmd:COMMAND")
