"""Metrics for generated sets and constrained optimization runs.

JSON summary schema written by the CLI (``metrics.json``)::

    {"sample_count": int, "valid_count": int, "validity": float,
     "uniqueness": float, "novelty": float, "degenerate": bool}

Uniqueness and novelty are fractions of the *valid* molecules. Constrained
optimization rows carry ``delta, pairs, successes, improvement,
similarity, success_rate``; improvement and similarity are averaged over
successes only, and a success needs ``similarity >= delta`` together with a
strictly positive property gain.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptySet
from .fingerprint import DEFAULT_NBITS, DEFAULT_RADIUS, morgan_fingerprint, tanimoto
from .graph import MolecularGraph


@dataclass(frozen=True)
class GenerationMetrics:
    validity: float
    uniqueness: float
    novelty: float
    sample_count: int
    valid_count: int
    degenerate: bool = False

    def to_dict(self):
        return asdict(self)


def evaluate_set(generated: Sequence, training_keys: Iterable[bytes] = ()) -> GenerationMetrics:
    """``generated`` items expose ``key`` (None for an invalid sample)."""
    if not generated:
        raise EmptySet("no generated molecules to evaluate")
    train = set(training_keys)
    keys = [m.key for m in generated if m.key is not None]
    total = len(generated)
    if not keys:
        return GenerationMetrics(0.0, 0.0, 0.0, total, 0, degenerate=True)
    return GenerationMetrics(
        validity=len(keys) / total,
        uniqueness=len(set(keys)) / len(keys),
        novelty=sum(k not in train for k in keys) / len(keys),
        sample_count=total,
        valid_count=len(keys),
    )


def property_histogram(values: Sequence[float], bins: int = 20, value_range=None):
    """Equal-width ``(low, high, count)`` rows; the last bin includes its top edge."""
    values = np.asarray([v for v in values if v is not None and math.isfinite(v)], dtype=np.float64)
    if values.size == 0:
        raise EmptySet("no property values to bin")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    lo, hi = value_range if value_range is not None else (values.min(), values.max())
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)]


@dataclass(frozen=True)
class ConstrainedReport:
    delta: float
    improvement: float
    similarity: float
    success_rate: float
    pairs: int
    successes: int

    def row(self):
        return [self.delta, self.pairs, self.successes, self.improvement, self.similarity, self.success_rate]


CONSTRAINED_FIELDS = ["delta", "pairs", "successes", "improvement", "similarity", "success_rate"]


def constrained_eval(
    pairs: Sequence[tuple[MolecularGraph, MolecularGraph | None, float, float]],
    delta: float,
    radius: int = DEFAULT_RADIUS,
    nbits: int = DEFAULT_NBITS,
) -> ConstrainedReport:
    """Score ``(seed, candidate, property_seed, property_candidate)`` tuples.

    A missing candidate (failed decode) counts as a failure. With no
    successes, improvement and similarity are NaN.
    """
    if not pairs:
        raise EmptySet("no optimization pairs")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    gains, sims = [], []
    for seed, cand, p_seed, p_cand in pairs:
        if cand is None:
            continue
        sim = tanimoto(morgan_fingerprint(seed, radius, nbits), morgan_fingerprint(cand, radius, nbits))
        gain = p_cand - p_seed
        if sim >= delta and gain > 0:
            gains.append(gain)
            sims.append(sim)
    n = len(gains)
    return ConstrainedReport(
        delta=float(delta),
        improvement=float(np.mean(gains)) if n else math.nan,
        similarity=float(np.mean(sims)) if n else math.nan,
        success_rate=n / len(pairs),
        pairs=len(pairs),
        successes=n,
    )


def write_metrics(metrics: GenerationMetrics, json_path=None, csv_path=None):
    if json_path is not None:
        with open(json_path, "w") as fh:
            json.dump(metrics.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
    if csv_path is not None:
        d = metrics.to_dict()
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(d))
            w.writerow(list(d.values()))


def write_histogram_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_low", "bin_high", "count"])
        w.writerows(rows)
