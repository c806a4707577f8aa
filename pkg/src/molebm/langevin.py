"""Langevin-dynamics sampling over relaxed graph tensors.

An *energy* here is anything with a ``dims`` attribute and a batched
``energy_and_grad(X, A) -> (E, dX, dA)`` method: an
:class:`~molebm.energy.EnergyModel`, a :class:`CompositeEnergy`, or a test
double.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .energy import EnergyModel
from .errors import DataError, DimsMismatch, EmptyComposite, NonFiniteEnergy, ShapeMismatch
from .graph import DenseGraphTensor, Dims


@dataclass(frozen=True)
class LangevinConfig:
    K: int = 30
    step_size: float = 10.0  # multiplies the clipped gradient
    noise_std: float = 0.005
    clip: float = 0.01
    t: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise DataError(f"K must be >= 1, got {self.K}")
        if not self.step_size > 0:
            raise DataError(f"step_size must be positive, got {self.step_size}")
        if not self.noise_std >= 0:
            raise DataError(f"noise_std must be >= 0, got {self.noise_std}")
        if not self.clip > 0:
            raise DataError(f"clip must be positive, got {self.clip}")
        if not 0 <= self.t < 1:
            raise DataError(f"t must lie in [0, 1), got {self.t}")


class CompositeEnergy:
    """Sum of several energies over the same tensor shapes.

    Members are summed in order of their parameter digest, so the result does
    not depend on the order they were passed in.
    """

    def __init__(self, members: Sequence[EnergyModel]):
        members = list(members)
        if not members:
            raise EmptyComposite("a composite energy needs at least one member")
        dims = members[0].dims
        for m in members[1:]:
            if m.dims != dims:
                raise DimsMismatch(f"member dims {m.dims} differ from {dims}")
        self.members = sorted(members, key=lambda m: m.digest())
        self.dims = dims
        self.vocab = members[0].vocab

    def energy_and_grad(self, X, A):
        E = dX = dA = None
        for m in self.members:
            e, gx, ga = m.energy_and_grad(X, A)
            if E is None:
                E, dX, dA = e, gx, ga
            else:
                E, dX, dA = E + e, dX + gx, dA + ga
        return E, dX, dA

    def energies(self, X, A):
        total = None
        for m in self.members:
            e = m.energies(X, A)
            total = e if total is None else total + e
        return total


def composite_eval(ce: CompositeEnergy, s: DenseGraphTensor):
    E, dX, dA = ce.energy_and_grad(s.X[None], s.A[None])
    return float(E[0]), dX[0], dA[0]


def upper_bounds(t: float):
    """Largest floats strictly below ``1 + t`` and ``1``."""
    return np.nextafter(1.0 + t, 0.0), np.nextafter(1.0, 0.0)


def init_sample(dims: Dims, t: float, rng: np.random.Generator) -> DenseGraphTensor:
    X = rng.uniform(0.0, 1.0 + t, size=dims.x_shape)
    A = rng.uniform(0.0, 1.0, size=dims.a_shape)
    x_hi, a_hi = upper_bounds(t)
    # uniform() may round up to the open upper bound
    return DenseGraphTensor(np.minimum(X, x_hi), np.minimum(A, a_hi), dims)


def init_batch(dims: Dims, t: float, rngs: Sequence[np.random.Generator]):
    samples = [init_sample(dims, t, r) for r in rngs]
    return np.stack([s.X for s in samples]), np.stack([s.A for s in samples])


def chain_rngs(seed: int, count: int, start: int = 0) -> list[np.random.Generator]:
    """Independent streams keyed by ``(seed, chain index)``."""
    return [np.random.default_rng([seed, i]) for i in range(start, start + count)]


def _noise(rng, shape, std):
    if isinstance(rng, np.random.Generator):
        return rng.normal(0.0, std, size=shape)
    return np.stack([r.normal(0.0, std, size=shape[1:]) for r in rng])


def _step(energy, X, A, cfg: LangevinConfig, rng, failed=None):
    E, dX, dA = energy.energy_and_grad(X, A)
    bad = ~np.isfinite(E)
    if bad.any():
        if failed is None:
            raise NonFiniteEnergy(f"energy became non-finite for chains {np.flatnonzero(bad)[:8].tolist()}")
        failed |= bad
    dX = np.clip(dX, -cfg.clip, cfg.clip)
    dA = np.clip(dA, -cfg.clip, cfg.clip)
    X = X - cfg.step_size * dX + _noise(rng, X.shape, cfg.noise_std)
    A = A - cfg.step_size * dA + _noise(rng, A.shape, cfg.noise_std)
    x_hi, a_hi = upper_bounds(cfg.t)
    X, A = np.clip(X, 0.0, x_hi), np.clip(A, 0.0, a_hi)
    if failed is not None and failed.any():
        # park dead chains at zero so NaNs cannot leak into shared reductions
        X[failed] = 0.0
        A[failed] = 0.0
    return X, A, E


def langevin_step(energy, s: DenseGraphTensor, cfg: LangevinConfig, rng: np.random.Generator) -> DenseGraphTensor:
    X, A, _ = _step(energy, s.X[None], s.A[None], cfg, [rng])
    return DenseGraphTensor(X[0], A[0], s.dims)


@dataclass
class ChainResult:
    X: np.ndarray
    A: np.ndarray
    trace: np.ndarray  # (K, B): energy at the state each step started from
    final_energy: np.ndarray  # (B,)
    failed: np.ndarray  # (B,) bool, chains aborted on non-finite energy


def run_chains(energy, X0, A0, cfg: LangevinConfig, rng, strict: bool = True) -> ChainResult:
    """Run ``cfg.K`` steps on a batch of chains.

    ``rng`` is either one generator shared by the batch or a sequence with one
    generator per chain. With ``strict=False`` a chain whose energy turns
    non-finite is flagged in ``ChainResult.failed`` instead of aborting the
    whole batch.
    """
    X, A = np.array(X0, dtype=np.float64), np.array(A0, dtype=np.float64)
    if X.shape[0] != A.shape[0]:
        raise ShapeMismatch("X and A batch sizes differ")
    if not isinstance(rng, np.random.Generator) and len(rng) != X.shape[0]:
        raise ShapeMismatch(f"{len(rng)} generators for {X.shape[0]} chains")
    failed = None if strict else np.zeros(X.shape[0], dtype=bool)
    trace = np.empty((cfg.K, X.shape[0]))
    for k in range(cfg.K):
        X, A, trace[k] = _step(energy, X, A, cfg, rng, failed)
    final = energy.energy_and_grad(X, A)[0] if not hasattr(energy, "energies") else energy.energies(X, A)
    bad = ~np.isfinite(final)
    if bad.any():
        if strict:
            raise NonFiniteEnergy("final chain energy is non-finite")
        failed |= bad
    if failed is None:
        failed = np.zeros(X.shape[0], dtype=bool)
    return ChainResult(X, A, trace, final, failed)


def run_chain(energy, s0: DenseGraphTensor, cfg: LangevinConfig, rng: np.random.Generator | None = None):
    """Single chain; returns ``(final state, ChainResult)``."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    res = run_chains(energy, s0.X[None], s0.A[None], cfg, [rng])
    return DenseGraphTensor(res.X[0], res.A[0], s0.dims), res
