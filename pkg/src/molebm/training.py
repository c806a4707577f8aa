"""Contrastive training of an energy model.

Real molecules (positives) are dequantized and degree-normalized; fresh
hallucinated samples are drawn by Langevin dynamics under the current
parameters. The loss pushes positive energies down and hallucinated energies
up, with a squared-magnitude penalty:

    loss = f(y) * E_pos - E_neg + alpha * (E_pos**2 + E_neg**2)

where ``f(y) = 1 + exp(y)`` for goal-directed training and 1 otherwise.
Hallucinated tensors are constants of the loss; no gradient flows through
the sampling chain.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .checkpoint import save_checkpoint
from .energy import EnergyModel
from .errors import (
    DataError,
    DegenerateStats,
    DimsMismatch,
    EmptySet,
    LengthMismatch,
    MissingProperty,
    NonFiniteLoss,
    ShapeMismatch,
)
from .graph import DenseGraphTensor, MolecularGraph
from .langevin import LangevinConfig, run_chains, upper_bounds

log = logging.getLogger(__name__)

DEGREE_FLOOR = 1e-8
EPOCH_CSV_FIELDS = ["epoch", "mean_E_pos", "mean_E_neg", "L_energy", "L_reg", "total", "wall_seconds"]


@dataclass(frozen=True)
class TrainConfig:
    t: float = 0.1
    alpha: float = 1.0
    lr: float = 1e-4
    batch: int = 128
    epochs: int = 20
    langevin: LangevinConfig = field(default_factory=LangevinConfig)
    goal_directed: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.t < 1:
            raise DataError(f"t must lie in [0, 1), got {self.t}")
        if self.alpha < 0 or not self.lr > 0 or self.batch < 1 or self.epochs < 1:
            raise DataError(f"invalid training hyperparameters: {self}")


@dataclass(frozen=True)
class PropertyStats:
    min: float
    max: float

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "PropertyStats":
        values = list(values)
        if not values:
            raise EmptySet("no property values")
        return cls(float(min(values)), float(max(values)))


@dataclass(frozen=True)
class BatchReport:
    mean_e_pos: float
    mean_e_neg: float
    loss_energy: float
    loss_reg: float
    total: float


@dataclass(frozen=True)
class EpochReport:
    epoch: int
    mean_e_pos: float
    mean_e_neg: float
    loss_energy: float
    loss_reg: float
    total: float
    wall_seconds: float

    @property
    def energy_gap(self) -> float:
        return self.mean_e_pos - self.mean_e_neg

    def row(self):
        return [self.epoch, self.mean_e_pos, self.mean_e_neg, self.loss_energy,
                self.loss_reg, self.total, round(self.wall_seconds, 3)]


def degree_normalize(A: np.ndarray) -> np.ndarray:
    """Divide each node's fibers by its total incident mass over all channels.

    Works on a single ``(n, n, c + 1)`` tensor or a batch of them.
    """
    D = A.sum(axis=(-2, -1), keepdims=True)
    return A / np.maximum(D, DEGREE_FLOOR)


def _dequantize_arrays(X, A, t, rng):
    Xq = X + t * rng.random(X.shape)
    Aq = degree_normalize(A + t * rng.random(A.shape))
    if t == 0:
        # no noise: the one-hot matrix is returned as is
        return Xq, Aq
    x_hi, _ = upper_bounds(t)
    # X + t*u can round up to exactly 1 + t
    return np.minimum(Xq, x_hi), Aq


def dequantize(g: MolecularGraph, t: float, rng: np.random.Generator) -> DenseGraphTensor:
    """Uniform dequantization followed by degree normalization of ``A``."""
    if not 0 <= t < 1:
        raise DataError(f"t must lie in [0, 1), got {t}")
    X, A = _dequantize_arrays(g.X.astype(np.float64), g.A.astype(np.float64), t, rng)
    return DenseGraphTensor(X, A, g.dims)


def normalize_property(raw: float, stats: PropertyStats) -> float:
    if not stats.max > stats.min:
        raise DegenerateStats(f"property range [{stats.min}, {stats.max}] is empty")
    return float(np.clip((raw - stats.min) / (stats.max - stats.min), 0.0, 1.0))


def goal_weight(y):
    return 1.0 + np.exp(y)


def _loss_terms(model, Xp, Ap, Xn, An, f, alpha):
    B = Xp.shape[0]
    E, cache = model.forward(np.concatenate([Xp, Xn]), np.concatenate([Ap, An]))
    e_pos, e_neg = E[:B], E[B:]
    if not (np.all(np.isfinite(e_pos)) and np.all(np.isfinite(e_neg))):
        raise NonFiniteLoss("non-finite energies in batch")
    loss_energy = float(np.mean(f * e_pos - e_neg))
    loss_reg = float(np.mean(e_pos ** 2 + e_neg ** 2))
    report = BatchReport(
        float(e_pos.mean()), float(e_neg.mean()),
        loss_energy, loss_reg, loss_energy + alpha * loss_reg,
    )
    weights = np.concatenate([f + 2 * alpha * e_pos, -1.0 + 2 * alpha * e_neg]) / B
    _, _, dparams = model.backward(cache, inputs=False, param_weights=weights)
    return report, dparams


def batch_loss(
    model: EnergyModel,
    positives: Sequence[tuple[DenseGraphTensor, float | None]],
    hallucinated: Sequence[DenseGraphTensor],
    cfg: TrainConfig,
):
    """Mean per-pair loss and its parameter gradient.

    ``positives`` pairs each tensor with its normalized property (ignored
    unless ``cfg.goal_directed``).
    """
    if len(positives) != len(hallucinated):
        raise LengthMismatch(f"{len(positives)} positives vs {len(hallucinated)} hallucinated samples")
    if not positives:
        raise EmptySet("empty batch")
    if cfg.goal_directed:
        if any(y is None for _, y in positives):
            raise MissingProperty("goal-directed training needs a property for every positive")
        f = goal_weight(np.array([y for _, y in positives], dtype=np.float64))
    else:
        f = np.ones(len(positives))
    Xp = np.stack([s.X for s, _ in positives])
    Ap = np.stack([s.A for s, _ in positives])
    Xn = np.stack([s.X for s in hallucinated])
    An = np.stack([s.A for s in hallucinated])
    return _loss_terms(model, Xp, Ap, Xn, An, f, cfg.alpha)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, lr: float):
    """Bias-corrected Adam update; returns ``(new_params, new_state)``."""
    if len(params) != len(grads) or any(p.shape != g.shape for p, g in zip(params, grads)):
        raise ShapeMismatch("parameter and gradient shapes differ")
    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    m = [b1 * mi + (1 - b1) * g for mi, g in zip(state.m, grads)]
    v = [b2 * vi + (1 - b2) * g * g for vi, g in zip(state.v, grads)]
    c1, c2 = 1 - b1 ** step, 1 - b2 ** step
    new = [p - lr * (mi / c1) / (np.sqrt(vi / c2) + state.eps) for p, mi, vi in zip(params, m, v)]
    return new, dataclasses.replace(state, m=m, v=v, step=step)


def _set_params(model: EnergyModel, params):
    for l in range(model.num_layers):
        model.layers[l] = params[l]
    model.out = params[-1]


def fit(
    graphs: Sequence[MolecularGraph],
    cfg: TrainConfig,
    model: EnergyModel,
    properties: Sequence[float] | None = None,
    checkpoint_dir=None,
    csv_path=None,
    on_batch=None,
):
    """Train ``model`` in place; returns ``(model, [EpochReport, ...])``.

    ``properties`` are normalized values in [0, 1], required when
    ``cfg.goal_directed``. When given, ``csv_path`` receives one row per epoch
    and ``checkpoint_dir`` one checkpoint per epoch.
    """
    if not graphs:
        raise EmptySet("training set is empty")
    for g in graphs:
        if g.dims != model.dims:
            raise DimsMismatch(f"graph dims {g.dims} differ from model dims {model.dims}")
    if cfg.goal_directed:
        if properties is None or len(properties) != len(graphs):
            raise MissingProperty("goal-directed training needs one property per molecule")
        f_all = goal_weight(np.asarray(properties, dtype=np.float64))
    else:
        f_all = np.ones(len(graphs))

    rng = np.random.default_rng(cfg.seed)
    lcfg = dataclasses.replace(cfg.langevin, t=cfg.t)
    X_all = np.stack([g.X for g in graphs]).astype(np.float64)
    A_all = np.stack([g.A for g in graphs]).astype(np.float64)
    state = AdamState.zeros_like(model.params())
    x_hi = 1.0 + cfg.t
    reports = []

    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            csv.writer(fh).writerow(EPOCH_CSV_FIELDS)
    if checkpoint_dir is not None:
        Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)

    for epoch in range(1, cfg.epochs + 1):
        start = time.perf_counter()
        order = rng.permutation(len(graphs))
        batch_reports = []
        for lo in range(0, len(order), cfg.batch):
            idx = order[lo:lo + cfg.batch]
            B = len(idx)
            model.update_spectral()
            Xp, Ap = _dequantize_arrays(X_all[idx], A_all[idx], cfg.t, rng)
            Xn = np.minimum(rng.uniform(0.0, x_hi, size=Xp.shape), upper_bounds(cfg.t)[0])
            An = np.minimum(rng.uniform(0.0, 1.0, size=Ap.shape), upper_bounds(cfg.t)[1])
            chain = run_chains(model, Xn, An, lcfg, rng)
            report, grads = _loss_terms(model, Xp, Ap, chain.X, chain.A, f_all[idx], cfg.alpha)
            if not (np.isfinite(report.total) and all(np.all(np.isfinite(g)) for g in grads)):
                raise NonFiniteLoss(f"epoch {epoch}: loss or gradient became non-finite ({report})")
            params, state = adam_step(model.params(), grads, state, cfg.lr)
            _set_params(model, params)
            batch_reports.append((B, report))
            if on_batch is not None:
                on_batch(epoch, report)

        sizes = np.array([b for b, _ in batch_reports], dtype=np.float64)

        def avg(name):
            return float(np.average([getattr(r, name) for _, r in batch_reports], weights=sizes))

        rep = EpochReport(
            epoch, avg("mean_e_pos"), avg("mean_e_neg"), avg("loss_energy"),
            avg("loss_reg"), avg("total"), time.perf_counter() - start,
        )
        reports.append(rep)
        log.info("epoch %d: E+ %.4f  E- %.4f  total %.4f (%.1fs)",
                 epoch, rep.mean_e_pos, rep.mean_e_neg, rep.total, rep.wall_seconds)
        model.metadata["epochs_trained"] = str(epoch)
        if csv_path is not None:
            with open(csv_path, "a", newline="") as fh:
                csv.writer(fh).writerow(rep.row())
        if checkpoint_dir is not None:
            save_checkpoint(model, Path(checkpoint_dir) / f"epoch_{epoch:03d}.gebm")
    return model, reports
