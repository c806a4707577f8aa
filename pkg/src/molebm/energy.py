"""Relational graph-convolution energy function with analytic gradients.

Each layer computes ``H' = swish(sum_k A[:, :, k] @ H @ W_k)``; node states
are summed into a graph vector and projected onto an output vector to give a
scalar energy. By default ``A`` is first degree-normalized (each node's
fibers divided by their total mass), which leaves already-normalized inputs
unchanged and makes the energy blind to the overall adjacency scale.

Every weight matrix is divided by a cached spectral-norm estimate that is held constant during differentiation and only refreshed by
:meth:`EnergyModel.update_spectral`.

All batched routines take ``X`` of shape ``(B, n, b + 1)`` and ``A`` of shape
``(B, n, n, c + 1)`` in float64.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ShapeMismatch
from .graph import AtomVocab, DenseGraphTensor, Dims

SPECTRAL_EPS = 1e-12
DEGREE_FLOOR = 1e-8
INIT_POWER_ITERS = 5


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def swish(z):
    return z * sigmoid(z)


def swish_prime(z):
    s = sigmoid(z)
    return s + z * s * (1.0 - s)


class SpectralResult(NamedTuple):
    weight: np.ndarray
    u: np.ndarray
    sigma: float
    degenerate: bool


def _unit(x):
    norm = np.linalg.norm(x)
    return x / norm if norm > 0 else x


def spectral_normalize(Wm: np.ndarray, u: np.ndarray) -> SpectralResult:
    """One power-iteration step followed by division by the estimate.

    A 1-D ``Wm`` is treated as a column vector, so its estimate is its
    Euclidean norm. Degenerate (near-zero) matrices come back unchanged with
    ``sigma = 1`` and ``degenerate`` set.
    """
    W2 = Wm.reshape(Wm.shape[0], -1)
    if u.shape != (W2.shape[0],):
        raise ShapeMismatch(f"u has shape {u.shape}, expected ({W2.shape[0]},)")
    v = _unit(W2.T @ u)
    u_new = _unit(W2 @ v)
    sigma = float(u_new @ W2 @ v)
    if not sigma >= SPECTRAL_EPS:
        return SpectralResult(Wm, u, 1.0, True)
    return SpectralResult(Wm / sigma, u_new, sigma, False)


@dataclass(eq=False)
class EnergyModel:
    """Weights, spectral state and metadata of one energy function.

    ``layers[l]`` has shape ``(c + 1, d_l, d_{l+1})`` with ``d_0 = b + 1``;
    ``out`` has shape ``(d,)``. ``layer_u``/``layer_sigma`` and
    ``out_u``/``out_sigma`` hold the power-iteration vectors and the frozen
    spectral-norm estimates.
    """

    dims: Dims
    layers: list[np.ndarray]
    out: np.ndarray
    layer_u: list[np.ndarray]
    layer_sigma: list[np.ndarray]
    out_u: np.ndarray
    out_sigma: float
    vocab: AtomVocab | None = None
    metadata: dict[str, str] = field(default_factory=dict)
    normalize_adjacency: bool = True

    def __post_init__(self):
        C = self.dims.c + 1
        d_in = self.dims.b + 1
        for l, W in enumerate(self.layers):
            if W.ndim != 3 or W.shape[0] != C or W.shape[1] != d_in:
                raise ShapeMismatch(f"layer {l} weight has shape {W.shape}")
            if self.layer_u[l].shape != (C, d_in) or self.layer_sigma[l].shape != (C,):
                raise ShapeMismatch(f"layer {l} spectral state has wrong shape")
            d_in = W.shape[2]
        if self.out.shape != (d_in,) or self.out_u.shape != (d_in,):
            raise ShapeMismatch(f"output vector must have length {d_in}")
        if self.vocab is not None and self.vocab.b != self.dims.b:
            raise ShapeMismatch(f"vocabulary has {self.vocab.b} atom types, dims say {self.dims.b}")

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def hidden(self) -> int:
        return self.out.shape[0]

    def params(self) -> list[np.ndarray]:
        """Live parameter arrays: layers ascending, then the output vector."""
        return [*self.layers, self.out]

    def effective_weights(self):
        layers = [W / s[:, None, None] for W, s in zip(self.layers, self.layer_sigma)]
        return layers, self.out / self.out_sigma

    def update_spectral(self, iterations: int = 1) -> None:
        """Advance every power iteration and refresh the cached estimates."""
        for _ in range(iterations):
            for l, W in enumerate(self.layers):
                for k in range(W.shape[0]):
                    res = spectral_normalize(W[k], self.layer_u[l][k])
                    self.layer_u[l][k] = res.u
                    self.layer_sigma[l][k] = res.sigma
            res = spectral_normalize(self.out, self.out_u)
            self.out_u = res.u
            self.out_sigma = res.sigma

    def copy(self) -> "EnergyModel":
        return EnergyModel(
            self.dims,
            [W.copy() for W in self.layers],
            self.out.copy(),
            [u.copy() for u in self.layer_u],
            [s.copy() for s in self.layer_sigma],
            self.out_u.copy(),
            float(self.out_sigma),
            self.vocab,
            dict(self.metadata),
            self.normalize_adjacency,
        )

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(repr((self.dims.n, self.dims.b, self.dims.c, self.normalize_adjacency)).encode())
        for arr in (*self.layers, self.out, *self.layer_sigma):
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        h.update(np.float64(self.out_sigma).tobytes())
        return h.hexdigest()

    # batched evaluation ----------------------------------------------------

    def check_batch(self, X, A):
        n, b1, c1 = self.dims.n, self.dims.b + 1, self.dims.c + 1
        if X.ndim != 3 or X.shape[1:] != (n, b1) or A.shape != (X.shape[0], n, n, c1):
            raise ShapeMismatch(f"batch shapes X{X.shape}, A{A.shape} do not fit {self.dims}")

    def forward(self, X, A):
        """Energies ``(B,)`` plus the cache needed for :meth:`backward`."""
        X = np.asarray(X, dtype=np.float64)
        A = np.asarray(A, dtype=np.float64)
        self.check_batch(X, A)
        norm = None
        if self.normalize_adjacency:
            D = np.maximum(A.sum(axis=(2, 3), keepdims=True), DEGREE_FLOOR)
            A = A / D
            norm = (A, D)
        layers, w = self.effective_weights()
        At = A.transpose(0, 3, 1, 2)
        H = X
        cache = []
        for Wk in layers:
            P = H[:, None] @ Wk[None]
            Z = (At @ P).sum(axis=1)
            cache.append((H, P, Z))
            H = swish(Z)
        h = H.sum(axis=1)
        # row-wise reduction: a matrix-vector product would let BLAS pick
        # kernels by batch size and change low-order bits between batchings
        return (h * w).sum(axis=1), (At, layers, w, cache, h, norm)

    def backward(self, cache, inputs=True, param_weights=None):
        """Reverse pass with unit upstream gradient for every sample.

        Returns ``(dX, dA, dparams)``. Input gradients are per sample.
        Parameter gradients are ``sum_b param_weights[b] * dE_b/dtheta``,
        reduced in index order after the per-sample gradients are formed, so
        each sample's contribution scales exactly with its weight.
        """
        At, layers, w, per_layer, h, norm = cache
        B = h.shape[0]
        dparams = None
        if param_weights is not None:
            param_weights = np.asarray(param_weights, dtype=np.float64)
            if param_weights.shape != (B,):
                raise ShapeMismatch(f"need {B} weights, got {param_weights.shape}")
            dparams = [None] * (len(layers) + 1)
            dparams[-1] = (param_weights @ h) / self.out_sigma
        dH = np.broadcast_to(w, (B, per_layer[-1][0].shape[1], w.shape[0]))
        dA = np.zeros(At.shape, dtype=np.float64) if inputs else None
        for l in range(len(layers) - 1, -1, -1):
            H, P, Z = per_layer[l]
            G = dH * swish_prime(Z)
            dP = At.swapaxes(-1, -2) @ G[:, None]
            if inputs:
                dA += G[:, None] @ P.swapaxes(-1, -2)
            if dparams is not None:
                per_sample = H.swapaxes(-1, -2)[:, None] @ dP
                dW = np.tensordot(param_weights, per_sample, axes=1)
                dparams[l] = dW / self.layer_sigma[l][:, None, None]
            if l or inputs:
                dH = (dP @ layers[l].swapaxes(-1, -2)[None]).sum(axis=1)
        if not inputs:
            return None, None, dparams
        dA = dA.transpose(0, 2, 3, 1)
        if norm is not None:
            An, D = norm
            # d(A/D)/dA with D the row mass; floored rows see a constant divisor
            row = (dA * An).sum(axis=(2, 3), keepdims=True)
            dA = (dA - np.where(D > DEGREE_FLOOR, row, 0.0)) / D
        return dH, dA, dparams

    def energy_and_grad(self, X, A):
        """Batched ``(E, dE/dX, dE/dA)``; the sampler's energy protocol."""
        E, cache = self.forward(X, A)
        dX, dA, _ = self.backward(cache, inputs=True)
        return E, dX, dA

    def energies(self, X, A):
        return self.forward(X, A)[0]


def _single(s: DenseGraphTensor):
    return s.X[None], s.A[None]


def energy_forward(model: EnergyModel, s: DenseGraphTensor) -> float:
    return float(model.energies(*_single(s))[0])


@dataclass
class EnergyGradients:
    dX: np.ndarray | None = None
    dA: np.ndarray | None = None
    dparams: list[np.ndarray] | None = None


def energy_grad_inputs(model: EnergyModel, s: DenseGraphTensor) -> EnergyGradients:
    _, dX, dA = model.energy_and_grad(*_single(s))
    return EnergyGradients(dX=dX[0], dA=dA[0])


def energy_grad_params(model: EnergyModel, s: DenseGraphTensor) -> EnergyGradients:
    _, cache = model.forward(*_single(s))
    _, _, dparams = model.backward(cache, inputs=False, param_weights=np.ones(1))
    return EnergyGradients(dparams=dparams)


def init_params(
    dims: Dims,
    num_layers: int = 3,
    hidden: int = 64,
    seed: int = 0,
    vocab: AtomVocab | None = None,
    normalize_adjacency: bool = True,
) -> EnergyModel:
    """Glorot-uniform weights and random unit power-iteration vectors."""
    rng = np.random.default_rng(seed)
    C = dims.c + 1
    widths = [dims.b + 1] + [hidden] * num_layers
    layers, us = [], []
    for d_in, d_out in zip(widths[:-1], widths[1:]):
        bound = np.sqrt(6.0 / (d_in + d_out))
        layers.append(rng.uniform(-bound, bound, size=(C, d_in, d_out)))
        u = rng.standard_normal((C, d_in))
        us.append(u / np.linalg.norm(u, axis=1, keepdims=True))
    bound = np.sqrt(6.0 / (hidden + 1))
    out = rng.uniform(-bound, bound, size=hidden)
    out_u = rng.standard_normal(hidden)
    out_u /= np.linalg.norm(out_u)
    model = EnergyModel(
        dims, layers, out, us, [np.ones(C) for _ in layers], out_u, 1.0, vocab,
        normalize_adjacency=normalize_adjacency,
    )
    model.update_spectral(INIT_POWER_ITERS)
    return model
