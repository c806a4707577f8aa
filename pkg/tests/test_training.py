import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from molebm.checkpoint import load_checkpoint
from molebm.energy import init_params
from molebm.errors import (
    DataError,
    DegenerateStats,
    DimsMismatch,
    EmptySet,
    LengthMismatch,
    MissingProperty,
    ShapeMismatch,
)
from molebm.graph import QM9_VOCAB, DenseGraphTensor, Dims, encode_one_hot
from molebm.langevin import LangevinConfig
from molebm.synth import random_corpus
from molebm.training import (
    EPOCH_CSV_FIELDS,
    AdamState,
    PropertyStats,
    TrainConfig,
    adam_step,
    batch_loss,
    degree_normalize,
    dequantize,
    fit,
    goal_weight,
    normalize_property,
)

from conftest import graphs

E_CONST = 2.718281828459045235


class FixedEnergies:
    """Stand-in model whose batch energies are fixed numbers."""

    def __init__(self, energies):
        self.E = np.asarray(energies, dtype=np.float64)

    def forward(self, X, A):
        return self.E.copy(), None

    def backward(self, cache, inputs=False, param_weights=None):
        return None, None, [np.asarray(param_weights)]


def zero_tensor(dims):
    return DenseGraphTensor(np.zeros(dims.x_shape), np.zeros(dims.a_shape))


class TestScalars:
    def test_goal_weight(self):
        assert goal_weight(0.0) == 2.0
        assert goal_weight(1.0) == pytest.approx(3.718281828459045, abs=1e-15)
        assert goal_weight(0.5) == pytest.approx(2.648721270700128, abs=1e-15)

    @given(st.floats(-5, 5), st.floats(1e-6, 1))
    def test_goal_weight_increasing(self, y, dy):
        assert goal_weight(y + dy) > goal_weight(y)

    def test_normalize_property(self):
        stats = PropertyStats(2.0, 4.0)
        assert normalize_property(2.0, stats) == 0.0
        assert normalize_property(4.0, stats) == 1.0
        assert normalize_property(9.0, stats) == 1.0
        assert normalize_property(-1.0, stats) == 0.0
        assert normalize_property(3.0, stats) == 0.5

    def test_degenerate_stats(self):
        with pytest.raises(DegenerateStats):
            normalize_property(1.0, PropertyStats(1.0, 1.0))

    def test_stats_from_values(self):
        assert PropertyStats.from_values([3, -1, 2]) == PropertyStats(-1.0, 3.0)
        with pytest.raises(EmptySet):
            PropertyStats.from_values([])


class TestPreprocessing:
    def test_degree_normalize_one_hot(self):
        g = encode_one_hot([0, 2, 1], [(0, 1, 2)], Dims(4, 4, 3))
        out = degree_normalize(g.A.astype(float))
        assert np.allclose(out.sum(axis=(1, 2)), 1.0)
        assert np.allclose(out[out > 0], 1 / 4)

    def test_degree_normalize_hand_values(self):
        A = np.zeros((2, 2, 2))
        A[0, 0] = [0.0, 1.0]
        A[0, 1] = [0.5, 0.5]
        A[1, 0] = [0.25, 0.0]
        A[1, 1] = [0.0, 0.25]
        out = degree_normalize(A)
        assert np.allclose(out[0], [[0.0, 0.5], [0.25, 0.25]])
        assert np.allclose(out[1], [[0.5, 0.0], [0.0, 0.5]])

    def test_degree_normalize_zero(self):
        assert not degree_normalize(np.zeros((3, 3, 4))).any()

    def test_dequantize_t_zero(self):
        g = encode_one_hot([0, 2], [(0, 1, 1)], Dims(3, 4, 3))
        s = dequantize(g, 0.0, np.random.default_rng(0))
        assert np.array_equal(s.X, g.X.astype(float))

    @given(graphs(), st.floats(0, 0.999, exclude_min=True), st.integers(0, 2**31))
    def test_dequantize_ranges_and_argmax(self, g, t, seed):
        s = dequantize(g, t, np.random.default_rng(seed))
        assert s.X.min() >= 0 and s.X.max() < 1 + t
        assert s.A.min() >= 0 and s.A.max() < 1
        assert np.array_equal(s.X.argmax(axis=1), g.X.argmax(axis=1))

    def test_noise_mean(self):
        g = encode_one_hot([0], [], Dims(1, 4, 3))
        rng = np.random.default_rng(1)
        noise = np.concatenate([(dequantize(g, 0.2, rng).X - g.X).ravel() for _ in range(200_000)])
        assert noise.size == 10**6
        assert abs(noise.mean() - 0.1) < 0.001

    def test_bad_t(self):
        with pytest.raises(DataError):
            dequantize(encode_one_hot([0], [], Dims(1, 4, 3)), 1.0, np.random.default_rng(0))


class TestBatchLoss:
    d = Dims(3, 4, 3)

    def _loss(self, e_pos, e_neg, alpha=1.0, ys=None, goal=False):
        B = len(e_pos)
        model = FixedEnergies(list(e_pos) + list(e_neg))
        ys = ys or [None] * B
        pos = [(zero_tensor(self.d), y) for y in ys]
        neg = [zero_tensor(self.d) for _ in range(B)]
        return batch_loss(model, pos, neg, TrainConfig(alpha=alpha, goal_directed=goal))

    def test_hand_example(self):
        report, _ = self._loss([1.0], [2.0])
        assert report.loss_energy == -1.0 and report.loss_reg == 5.0 and report.total == 4.0

    def test_zero(self):
        report, _ = self._loss([0.0, 0.0], [0.0, 0.0])
        assert report.loss_energy == 0.0 and report.loss_reg == 0.0

    def test_mean_over_pairs(self):
        report, _ = self._loss([1.0, 3.0], [2.0, 0.0], alpha=0.5)
        assert report.loss_energy == pytest.approx(((1 - 2) + (3 - 0)) / 2)
        assert report.loss_reg == pytest.approx((1 + 4 + 9 + 0) / 2)
        assert report.total == report.loss_energy + 0.5 * report.loss_reg

    def test_goal_weighting(self):
        report, _ = self._loss([1.0], [0.0], alpha=0.0, ys=[1.0], goal=True)
        assert report.loss_energy == pytest.approx(1 + E_CONST, abs=1e-15)

    @given(st.lists(st.floats(-10, 10), min_size=2, max_size=6), st.floats(0, 3))
    def test_total_identity(self, energies, alpha):
        half = len(energies) // 2
        report, _ = self._loss(energies[:half], energies[half:2 * half], alpha=alpha)
        assert report.total == report.loss_energy + alpha * report.loss_reg

    def test_errors(self):
        model = FixedEnergies([0.0, 0.0])
        with pytest.raises(LengthMismatch):
            batch_loss(model, [(zero_tensor(self.d), None)], [], TrainConfig())
        with pytest.raises(MissingProperty):
            batch_loss(model, [(zero_tensor(self.d), None)], [zero_tensor(self.d)], TrainConfig(goal_directed=True))
        with pytest.raises(EmptySet):
            batch_loss(model, [], [], TrainConfig())

    def test_positive_gradient_ratio(self):
        # hallucinated zero tensor has zero energy and zero parameter gradient, and alpha = 0,
        # so the whole gradient is f(y) * dE+/dtheta
        dims = Dims(6, 4, 3)
        model = init_params(dims, 3, 16, seed=3)
        rng = np.random.default_rng(3)
        pos = DenseGraphTensor(rng.random(dims.x_shape), rng.random(dims.a_shape))
        cfg = TrainConfig(alpha=0.0, goal_directed=True)
        _, g1 = batch_loss(model, [(pos, 1.0)], [zero_tensor(dims)], cfg)
        _, g0 = batch_loss(model, [(pos, 0.0)], [zero_tensor(dims)], cfg)
        ratio = (1 + E_CONST) / 2
        for a, b in zip(g1, g0):
            mask = np.abs(b) > 1e-300
            assert np.all(np.abs(a[mask] / b[mask] - ratio) <= 1e-12)
            assert not a[~mask].any()

    def test_gradient_is_weighted_energy_gradient(self):
        dims = Dims(5, 4, 3)
        model = init_params(dims, 2, 8, seed=4)
        rng = np.random.default_rng(4)
        p = DenseGraphTensor(rng.random(dims.x_shape), rng.random(dims.a_shape))
        n = DenseGraphTensor(rng.random(dims.x_shape), rng.random(dims.a_shape))
        from molebm.energy import energy_forward, energy_grad_params
        alpha = 0.7
        _, g = batch_loss(model, [(p, None)], [n], TrainConfig(alpha=alpha))
        ep, en = energy_forward(model, p), energy_forward(model, n)
        gp, gn = energy_grad_params(model, p).dparams, energy_grad_params(model, n).dparams
        for got, a, b in zip(g, gp, gn):
            assert np.allclose(got, (1 + 2 * alpha * ep) * a + (-1 + 2 * alpha * en) * b, rtol=1e-10, atol=1e-14)


class TestAdam:
    def test_zero_gradient(self):
        p = [np.array([1.0, -2.0])]
        new, _ = adam_step(p, [np.zeros(2)], AdamState.zeros_like(p), 1e-3)
        assert np.array_equal(new[0], p[0])

    def test_moments_decay(self):
        p = [np.array([1.0, -2.0])]
        state = AdamState([np.array([0.5, -0.5])], [np.array([0.2, 0.1])], step=3)
        _, st2 = adam_step(p, [np.zeros(2)], state, 1e-3)
        assert np.allclose(st2.m[0], [0.45, -0.45]) and np.allclose(st2.v[0], [0.1998, 0.0999])

    def test_first_step_closed_form(self):
        p = [np.array([1.0, 1.0, 1.0])]
        g = [np.array([0.3, -2.0, 1e-3])]
        new, st2 = adam_step(p, g, AdamState.zeros_like(p), 0.01)
        expected = 1.0 - 0.01 * g[0] / (np.abs(g[0]) + 1e-8)
        assert np.allclose(new[0], expected, rtol=0, atol=1e-15)
        assert st2.step == 1

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        p = [rng.random((3, 2))]
        gs = [[rng.random((3, 2))] for _ in range(5)]

        def run():
            params, state = p, AdamState.zeros_like(p)
            for g in gs:
                params, state = adam_step(params, g, state, 0.1)
            return params[0]

        assert np.array_equal(run(), run())

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            adam_step([np.zeros(2)], [np.zeros(3)], AdamState.zeros_like([np.zeros(2)]), 0.1)


class TestFit:
    dims = Dims(9, 4, 3)

    def _data(self, n=64):
        return random_corpus(n, QM9_VOCAB, self.dims, seed=2)

    def test_smoke_one_batch(self, tmp_path):
        model = init_params(self.dims, 3, 16, seed=0, vocab=QM9_VOCAB)
        cfg = TrainConfig(epochs=1, batch=64, langevin=LangevinConfig(K=1))
        model, reports = fit(self._data(), cfg, model, checkpoint_dir=tmp_path / "ck", csv_path=tmp_path / "e.csv")
        assert len(reports) == 1 and math.isfinite(reports[0].total)
        rows = list(csv.reader(open(tmp_path / "e.csv")))
        assert rows[0] == EPOCH_CSV_FIELDS and len(rows) == 2
        assert load_checkpoint(tmp_path / "ck" / "epoch_001.gebm").digest() == model.digest()

    def test_deterministic(self):
        cfg = TrainConfig(epochs=1, batch=32, langevin=LangevinConfig(K=2), seed=5)
        runs = [fit(self._data(), cfg, init_params(self.dims, 2, 8, seed=1))[1][0] for _ in range(2)]
        assert runs[0].total == runs[1].total

    def test_dims_mismatch(self):
        with pytest.raises(DimsMismatch):
            fit(self._data(4), TrainConfig(epochs=1), init_params(Dims(8, 4, 3), 1, 4))

    def test_goal_needs_properties(self):
        with pytest.raises(MissingProperty):
            fit(self._data(4), TrainConfig(epochs=1, goal_directed=True), init_params(self.dims, 1, 4))

    def test_empty(self):
        with pytest.raises(EmptySet):
            fit([], TrainConfig(epochs=1), init_params(self.dims, 1, 4))

    def test_hallucinated_are_constants(self):
        # the loss gradient only sees the final chain tensors: feeding the same
        # tensors through batch_loss reproduces it regardless of how they were made
        dims = Dims(5, 4, 3)
        model = init_params(dims, 2, 8, seed=9)
        rng = np.random.default_rng(9)
        p = DenseGraphTensor(rng.random(dims.x_shape), rng.random(dims.a_shape))
        n = DenseGraphTensor(rng.random(dims.x_shape), rng.random(dims.a_shape))
        a = batch_loss(model, [(p, None)], [n], TrainConfig())[1]
        b = batch_loss(model, [(p, None)], [n.copy()], TrainConfig())[1]
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_config_validation(self):
        with pytest.raises(DataError):
            TrainConfig(t=1.0)
        with pytest.raises(DataError):
            TrainConfig(lr=0.0)
