import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from molebm.energy import energy_forward, energy_grad_inputs, init_params
from molebm.errors import DataError, DimsMismatch, EmptyComposite, NonFiniteEnergy
from molebm.graph import DenseGraphTensor, Dims
from molebm.langevin import (
    CompositeEnergy,
    LangevinConfig,
    chain_rngs,
    composite_eval,
    init_batch,
    init_sample,
    langevin_step,
    run_chain,
    run_chains,
    upper_bounds,
)

D = Dims(5, 4, 3)


class Quadratic:
    """E = 0.5 * (|X - cx|^2 + |A - ca|^2) per sample."""

    def __init__(self, cx, ca):
        self.cx, self.ca = cx, ca

    def energies(self, X, A):
        return 0.5 * (((X - self.cx) ** 2).sum(axis=(1, 2)) + ((A - self.ca) ** 2).sum(axis=(1, 2, 3)))

    def energy_and_grad(self, X, A):
        return self.energies(X, A), X - self.cx, A - self.ca


class Constant:
    def __init__(self, grad=0.0, value=0.0):
        self.grad, self.value = grad, value

    def energies(self, X, A):
        return np.full(X.shape[0], self.value)

    def energy_and_grad(self, X, A):
        return self.energies(X, A), np.full_like(X, self.grad), np.full_like(A, self.grad)


def test_config_validation():
    for bad in (dict(K=0), dict(step_size=0.0), dict(noise_std=-1.0), dict(clip=0.0), dict(t=1.0)):
        with pytest.raises(DataError):
            LangevinConfig(**bad)


class TestInitSample:
    def test_t_zero_range(self):
        s = init_sample(D, 0.0, np.random.default_rng(0))
        assert s.X.min() >= 0 and s.X.max() < 1 and s.A.max() < 1

    def test_deterministic(self):
        a = init_sample(D, 0.1, np.random.default_rng(3))
        b = init_sample(D, 0.1, np.random.default_rng(3))
        assert np.array_equal(a.X, b.X) and np.array_equal(a.A, b.A)

    def test_mean(self):
        rng = np.random.default_rng(4)
        big = Dims(1000, 999, 1)  # 10^6 X entries
        s = init_sample(big, 0.5, rng)
        assert s.X.size == 10**6
        assert abs(s.X.mean() - 0.75) < 0.01

    def test_chain_streams_independent_of_batching(self):
        whole = chain_rngs(9, 5)
        tail = chain_rngs(9, 2, start=3)
        assert whole[3].random() == tail[0].random()


class TestStep:
    def test_zero_gradient_zero_noise_identity(self):
        s = init_sample(D, 0.1, np.random.default_rng(0))
        out = langevin_step(Constant(), s, LangevinConfig(noise_std=0.0), np.random.default_rng(1))
        assert np.array_equal(out.X, s.X) and np.array_equal(out.A, s.A)

    def test_clipped_update_arithmetic(self):
        X = np.full(D.x_shape, 0.5)
        A = np.full(D.a_shape, 0.5)
        out = langevin_step(Constant(grad=5.0), DenseGraphTensor(X, A),
                            LangevinConfig(step_size=10, clip=0.01, noise_std=0.0), np.random.default_rng(0))
        assert 10 * 0.01 == 0.1
        assert np.all(out.X == 0.5 - 0.1) and np.all(out.A == 0.5 - 0.1)

    def test_clamp_below_open_bound(self):
        X = np.full(D.x_shape, 1.45)
        A = np.full(D.a_shape, 0.95)
        out = langevin_step(Constant(grad=-1.0), DenseGraphTensor(X, A),
                            LangevinConfig(step_size=25, clip=0.01, noise_std=0.0, t=0.5), np.random.default_rng(0))
        x_hi, a_hi = upper_bounds(0.5)
        assert np.all(out.X == x_hi) and x_hi < 1.5
        assert np.all(out.A == a_hi) and a_hi < 1.0

    @given(
        st.integers(0, 2**31),
        st.floats(1e-3, 100),
        st.floats(0, 2),
        st.floats(1e-4, 10),
        st.floats(0, 0.99),
    )
    def test_states_stay_in_range(self, seed, step, noise, clip, t):
        rng = np.random.default_rng(seed)
        model = init_params(D, 2, 8, seed=seed % 13)
        cfg = LangevinConfig(K=3, step_size=step, noise_std=noise, clip=clip, t=t)
        X0, A0 = (np.stack(a) for a in zip(*[(s.X, s.A) for s in [init_sample(D, t, rng) for _ in range(2)]]))
        X, A = X0, A0
        x_hi, a_hi = upper_bounds(t)
        for _ in range(cfg.K):
            res = run_chains(model, X, A, LangevinConfig(K=1, step_size=step, noise_std=noise, clip=clip, t=t), rng)
            X, A = res.X, res.A
            assert X.min() >= 0 and X.max() <= x_hi and X.max() < 1 + t
            assert A.min() >= 0 and A.max() <= a_hi and A.max() < 1

    def test_quadratic_descent_monotone(self):
        rng = np.random.default_rng(5)
        energy = Quadratic(rng.uniform(0.2, 0.8, D.x_shape), rng.uniform(0.2, 0.8, D.a_shape))
        s = init_sample(D, 0.1, rng)
        cfg = LangevinConfig(K=1, step_size=0.3, noise_std=0.0, clip=1e300)
        prev = energy.energies(s.X[None], s.A[None])[0]
        for _ in range(40):
            s = langevin_step(energy, s, cfg, rng)
            e = energy.energies(s.X[None], s.A[None])[0]
            assert e <= prev
            prev = e
        assert prev < 1e-6

    def test_non_finite_energy(self):
        s = init_sample(D, 0.1, np.random.default_rng(0))
        with pytest.raises(NonFiniteEnergy):
            run_chain(Constant(value=np.nan), s, LangevinConfig(K=2))

    def test_non_strict_flags_chain(self):
        rng = np.random.default_rng(0)
        X = rng.random((2, *D.x_shape))
        A = rng.random((2, *D.a_shape))

        class HalfBad(Constant):
            def energies(self, X, A):
                return np.array([0.0, np.inf])

        res = run_chains(HalfBad(), X, A, LangevinConfig(K=2), chain_rngs(0, 2), strict=False)
        assert res.failed.tolist() == [False, True]


class TestChain:
    def test_k1_equals_one_step(self):
        model = init_params(D, 2, 8, seed=1)
        s = init_sample(D, 0.1, np.random.default_rng(2))
        cfg = LangevinConfig(K=1)
        a, _ = run_chain(model, s, cfg, np.random.default_rng(3))
        b = langevin_step(model, s, cfg, np.random.default_rng(3))
        assert np.array_equal(a.X, b.X) and np.array_equal(a.A, b.A)

    def test_deterministic(self):
        model = init_params(D, 2, 8, seed=1)
        s = init_sample(D, 0.1, np.random.default_rng(2))
        a, ra = run_chain(model, s, LangevinConfig(K=5, seed=4))
        b, rb = run_chain(model, s, LangevinConfig(K=5, seed=4))
        assert np.array_equal(a.X, b.X) and np.array_equal(ra.trace, rb.trace)
        assert ra.trace.shape == (5, 1)

    def test_energy_decreases_on_trained_model(self):
        from molebm.graph import QM9_VOCAB
        from molebm.synth import random_corpus
        from molebm.training import TrainConfig, fit

        dims = Dims(9, 4, 3)
        model = init_params(dims, 3, 16, seed=0, vocab=QM9_VOCAB)
        data = random_corpus(128, QM9_VOCAB, dims, seed=1)
        fit(data, TrainConfig(epochs=1, batch=64, langevin=LangevinConfig(K=10)), model)
        rngs = chain_rngs(0, 100)
        X0, A0 = init_batch(dims, 0.1, rngs)
        res = run_chains(model, X0, A0, LangevinConfig(K=30), rngs)
        assert res.final_energy.mean() < res.trace[0].mean()


class TestComposite:
    def test_empty(self):
        with pytest.raises(EmptyComposite):
            CompositeEnergy([])

    def test_dims_mismatch(self):
        with pytest.raises(DimsMismatch):
            CompositeEnergy([init_params(D, 1, 4), init_params(Dims(6, 4, 3), 1, 4)])

    def test_singleton(self):
        m = init_params(D, 2, 8, seed=1)
        s = init_sample(D, 0.1, np.random.default_rng(0))
        E, dX, dA = composite_eval(CompositeEnergy([m]), s)
        g = energy_grad_inputs(m, s)
        assert E == energy_forward(m, s)
        assert np.array_equal(dX, g.dX) and np.array_equal(dA, g.dA)

    def test_identical_members_double(self):
        m = init_params(D, 2, 8, seed=1)
        s = init_sample(D, 0.1, np.random.default_rng(0))
        E, dX, dA = composite_eval(CompositeEnergy([m, m.copy()]), s)
        g = energy_grad_inputs(m, s)
        assert E == 2 * energy_forward(m, s)
        assert np.array_equal(dX, 2 * g.dX) and np.array_equal(dA, 2 * g.dA)

    def test_order_invariant(self):
        a, b = init_params(D, 2, 8, seed=1), init_params(D, 2, 8, seed=2)
        s = init_sample(D, 0.1, np.random.default_rng(0))
        assert composite_eval(CompositeEnergy([a, b]), s)[0] == composite_eval(CompositeEnergy([b, a]), s)[0]
