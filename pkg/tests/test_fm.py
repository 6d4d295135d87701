"""Surrogate-model unit tests: prediction, penalties, gradients (against a
finite-difference oracle), AMSGRAD, and training behavior."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fmanneal import fm


def naive_predict(params, x):
    """Independent double-sum evaluation of the model."""
    out = params.a
    n = params.n_bits
    for i in range(n):
        out += params.b[i] * x[i]
        for j in range(i + 1, n):
            out += float(params.v[i] @ params.v[j]) * x[i] * x[j]
    return out


def naive_total_loss(params, X, y, adjacency, lam_sr, lam_l2):
    """Scalar loss evaluated entirely through the naive prediction path."""
    out = sum((naive_predict(params, x) - t) ** 2 for x, t in zip(X, y))
    for p, q in adjacency:
        out += lam_sr * (
            float(((params.v[p] - params.v[q]) ** 2).sum()) + (params.b[p] - params.b[q]) ** 2
        )
    out += lam_l2 * (float((params.v**2).sum()) + float((params.b**2).sum()))
    return out


def random_instance(rng, n_max=12, k_max=4, m_max=8):
    n = int(rng.integers(2, n_max + 1))
    k = int(rng.integers(1, k_max + 1))
    m = int(rng.integers(1, m_max + 1))
    params = fm.FmParams(
        float(rng.uniform(-1, 1)),
        rng.uniform(-1, 1, n),
        rng.uniform(-1, 1, (n, k)),
    )
    X = rng.integers(0, 2, (m, n)).astype(float)
    y = rng.uniform(-2, 2, m)
    adjacency = [(i, i + 1) for i in range(n - 1)]
    return params, X, y, adjacency


class TestInitParams:
    def test_deterministic(self):
        p1 = fm.init_params(4, 2, 0.1, seed=11)
        p2 = fm.init_params(4, 2, 0.1, seed=11)
        assert p1.a == p2.a == 0.0
        assert np.array_equal(p1.b, p2.b)
        assert np.array_equal(p1.v, p2.v)

    def test_zero_bias(self):
        assert fm.init_params(4, 2, 0.1, seed=3).a == 0.0

    def test_sample_std(self):
        # 16000 draws: sample std must sit inside [0.09, 0.11]
        p = fm.init_params(1000, 16, 0.1, seed=5)
        assert 0.09 <= p.v.std() <= 0.11

    def test_rejects_degenerate(self):
        with pytest.raises(ValueError):
            fm.init_params(0, 2, 0.1, 0)
        with pytest.raises(ValueError):
            fm.init_params(4, 0, 0.1, 0)


class TestPredict:
    def test_all_zero(self):
        p = fm.init_params(5, 3, 0.1, 0)
        assert fm.predict(p, np.zeros(5)) == pytest.approx(p.a, abs=1e-15)

    def test_single_bit(self):
        p = fm.init_params(5, 3, 0.1, 1)
        x = np.zeros(5)
        x[2] = 1
        assert fm.predict(p, x) == pytest.approx(p.a + p.b[2], abs=1e-12)

    def test_two_bits(self):
        p = fm.init_params(5, 3, 0.1, 2)
        x = np.zeros(5)
        x[1] = x[4] = 1
        expected = p.a + p.b[1] + p.b[4] + float(p.v[1] @ p.v[4])
        assert fm.predict(p, x) == pytest.approx(expected, abs=1e-12)

    def test_length_mismatch(self):
        p = fm.init_params(5, 3, 0.1, 0)
        with pytest.raises(ValueError):
            fm.predict(p, np.zeros(4))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 10), st.integers(1, 4))
    def test_factorized_equals_double_sum(self, seed, n, k):
        rng = np.random.default_rng(seed)
        params = fm.FmParams(float(rng.uniform(-1, 1)), rng.uniform(-1, 1, n), rng.uniform(-1, 1, (n, k)))
        x = rng.integers(0, 2, n).astype(float)
        assert fm.predict(params, x) == pytest.approx(naive_predict(params, x), abs=1e-12)


class TestLoss:
    def test_perfect_fit(self):
        p = fm.init_params(4, 2, 0.1, 0)
        x = np.array([1.0, 0.0, 1.0, 0.0])
        assert fm.loss_mse(p, x[None], [fm.predict(p, x)]) == pytest.approx(0.0, abs=1e-18)

    def test_arithmetic(self):
        p = fm.init_params(4, 2, 0.1, 0)
        x = np.array([1.0, 0.0, 1.0, 0.0])
        pred = fm.predict(p, x)
        assert fm.loss_mse(p, x[None], [pred + 2.0]) == pytest.approx(4.0, abs=1e-10)

    def test_sum_of_residuals(self):
        p = fm.init_params(4, 2, 0.1, 7)
        X = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]])
        preds = fm.predict_batch(p, X)
        y = np.array([preds[0] - 1.0, preds[1] + 3.0])
        assert fm.loss_mse(p, X, y) == pytest.approx(10.0, abs=1e-10)

    def test_empty_rejected(self):
        p = fm.init_params(4, 2, 0.1, 0)
        with pytest.raises(ValueError):
            fm.loss_mse(p, np.zeros((0, 4)), [])


class TestPenalties:
    def test_fsr_zero_when_equal(self):
        b = np.ones(4)
        v = np.tile([0.3, -0.2], (4, 1))
        p = fm.FmParams(0.5, b, v)
        assert fm.fsr_penalty(p, [(0, 1), (1, 2), (2, 3)]) == 0.0

    def test_fsr_chain_hand_expansion(self):
        # pairs {(0,1),(1,2)}, K=1, v rows [0,1,3]: (0-1)^2 + (1-3)^2 = 5
        p = fm.FmParams(0.0, np.zeros(3), np.array([[0.0], [1.0], [3.0]]))
        assert fm.fsr_penalty(p, [(0, 1), (1, 2)]) == pytest.approx(5.0)

    def test_fsr_empty_adjacency(self):
        p = fm.init_params(4, 2, 0.1, 0)
        assert fm.fsr_penalty(p, []) == 0.0

    def test_fsr_out_of_range(self):
        p = fm.init_params(4, 2, 0.1, 0)
        with pytest.raises(ValueError):
            fm.fsr_penalty(p, [(3, 4)])

    def test_l2_zero(self):
        p = fm.FmParams(1.0, np.zeros(3), np.zeros((3, 2)))
        assert fm.l2_penalty(p) == 0.0  # bias excluded

    def test_l2_arithmetic(self):
        p = fm.FmParams(0.0, np.array([3.0]), np.array([[4.0]]))
        assert fm.l2_penalty(p) == pytest.approx(25.0)

    def test_l2_homogeneity(self):
        p = fm.init_params(5, 2, 0.1, 9)
        doubled = fm.FmParams(p.a, 2 * p.b, 2 * p.v)
        assert fm.l2_penalty(doubled) == pytest.approx(4 * fm.l2_penalty(p), rel=1e-12)


class TestGradients:
    def test_zero_residuals_zero_gradients(self):
        p = fm.init_params(5, 2, 0.1, 3)
        X = np.array([[1.0, 0, 1, 0, 0], [0, 1.0, 0, 0, 1]])
        y = fm.predict_batch(p, X)
        g = fm.gradients(p, X, y)
        assert g.da == 0.0
        assert np.all(g.db == 0.0)
        assert np.all(g.dv == 0.0)

    def test_untouched_bit_zero_gradient(self):
        # no sample sets bit 2: db_2 and dv_2 exactly zero without regularizers
        p = fm.init_params(4, 3, 0.1, 4)
        X = np.array([[1.0, 0, 0, 1], [0, 1.0, 0, 0]])
        g = fm.gradients(p, X, [5.0, -1.0])
        assert g.db[2] == 0.0
        assert np.all(g.dv[2] == 0.0)

    def test_finite_difference_oracle(self):
        rng = np.random.default_rng(2024)
        h = 1e-6
        for _ in range(30):
            params, X, y, adjacency = random_instance(rng)
            lam_sr = float(rng.choice([0.0, 0.1, 10.0]))
            lam_l2 = float(rng.choice([0.0, 0.1, 10.0]))
            g = fm.gradients(params, X, y, adjacency, lam_sr, lam_l2)
            theta = np.concatenate(([params.a], params.b, params.v.ravel()))
            analytic = np.concatenate(([g.da], g.db, g.dv.ravel()))
            n, k = params.n_bits, params.rank

            def loss_at(vec):
                pp = fm.FmParams(vec[0], vec[1 : 1 + n], vec[1 + n :].reshape(n, k))
                return naive_total_loss(pp, X, y, adjacency, lam_sr, lam_l2)

            for idx in range(theta.size):
                up, dn = theta.copy(), theta.copy()
                up[idx] += h
                dn[idx] -= h
                fd = (loss_at(up) - loss_at(dn)) / (2 * h)
                scale = max(1.0, abs(analytic[idx]), abs(fd))
                assert abs(fd - analytic[idx]) <= 1e-6 * scale


class TestAmsgrad:
    def test_zero_gradient_leaves_coordinate(self):
        p = fm.init_params(3, 2, 0.1, 5)
        state = fm.AmsgradState.zeros(3, 2)
        g = fm.FmGradients(1.0, np.array([0.0, 2.0, 0.0]), np.zeros((3, 2)))
        p2, _ = fm.amsgrad_step(state, p, g, 0.1)
        assert p2.b[0] == p.b[0] and p2.b[2] == p.b[2]
        assert np.array_equal(p2.v, p.v)
        assert p2.b[1] != p.b[1]

    def test_first_step_descends(self):
        p = fm.FmParams(0.0, np.zeros(2), np.zeros((2, 1)))
        state = fm.AmsgradState.zeros(2, 1)
        g = fm.FmGradients(0.5, np.array([2.0, -3.0]), np.array([[1.0], [-1.0]]))
        p2, _ = fm.amsgrad_step(state, p, g, 0.1)
        assert p2.a < 0.0
        assert p2.b[0] < 0.0 and p2.b[1] > 0.0
        assert p2.v[0, 0] < 0.0 and p2.v[1, 0] > 0.0

    def test_hand_trace_two_constant_steps(self):
        # independent re-derivation of two updates with constant gradient
        b1, b2, eps, lr = 0.9, 0.999, 1e-8, 0.05
        g = 0.7
        m = v = vmax = 0.0
        theta = 0.3
        for t in (1, 2):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            vmax_new = max(vmax, v)
            assert vmax_new == v  # growing second moment: max never clips
            vmax = vmax_new
            theta -= lr * (m / (1 - b1**t)) / (np.sqrt(vmax / (1 - b2**t)) + eps)

        p = fm.FmParams(0.3, np.zeros(1), np.zeros((1, 1)))
        state = fm.AmsgradState.zeros(1, 1)
        grad = fm.FmGradients(g, np.zeros(1), np.zeros((1, 1)))
        for _ in range(2):
            p, state = fm.amsgrad_step(state, p, grad, lr)
        assert p.a == pytest.approx(theta, rel=1e-14)
        assert np.all(state.v2max == state.v2)

    def test_vmax_monotone(self):
        rng = np.random.default_rng(8)
        p = fm.init_params(4, 2, 0.1, 8)
        state = fm.AmsgradState.zeros(4, 2)
        prev = state.v2max.copy()
        for _ in range(20):
            g = fm.FmGradients(float(rng.normal()), rng.normal(size=4), rng.normal(size=(4, 2)))
            p, state = fm.amsgrad_step(state, p, g, 0.01)
            assert np.all(state.v2max >= prev)
            prev = state.v2max.copy()

    def test_shape_mismatch(self):
        p = fm.init_params(3, 2, 0.1, 0)
        state = fm.AmsgradState.zeros(3, 2)
        with pytest.raises(ValueError):
            fm.amsgrad_step(state, p, fm.FmGradients(0.0, np.zeros(2), np.zeros((2, 2))), 0.1)


class TestTrain:
    def test_untouched_bit_frozen_without_fsr(self):
        p0 = fm.init_params(5, 2, 0.1, 21)
        X = np.array([[1.0, 1, 0, 0, 0], [0, 1.0, 0, 1, 0]])
        y = np.array([3.0, -2.0])
        cfg = fm.TrainConfig(learning_rate=0.1, n_updates=50, lambda_sr=0.0)
        p1, _ = fm.train(p0, X, y, cfg, adjacency=[(i, i + 1) for i in range(4)])
        # bits 2 and 4 never appear in the data
        for l in (2, 4):
            assert p1.b[l].tobytes() == p0.b[l].tobytes()
            assert p1.v[l].tobytes() == p0.v[l].tobytes()
        assert not np.array_equal(p1.b, p0.b)

    def test_fsr_moves_untouched_bit(self):
        p0 = fm.init_params(5, 2, 0.1, 21)
        X = np.array([[1.0, 1, 0, 0, 0], [0, 1.0, 0, 1, 0]])
        y = np.array([3.0, -2.0])
        cfg = fm.TrainConfig(learning_rate=0.1, n_updates=1, lambda_sr=0.1)
        p1, _ = fm.train(p0, X, y, cfg, adjacency=[(i, i + 1) for i in range(4)])
        assert not np.array_equal(p1.b[2:3], p0.b[2:3]) or not np.array_equal(p1.v[2], p0.v[2])

    def test_single_point_convergence(self):
        p0 = fm.init_params(4, 2, 0.1, 33)
        X = np.array([[1.0, 0, 1, 0]])
        y = np.array([2.5])
        cfg = fm.TrainConfig(learning_rate=0.1, n_updates=1000)
        p1, history = fm.train(p0, X, y, cfg)
        assert (fm.predict(p1, X[0]) - 2.5) ** 2 < 1e-8
        assert history.shape == (1000,)

    def test_first_iteration_matches_amsgrad_step(self):
        rng = np.random.default_rng(55)
        params, X, y, adjacency = random_instance(rng)
        cfg = fm.TrainConfig(learning_rate=0.05, n_updates=1, lambda_sr=0.1, lambda_l2=0.01)
        trained, history = fm.train(params, X, y, cfg, adjacency)
        g = fm.gradients(params, X, y, adjacency, 0.1, 0.01)
        stepped, _ = fm.amsgrad_step(fm.AmsgradState.zeros(params.n_bits, params.rank), params, g, 0.05)
        assert trained.a == stepped.a
        assert np.array_equal(trained.b, stepped.b)
        assert np.array_equal(trained.v, stepped.v)
        expected_loss = fm.total_loss(params, X, y, adjacency, 0.1, 0.01)
        assert history[0] == pytest.approx(expected_loss, rel=1e-12)

    def test_deterministic(self):
        p0 = fm.init_params(6, 3, 0.1, 77)
        rng = np.random.default_rng(1)
        X = rng.integers(0, 2, (5, 6)).astype(float)
        y = rng.uniform(-1, 1, 5)
        cfg = fm.TrainConfig(learning_rate=0.1, n_updates=40, lambda_sr=0.1)
        adj = [(i, i + 1) for i in range(5)]
        a1, h1 = fm.train(p0, X, y, cfg, adj)
        a2, h2 = fm.train(p0, X, y, cfg, adj)
        assert a1.b.tobytes() == a2.b.tobytes()
        assert a1.v.tobytes() == a2.v.tobytes()
        assert np.array_equal(h1, h2)

    def test_fsr_fixpoint_monotone_decrease(self):
        # data touches no b/v coordinate (all-zero input row), so only the
        # smoothing term drives b and v; at small learning rates the penalty
        # must fall monotonically through the approach phase.
        p0 = fm.init_params(6, 2, 0.1, 13)
        X = np.zeros((1, 6))
        y = np.array([p0.a])
        adj = [(i, i + 1) for i in range(5)]
        for lr, n_it in ((0.01, 10), (0.001, 100)):
            cfg = fm.TrainConfig(learning_rate=lr, n_updates=1, lambda_sr=1.0)
            penalties = [fm.fsr_penalty(p0, adj)]
            p = p0
            for _ in range(n_it):
                p, _ = fm.train(p, X, y, cfg, adj)
                penalties.append(fm.fsr_penalty(p, adj))
            diffs = np.diff(penalties)
            assert np.all(diffs <= 1e-12), f"lr={lr}: penalty increased"
