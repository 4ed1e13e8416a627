import math

import numpy as np
import pytest

from dpareto import gp
from dpareto.gp import GPConfig, KernelParams


def random_theta(rng, d):
    return np.concatenate([[rng.uniform(-2, 2)], rng.uniform(np.log(0.05), np.log(3), d), [rng.uniform(-8, -1)]])


def test_matern_examples():
    p = KernelParams(1.0, (1.0,))
    assert gp.matern52([0.3], [0.3], KernelParams(2.5, (0.4,))) == pytest.approx(2.5)
    expected = (1 + math.sqrt(5) + 5 / 3) * math.exp(-math.sqrt(5))
    assert gp.matern52([0.0], [1.0], p) == pytest.approx(expected)
    assert expected == pytest.approx(0.52399, abs=1e-5)
    assert gp.matern52([0.0], [1.0], KernelParams(1.0, (1e-3,))) < 1e-300
    with pytest.raises(ValueError):
        gp.matern52([0.0, 1.0], [1.0], p)


def test_kernel_matrix_psd_and_factor():
    rng = np.random.default_rng(0)
    X = rng.random((40, 3))
    params = KernelParams(1.3, (0.2, 0.5, 1.0), 1e-6)
    K = gp.kernel_matrix(X, X, params)
    np.testing.assert_allclose(K, K.T, atol=1e-14)
    assert np.min(np.linalg.eigvalsh(K)) > -1e-10
    m = gp.condition(X, rng.random(40), params)
    KN = K + (params.noise_variance + m.jitter) * np.eye(40)
    rel = np.linalg.norm(m.factor @ m.factor.T - KN) / np.linalg.norm(KN)
    assert rel <= 1e-8


def test_fit_single_point_interpolates():
    m = gp.fit([[0.4]], [0.7])
    mean, var = gp.predict(m, [0.4])
    assert mean == pytest.approx(0.7, abs=1e-6)


def test_fit_constant_targets():
    X = np.linspace(0, 1, 10)[:, None]
    m = gp.fit(X, np.full(10, 3.2))
    means, _ = gp.predict(m, np.linspace(0, 1, 37)[:, None])
    np.testing.assert_allclose(means, 3.2, atol=1e-3)


def test_fit_smooth_function_beats_prior():
    rng = np.random.default_rng(3)
    f = lambda x: np.sin(6 * x) + 0.5 * x
    X = rng.random((20, 1))
    m = gp.fit(X, f(X[:, 0]), GPConfig(seed=1))
    Xt = rng.random((200, 1))
    mean, _ = gp.predict(m, Xt)
    rmse = np.sqrt(np.mean((mean - f(Xt[:, 0])) ** 2))
    assert rmse < np.std(f(Xt[:, 0]))
    assert rmse < 0.05


def test_predict_examples():
    params = KernelParams(2.0, (0.1, 0.1))
    empty = gp.condition(np.zeros((0, 2)), [], params)
    assert gp.predict(empty, [0.5, 0.5]) == (0.0, 2.0)
    X = np.array([[0.1, 0.1], [0.2, 0.9], [0.8, 0.4]])
    y = np.array([1.0, -2.0, 0.5])
    m = gp.condition(X, y, params)
    means, var = gp.predict(m, X)
    np.testing.assert_allclose(means, y, atol=1e-6)
    assert np.all(var < 1e-5)
    far_params = KernelParams(2.0, (0.01, 0.01))
    mf = gp.condition(X, y, far_params)
    mean, v = gp.predict(mf, [0.55, 0.55])
    assert mean == pytest.approx(np.mean(y), abs=1e-9)
    assert v == pytest.approx(2.0, rel=1e-9)


def test_variance_bounds():
    rng = np.random.default_rng(5)
    X = rng.random((30, 2))
    params = KernelParams(1.7, (0.3, 0.6), 1e-3)
    m = gp.condition(X, rng.standard_normal(30), params)
    _, var = gp.predict(m, rng.random((500, 2)))
    assert np.all(var >= 0)
    assert np.all(var <= 1.7 + 1e-3 + 1e-9)


def test_log_marginal_likelihood_examples():
    m = gp.condition([[0.5]], [0.0], KernelParams(1.0 - 1e-6, (1.0,), 1e-6))
    assert gp.log_marginal_likelihood(m) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)
    assert gp.log_marginal_likelihood(m) == pytest.approx(-0.91894, abs=1e-5)
    X = np.array([[0.1], [0.7]])
    vals = [gp.log_marginal_likelihood(gp.condition(X, [1.0, -1.0], KernelParams(1.0, (0.3,), nv)))
            for nv in (1.0, 1e2, 1e4, 1e6)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < -10


def test_mll_matches_model_likelihood():
    rng = np.random.default_rng(7)
    X = rng.random((15, 2))
    y = rng.standard_normal(15)
    theta = random_theta(rng, 2)
    m = gp.condition(X, y, KernelParams.from_log_vector(theta))
    mll, _ = gp.mll_and_grad(theta, X, y - np.mean(y))
    assert mll == pytest.approx(gp.log_marginal_likelihood(m), rel=1e-10)


def test_mll_gradient_central_differences():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 4))
        n = int(rng.integers(3, 25))
        X = rng.random((n, d))
        y = rng.standard_normal(n)
        theta = random_theta(rng, d)
        _, grad = gp.mll_and_grad(theta, X, y)
        h = 1e-5
        fd = np.empty_like(theta)
        for i in range(len(theta)):
            e = np.zeros_like(theta)
            e[i] = h
            fd[i] = (gp.mll_and_grad(theta + e, X, y)[0] - gp.mll_and_grad(theta - e, X, y)[0]) / (2 * h)
        worst = max(worst, np.max(np.abs(grad - fd) / np.maximum(np.abs(fd), 1e-3)))
    assert worst <= 1e-4


def test_fit_deterministic():
    rng = np.random.default_rng(2)
    X = rng.random((25, 2))
    y = np.cos(3 * X[:, 0]) + X[:, 1]
    a = gp.fit(X, y, GPConfig(seed=4))
    b = gp.fit(X, y, GPConfig(seed=4))
    assert a.params == b.params


def test_fit_rejects_bad_targets():
    with pytest.raises(ValueError):
        gp.fit([[0.1], [0.2]], [1.0, np.nan])
    with pytest.raises(ValueError):
        gp.fit(np.zeros((0, 1)), [])


def test_jitter_rescues_duplicate_inputs():
    X = np.array([[0.3], [0.3], [0.3]])
    m = gp.condition(X, [1.0, 1.0, 1.0], KernelParams(1.0, (0.5,), 0.0))
    assert m.jitter > 0
    assert gp.predict(m, [0.3])[0] == pytest.approx(1.0, abs=1e-4)


def test_kernel_params_json():
    p = KernelParams(1.5, (0.1, 2.0), 1e-4)
    q = KernelParams.from_log_vector(p.to_log_vector())
    assert q.signal_variance == pytest.approx(1.5)
    assert q.lengthscales == pytest.approx((0.1, 2.0))
    assert q.noise_variance == pytest.approx(1e-4)
    assert '"lengthscales": [0.1, 2.0]' in p.to_json()
