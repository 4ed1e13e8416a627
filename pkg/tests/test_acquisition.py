from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpareto import gp
from dpareto.acquisition import (
    AcquisitionConfig,
    hvpoi,
    hvpoi_batch,
    maximize_acquisition,
    maximize_normalized,
    poi,
    poi_from_moments,
)
from dpareto.core import Dimension, HyperparameterDomain, RngStream
from dpareto.pareto import dominates, hv_increment, pareto_front


def mc_poi(front, mean, std, anti_ideal, n, rng):
    draws = rng.normal(mean, std, size=(n, 2))
    inside = (draws[:, 0] <= anti_ideal[0]) & (draws[:, 1] <= anti_ideal[1])
    dominated = np.zeros(n, dtype=bool)
    for p in front:
        dominated |= (p[0] <= draws[:, 0]) & (p[1] <= draws[:, 1])
    return float(np.mean(inside & ~dominated))


def _shift(model, mean):
    # Empty models predict (offset, signal_variance) everywhere.
    return replace(model, offset=mean)


def test_poi_examples():
    assert poi_from_moments([[0.0, 0.0]], [[1.0, 1.0]], [], (np.inf, np.inf))[0] == pytest.approx(1.0)
    assert poi_from_moments([[3.0, 3.0]], [[0.0, 0.0]], [(1.0, 1.0)], (10, 10))[0] == 0.0
    rng = np.random.default_rng(0)
    got = poi_from_moments([[-1.0, -1.0]], [[1.0, 1.0]], [(0.0, 0.0)], (10, 10))[0]
    assert got == pytest.approx(mc_poi([(0.0, 0.0)], [-1, -1], [1, 1], (10, 10), 1_000_000, rng), abs=5e-3)


def test_poi_on_empty_model_uses_prior():
    # An unfitted model predicts (offset, signal_variance).
    models = [_shift(gp.condition(np.zeros((0, 1)), [], gp.KernelParams(1.0, (1.0,))), 0.0)] * 2
    assert poi(models, [0.5], [], (np.inf, np.inf)) == pytest.approx(1.0)


def test_poi_matches_monte_carlo_within_three_se():
    rng = np.random.default_rng(42)
    n = 200_000
    failures = 0
    for _ in range(50):
        k = int(rng.integers(0, 8))
        front = pareto_front(rng.normal(0, 1.5, size=(k, 2)))
        mean = rng.normal(0, 1.5, 2)
        std = rng.uniform(0.05, 2.0, 2)
        v = (3.0, 3.0)
        exact = poi_from_moments([mean], [std], front, v)[0]
        est = mc_poi(front, mean, std, v, n, rng)
        se = max(np.sqrt(exact * (1 - exact) / n), 1e-12)
        failures += abs(exact - est) > 3 * se
    # Each check fails by chance with probability ~0.0027.
    assert failures <= 1


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), max_size=10),
       st.tuples(st.floats(-3, 3), st.floats(-3, 3)),
       st.tuples(st.floats(0.01, 3), st.floats(0.01, 3)),
       st.tuples(st.floats(-3, 3), st.floats(-3, 3)))
def test_poi_properties(pts, mean, std, extra):
    v = (4.0, 4.0)
    p = poi_from_moments([mean], [std], pareto_front(pts), v)[0]
    assert 0.0 <= p <= 1.0
    rev = poi_from_moments([mean], [std], pareto_front(list(reversed(pts))), v)[0]
    assert p == pytest.approx(rev, abs=1e-12)
    more = poi_from_moments([mean], [std], pareto_front(pts + [extra]), v)[0]
    assert more <= p + 1e-12


def test_hvpoi_composes_factors():
    rng = np.random.default_rng(1)
    X = rng.random((12, 2))
    models = [gp.condition(X, rng.standard_normal(12), gp.KernelParams(1.0, (0.3, 0.3), 1e-4))
              for _ in range(2)]
    front = pareto_front(rng.normal(0, 1, (5, 2)))
    v = (3.0, 3.0)
    for u in rng.random((20, 2)):
        m = [gp.predict(mod, u)[0] for mod in models]
        assert hvpoi(models, u, front, v) == pytest.approx(hv_increment(front, m, v) * poi(models, u, front, v))


def test_hvpoi_zero_when_mean_dominated_and_rectangle_when_empty():
    base = gp.condition(np.zeros((0, 1)), [], gp.KernelParams(1e-30, (1.0,)))
    dominated = [_shift(base, 2.0), _shift(base, 2.0)]
    assert hvpoi(dominated, [0.5], [(1.0, 1.0)], (10, 10)) == 0.0
    inside = [_shift(base, 1.0), _shift(base, 0.5)]
    assert hvpoi(inside, [0.5], [], (10, 1)) == pytest.approx(4.5)


def one_d_models():
    X = np.array([[0.0], [0.25], [0.5], [0.75], [1.0]])
    eps = np.array([0.0, 0.5, 1.0, 1.5, 2.0])
    err = np.array([2.0, 1.2, 0.3, 1.1, 1.9])
    p = gp.KernelParams(1.0, (0.3,), 1e-6)
    return [gp.condition(X, eps, p), gp.condition(X, err, p)]


def test_maximize_matches_dense_grid():
    models = one_d_models()
    front = pareto_front([(0.2, 1.5), (1.8, 0.9)])
    v = (3.0, 3.0)
    grid = np.linspace(0, 1, 10_000)[:, None]
    best = grid[np.argmax(hvpoi_batch(models, grid, front, v)), 0]
    res = maximize_normalized(models, 1, front, v, AcquisitionConfig(candidate_count=200, rng=RngStream(3)))
    assert abs(res.u[0] - best) <= 0.05
    assert res.value >= res.candidate_best


def test_maximize_deterministic_and_in_domain():
    models = one_d_models()
    domain = HyperparameterDomain((Dimension("b", 0.01, 100, "log"),))
    front = pareto_front([(0.2, 1.5), (1.8, 0.9)])
    cfg = AcquisitionConfig(rng=RngStream(9))
    a = maximize_acquisition(models, domain, front, (3, 3), cfg)
    b = maximize_acquisition(models, domain, front, (3, 3), cfg)
    np.testing.assert_array_equal(a, b)
    assert 0.01 <= a[0] <= 100


def test_fallbacks():
    flat = gp.condition(np.zeros((0, 1)), [], gp.KernelParams(1e-30, (1.0,)))
    models = [_shift(flat, 5.0), _shift(flat, 5.0)]
    # Means dominated, variance tiny: HVPoI and PoI vanish everywhere.
    res = maximize_normalized(models, 1, [(0.0, 0.0)], (10, 10), AcquisitionConfig(rng=RngStream(0)))
    assert res.fallback == "random" and 0 <= res.u[0] <= 1
    wide = gp.condition(np.zeros((0, 1)), [], gp.KernelParams(4.0, (1.0,)))
    models = [_shift(wide, 5.0), _shift(wide, 5.0)]
    res = maximize_normalized(models, 1, [(0.0, 0.0)], (10, 10), AcquisitionConfig(rng=RngStream(0)))
    assert res.fallback == "poi"


def test_config_validation():
    with pytest.raises(ValueError):
        AcquisitionConfig(candidate_count=3, refine_top=5)
    with pytest.raises(ValueError):
        AcquisitionConfig(refine_iters=0)
