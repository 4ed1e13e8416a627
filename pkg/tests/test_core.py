import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpareto.core import (
    Dimension,
    DomainError,
    Evaluation,
    HyperparameterDomain,
    LogFormatError,
    ObjectivePoint,
    RngStream,
    denormalize,
    inverse_transform,
    normalize,
    read_log,
    transform_array,
    transform_objectives,
    write_log,
)


def dom(*dims):
    return HyperparameterDomain(tuple(Dimension(f"x{i}", *d) for i, d in enumerate(dims)))


def test_dimension_validation():
    with pytest.raises(ValueError):
        Dimension("a", 1, 1)
    with pytest.raises(ValueError):
        Dimension("a", 0, 1, "log")
    with pytest.raises(ValueError):
        Dimension("a", 0.5, 3, integral=True)
    with pytest.raises(ValueError):
        HyperparameterDomain((Dimension("a", 0, 1), Dimension("a", 0, 2)))


@pytest.mark.parametrize("d, value, expected", [
    ((1, 64), 1, 0.0),
    ((0.1, 10, "log"), 1, 0.5),
    ((8, 512), 260, 0.5),
])
def test_normalize_examples(d, value, expected):
    assert normalize(dom(d), [value])[0] == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("d, u, expected", [
    ((1, 64), 0.0, 1.0),
    ((0.1, 10, "log"), 0.5, 1.0),
    ((1, 400, "linear", True), 0.5, 200.0),  # 200.5 rounds half to even
])
def test_denormalize_examples(d, u, expected):
    assert denormalize(dom(d), [u])[0] == pytest.approx(expected, abs=1e-12)


def test_domain_violations():
    d = dom((1, 64))
    with pytest.raises(DomainError):
        normalize(d, [65])
    with pytest.raises(DomainError):
        denormalize(d, [1.5])
    with pytest.raises(DomainError):
        d.validate([2.5, 1.0])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=3, max_size=3))
def test_normalize_denormalize_roundtrip(u):
    d = dom((-3, 5), (1e-3, 1e3, "log"), (0.1, 16, "log"))
    back = normalize(d, denormalize(d, u))
    np.testing.assert_allclose(back, u, atol=1e-12)


def test_integral_denormalize_stays_in_bounds():
    d = dom((1, 30, "linear", True))
    vals = [denormalize(d, [u])[0] for u in np.linspace(0, 1, 101)]
    assert all(1 <= v <= 30 and v == round(v) for v in vals)


def test_transform_examples():
    assert transform_objectives(ObjectivePoint(1, 0.5)) == pytest.approx((0, 0))
    assert transform_objectives(ObjectivePoint(math.e, 0.5)) == pytest.approx((1, 0))
    assert transform_objectives(ObjectivePoint(1, 0.9))[1] == pytest.approx(2.19722, abs=1e-5)
    assert inverse_transform(0, 0) == pytest.approx((1, 0.5))
    assert inverse_transform(1, 0) == pytest.approx((math.e, 0.5))
    assert inverse_transform(0, 2.19722)[1] == pytest.approx(0.9, abs=1e-6)


def test_transform_clamps_boundaries():
    t_eps, t_err = transform_objectives(ObjectivePoint(0.0, 0.0))
    assert t_eps == pytest.approx(math.log(1e-12))
    assert t_err == pytest.approx(math.log(1e-6) - math.log1p(-1e-6))
    assert math.isfinite(transform_objectives(ObjectivePoint(5.0, 1.0))[1])


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 1e6), st.floats(1e-4, 1 - 1e-4))
def test_transform_roundtrip_and_vectorised(eps, err):
    t = transform_objectives((eps, err))
    back = inverse_transform(*t)
    assert back.epsilon == pytest.approx(eps, rel=1e-9)
    assert back.error == pytest.approx(err, abs=1e-9)
    np.testing.assert_allclose(transform_array([(eps, err)])[0], t, rtol=1e-12, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-6, 1e3), st.floats(1e-6, 1e3), st.floats(1e-3, 0.999), st.floats(1e-3, 0.999))
def test_transform_monotone(e1, e2, r1, r2):
    t1 = transform_objectives((min(e1, e2), min(r1, r2)))
    t2 = transform_objectives((max(e1, e2), max(r1, r2)))
    assert t1[0] <= t2[0] and t1[1] <= t2[1]


def test_evaluation_mean_consistency():
    ev = Evaluation.from_runs({"a": 1.0}, 0.5, [0.6, 0.8], 3, "bo")
    assert ev.error == pytest.approx(0.3, abs=1e-15)
    with pytest.raises(ValueError):
        Evaluation({"a": 1.0}, ObjectivePoint(0.5, 0.5), (0.6, 0.8), 3, "bo")
    with pytest.raises(ValueError):
        Evaluation.from_runs({"a": 1.0}, -1.0, [0.5], 0, "bo")
    with pytest.raises(ValueError):
        Evaluation.from_runs({"a": 1.0}, 1.0, [0.5], 0, "annealing")


def test_log_roundtrip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    evs = [Evaluation.from_runs({"C": float(i), "b": float(rng.random())}, float(rng.random() * 7),
                                list(rng.random(3)), 11, "random", 0.25) for i in range(5)]
    path = tmp_path / "evals.jsonl"
    write_log(path, evs)
    assert read_log(path) == evs
    first = path.read_text().splitlines()[0]
    assert list(json.loads(first)) == ["method", "seed", "lambda", "epsilon", "error",
                                       "per_run_utilities", "wall_time_s"]


def test_read_log_errors_name_the_line(tmp_path):
    path = tmp_path / "evals.jsonl"
    ev = Evaluation.from_runs({"a": 1.0}, 1.0, [0.5], 0, "bo")
    path.write_text(ev.to_json() + "\n{broken\n" + ev.to_json() + "\n")
    with pytest.raises(LogFormatError, match=":2:"):
        read_log(path)
    path.write_text(ev.to_json() + "\n" + ev.to_json()[:20])
    with pytest.raises(LogFormatError):
        read_log(path)
    assert len(read_log(path, drop_partial_tail=True)) == 1


def test_rng_stream_determinism():
    a = RngStream(5, 2).generator(1, 7).random(4)
    b = RngStream(5, 2).generator(1, 7).random(4)
    c = RngStream(5, 3).generator(1, 7).random(4)
    d = RngStream(5, 2).generator(1, 8).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c) and not np.allclose(a, d)
    assert RngStream(1).child(4) == RngStream(1).child(4)
    assert RngStream(1).child(4) != RngStream(1).child(5)
