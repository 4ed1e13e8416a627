"""Sparse vector technique over binary queries, with an F1 utility oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import as_generator
from ..privacy import svt_noise_split

THRESHOLD = 0.5


@dataclass(frozen=True)
class QueryWorkload:
    """True answers of ``m`` sensitivity-1 binary queries."""

    truth: np.ndarray

    def __post_init__(self):
        truth = np.asarray(self.truth).astype(np.int8)
        if truth.ndim != 1 or not np.isin(truth, (0, 1)).all():
            raise ValueError("truth must be a 0/1 vector")
        truth.setflags(write=False)
        object.__setattr__(self, "truth", truth)

    @property
    def m(self) -> int:
        return len(self.truth)

    @property
    def positives(self) -> int:
        return int(self.truth.sum())


def make_svt_workload(m: int, positives: int, rng) -> QueryWorkload:
    """Workload with exactly ``positives`` ones placed uniformly at random."""
    if not 0 <= positives <= m:
        raise ValueError(f"need 0 <= positives <= m, got positives={positives}, m={m}")
    truth = np.zeros(m, dtype=np.int8)
    truth[as_generator(rng).choice(m, size=positives, replace=False)] = 1
    return QueryWorkload(truth)


def _svt_batch(truth, b, C, orders, rng):
    """Run SVT once per row of ``orders`` (each row a permutation of query indices).

    Returns 0/1 answers of shape (runs, m) in original query positions. All
    per-query noise is drawn up front; queries after the halting point are
    simply not marked.
    """
    if not b > 0:
        raise ValueError(f"noise b must be > 0, got {b}")
    if C < 1 or int(C) != C:
        raise ValueError(f"bound C must be an integer >= 1, got {C}")
    runs, m = orders.shape
    b1, b2 = svt_noise_split(b, C)
    rho = rng.laplace(0.0, b1, size=(runs, 1))
    nu = rng.laplace(0.0, b2, size=(runs, m))
    passed = truth[orders] + nu >= THRESHOLD + rho
    marked = passed & (np.cumsum(passed, axis=1) <= C)
    out = np.zeros((runs, m), dtype=np.int8)
    np.put_along_axis(out, orders, marked.astype(np.int8), axis=1)
    return out


def run_svt(workload: QueryWorkload, b: float, C: int, order, rng) -> np.ndarray:
    """One SVT pass over the queries in ``order``; answers in original positions."""
    order = np.asarray(order, dtype=np.intp)
    if sorted(order.tolist()) != list(range(workload.m)):
        raise ValueError("order must be a permutation of the query indices")
    return _svt_batch(workload.truth, b, C, order[None, :], as_generator(rng))[0]


def f1_score(truth, pred) -> float:
    """F1 between 0/1 vectors; 0 when ``pred`` has no true positives."""
    truth = np.asarray(truth).astype(bool)
    pred = np.asarray(pred).astype(bool)
    if truth.shape != pred.shape:
        raise ValueError(f"length mismatch: {truth.shape} vs {pred.shape}")
    tp = np.sum(truth & pred)
    if tp == 0:
        return 0.0
    return float(2 * tp / (np.sum(truth) + np.sum(pred)))


def _f1_rows(truth, preds):
    truth = truth.astype(bool)
    preds = preds.astype(bool)
    tp = np.sum(preds & truth, axis=1)
    denom = truth.sum() + preds.sum(axis=1)
    return np.where(tp > 0, 2 * tp / np.maximum(denom, 1), 0.0)


def svt_utility_oracle(workload: QueryWorkload, b: float, C: int, R: int, rng):
    """Mean and per-run F1 over ``R`` runs, each with a fresh random query order."""
    if R < 1:
        raise ValueError("need R >= 1")
    rng = as_generator(rng)
    orders = np.argsort(rng.random((R, workload.m)), axis=1)
    preds = _svt_batch(workload.truth, b, C, orders, rng)
    scores = _f1_rows(workload.truth, preds)
    return float(np.mean(scores)), [float(s) for s in scores]
