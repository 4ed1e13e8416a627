"""Hypervolume-weighted probability of improvement and its maximisation.

Everything here works in the transformed objective space of the surrogate
models: the Pareto front and the anti-ideal point passed in must already be
transformed the same way as the GP targets.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtr
from scipy.stats import qmc

from . import gp
from .core import HyperparameterDomain, RngStream, as_generator, denormalize
from .pareto import cell_bounds, hv_increments

logger = logging.getLogger(__name__)

DEGENERATE_STD = 1e-12


@dataclass(frozen=True)
class AcquisitionConfig:
    candidate_count: int = 1000
    refine_top: int = 5
    refine_iters: int = 50
    rng: RngStream = field(default_factory=lambda: RngStream(0))
    initial_step: float = 0.05

    def __post_init__(self):
        if min(self.candidate_count, self.refine_top, self.refine_iters) < 1:
            raise ValueError("candidate_count, refine_top and refine_iters must be positive")
        if self.refine_top > self.candidate_count:
            raise ValueError("refine_top cannot exceed candidate_count")


def _interval_prob(lower, upper, mean, std):
    """P(lower < X <= upper) for X ~ N(mean, std^2), broadcasting over cells.

    ``std`` at or below DEGENERATE_STD collapses to an indicator on ``mean``.
    """
    degenerate = std <= DEGENERATE_STD
    safe = np.where(degenerate, 1.0, std)
    prob = ndtr((upper - mean) / safe) - ndtr((lower - mean) / safe)
    indicator = ((lower < mean) & (mean <= upper)).astype(float)
    return np.where(degenerate, indicator, prob)


def poi_from_moments(means, stds, front, anti_ideal) -> np.ndarray:
    """Probability that a Gaussian with the given moments lands in a non-dominated cell.

    ``means`` and ``stds`` have shape (n, 2); returns shape (n,).
    """
    means = np.asarray(means, dtype=float).reshape(-1, 2)
    stds = np.asarray(stds, dtype=float).reshape(-1, 2)
    lower, upper = cell_bounds(front, anti_ideal)
    p_eps = _interval_prob(lower[None, :, 0], upper[None, :, 0], means[:, None, 0], stds[:, None, 0])
    p_err = _interval_prob(lower[None, :, 1], upper[None, :, 1], means[:, None, 1], stds[:, None, 1])
    return np.clip(np.sum(p_eps * p_err, axis=1), 0.0, 1.0)


def _moments(models: Sequence[gp.SurrogateModel], U):
    means, stds = [], []
    for model in models:
        m, v = gp.predict(model, U)
        means.append(m)
        stds.append(np.sqrt(v))
    return np.column_stack(means), np.column_stack(stds)


def poi_batch(models, U, front, anti_ideal) -> np.ndarray:
    means, stds = _moments(models, np.atleast_2d(U))
    return poi_from_moments(means, stds, front, anti_ideal)


def hvpoi_batch(models, U, front, anti_ideal, *, return_poi: bool = False):
    means, stds = _moments(models, np.atleast_2d(U))
    p = poi_from_moments(means, stds, front, anti_ideal)
    value = hv_increments(front, means, anti_ideal) * p
    return (value, p) if return_poi else value


def poi(models, u, front, anti_ideal) -> float:
    """PoI at one normalized input ``u``."""
    return float(poi_batch(models, np.asarray(u, dtype=float)[None, :], front, anti_ideal)[0])


def hvpoi(models, u, front, anti_ideal) -> float:
    """Hypervolume increment at the predictive mean times PoI, at one normalized input."""
    return float(hvpoi_batch(models, np.asarray(u, dtype=float)[None, :], front, anti_ideal)[0])


def _pattern_search(f, x0, f0, iters, step):
    """Compass search inside the unit cube; returns the best point seen."""
    x, fx = x0.copy(), f0
    d = len(x)
    directions = np.vstack([np.eye(d), -np.eye(d)])
    for _ in range(iters):
        polls = np.clip(x + step * directions, 0.0, 1.0)
        vals = f(polls)
        k = int(np.argmax(vals))
        if vals[k] > fx:
            x, fx = polls[k], float(vals[k])
        else:
            step *= 0.5
            if step < 1e-7:
                break
    return x, fx


@dataclass(frozen=True)
class AcquisitionResult:
    u: np.ndarray
    value: float
    candidate_best: float
    fallback: str | None = None


def maximize_normalized(models, dim: int, front, anti_ideal, config: AcquisitionConfig) -> AcquisitionResult:
    """Maximise HVPoI over the unit cube; see :func:`maximize_acquisition`."""
    rng = config.rng.generator()
    sampler = qmc.Halton(d=dim, scramble=True, seed=rng)
    cands = sampler.random(config.candidate_count)
    values, pois = hvpoi_batch(models, cands, front, anti_ideal, return_poi=True)
    best_idx = int(np.argmax(values))
    candidate_best = float(values[best_idx])

    if candidate_best <= 0.0:
        if np.max(pois) > 0.0:
            k = int(np.argmax(pois))
            logger.info("acquisition is zero everywhere; falling back to max PoI")
            return AcquisitionResult(cands[k], 0.0, 0.0, "poi")
        logger.info("acquisition and PoI are zero everywhere; exploring at random")
        return AcquisitionResult(rng.random(dim), 0.0, 0.0, "random")

    def f(U):
        return hvpoi_batch(models, U, front, anti_ideal)

    best_u, best_val = cands[best_idx], candidate_best
    # Stable sort keeps the lowest index first among ties.
    order = np.argsort(-values, kind="stable")[: config.refine_top]
    for k in order:
        if values[k] <= 0.0:
            break
        u, val = _pattern_search(f, cands[k], float(values[k]), config.refine_iters, config.initial_step)
        if val > best_val:
            best_u, best_val = u, val
    return AcquisitionResult(best_u, best_val, candidate_best)


def maximize_acquisition(models, domain: HyperparameterDomain, front, anti_ideal,
                         config: AcquisitionConfig | None = None) -> np.ndarray:
    """Next hyperparameter vector: the (approximate) HVPoI maximiser.

    Scores ``candidate_count`` scrambled Halton points, refines the best
    ``refine_top`` with compass search, and denormalizes the winner. If HVPoI
    vanishes everywhere the candidate with the largest PoI is used, and if
    that vanishes too a uniform random point.
    """
    config = config or AcquisitionConfig()
    result = maximize_normalized(models, len(domain), front, anti_ideal, config)
    return denormalize(domain, result.u)


def acquisition_grid(models, front, anti_ideal, points_per_dim: int = 50):
    """HVPoI and PoI on a regular grid over a 2-D unit square, for plotting."""
    g = np.linspace(0.0, 1.0, points_per_dim)
    U = np.array([(a, b) for a in g for b in g])
    values, pois = hvpoi_batch(models, U, front, anti_ideal, return_poi=True)
    return U, values, pois
