"""Exact Gaussian-process regression with an ARD Matérn 5/2 kernel.

Inputs live in the unit cube. Targets are mean-centred before fitting and the
offset is added back at prediction time. Kernel hyperparameters are fitted by
maximising the log marginal likelihood with analytic gradients, optimised in
log space from several starting points.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg, optimize

logger = logging.getLogger(__name__)

SQRT5 = np.sqrt(5.0)
NOISE_FLOOR = 1e-6
JITTERS = tuple(10.0 ** k for k in range(-10, -3))  # 1e-10 ... 1e-4


class ConditioningError(np.linalg.LinAlgError):
    """Cholesky failed even after the largest jitter."""


@dataclass(frozen=True)
class KernelParams:
    signal_variance: float
    lengthscales: tuple[float, ...]
    noise_variance: float = NOISE_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "lengthscales", tuple(float(l) for l in np.atleast_1d(self.lengthscales)))
        if self.signal_variance <= 0 or any(l <= 0 for l in self.lengthscales):
            raise ValueError("signal variance and lengthscales must be positive")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be non-negative")

    def to_log_vector(self) -> np.ndarray:
        return np.log([self.signal_variance, *self.lengthscales, self.noise_variance])

    @classmethod
    def from_log_vector(cls, theta) -> "KernelParams":
        theta = np.exp(np.asarray(theta, dtype=float))
        return cls(float(theta[0]), tuple(theta[1:-1]), float(theta[-1]))

    def to_json(self) -> str:
        return json.dumps({
            "signal_variance": self.signal_variance,
            "lengthscales": list(self.lengthscales),
            "noise_variance": self.noise_variance,
        })


@dataclass(frozen=True)
class GPConfig:
    n_restarts: int = 8
    seed: int = 0
    lengthscale_bounds: tuple[float, float] = (1e-2, 10.0)
    signal_variance_bounds: tuple[float, float] = (1e-4, 1e4)
    noise_variance_bounds: tuple[float, float] = (NOISE_FLOOR, 1.0)
    maxiter: int = 200
    ftol: float = 1e-7


def _scaled_sqdist(X1, X2, lengthscales):
    A = X1 / lengthscales
    B = X2 / lengthscales
    d2 = np.sum(A * A, 1)[:, None] + np.sum(B * B, 1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d2, 0.0)


def _matern_from_r(r):
    return (1.0 + SQRT5 * r + (5.0 / 3.0) * r * r) * np.exp(-SQRT5 * r)


def kernel_matrix(X1, X2, params: KernelParams) -> np.ndarray:
    """Cross-covariance matrix between two sets of inputs (no noise term)."""
    X1 = np.atleast_2d(X1)
    X2 = np.atleast_2d(X2)
    r = np.sqrt(_scaled_sqdist(X1, X2, np.asarray(params.lengthscales)))
    return params.signal_variance * _matern_from_r(r)


def matern52(x, x_prime, params: KernelParams) -> float:
    x = np.asarray(x, dtype=float)
    x_prime = np.asarray(x_prime, dtype=float)
    if x.shape != (len(params.lengthscales),) or x_prime.shape != x.shape:
        raise ValueError("input dimension does not match lengthscales")
    r = np.sqrt(np.sum(((x - x_prime) / np.asarray(params.lengthscales)) ** 2))
    return float(params.signal_variance * _matern_from_r(r))


@dataclass(frozen=True)
class SurrogateModel:
    inputs: np.ndarray
    targets: np.ndarray
    params: KernelParams
    offset: float = 0.0
    factor: np.ndarray = field(default=None, repr=False)
    alpha: np.ndarray = field(default=None, repr=False)
    jitter: float = 0.0

    @property
    def n(self) -> int:
        return len(self.targets)


def _cholesky(K):
    """Lower Cholesky factor, escalating diagonal jitter on failure."""
    try:
        return np.linalg.cholesky(K), 0.0
    except np.linalg.LinAlgError:
        pass
    scale = max(float(np.mean(np.diag(K))), 1.0)
    for jitter in JITTERS:
        try:
            L = np.linalg.cholesky(K + jitter * scale * np.eye(len(K)))
            logger.debug("cholesky needed jitter %.0e", jitter)
            return L, jitter * scale
        except np.linalg.LinAlgError:
            continue
    raise ConditioningError("kernel matrix not positive definite after jitter 1e-4")


def condition(X, y, params: KernelParams) -> SurrogateModel:
    """Build the posterior for fixed kernel parameters."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(X) != len(y):
        raise ValueError(f"{len(X)} inputs but {len(y)} targets")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    if len(y) == 0:
        return SurrogateModel(X.reshape(0, len(params.lengthscales)), y, params)
    offset = float(np.mean(y))
    yc = y - offset
    K = kernel_matrix(X, X, params) + params.noise_variance * np.eye(len(y))
    L, jitter = _cholesky(K)
    alpha = linalg.cho_solve((L, True), yc)
    return SurrogateModel(X, y, params, offset, L, alpha, jitter)


def predict(model: SurrogateModel, x):
    """Posterior mean and variance at one point ``(d,)`` or many ``(n, d)``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    Xs = np.atleast_2d(x)
    sv = model.params.signal_variance
    if model.n == 0:
        mean = np.full(len(Xs), model.offset)
        var = np.full(len(Xs), sv)
    else:
        Ks = kernel_matrix(Xs, model.inputs, model.params)
        mean = model.offset + Ks @ model.alpha
        V = linalg.solve_triangular(model.factor, Ks.T, lower=True)
        var = np.maximum(sv - np.sum(V * V, axis=0), 0.0)
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def log_marginal_likelihood(model: SurrogateModel) -> float:
    n = model.n
    if n == 0:
        return 0.0
    yc = model.targets - model.offset
    return float(-0.5 * yc @ model.alpha - np.sum(np.log(np.diag(model.factor))) - 0.5 * n * np.log(2 * np.pi))


def pairwise_sqdiffs(X) -> np.ndarray:
    """Per-dimension squared differences, shape (d, n, n)."""
    X = np.atleast_2d(X)
    return (X.T[:, :, None] - X.T[:, None, :]) ** 2


def mll_and_grad(theta, X, yc, sqdiffs=None):
    """Log marginal likelihood and its gradient w.r.t. log parameters.

    ``theta = log([signal_variance, *lengthscales, noise_variance])`` and
    ``yc`` are already-centred targets. ``sqdiffs`` may carry a cached
    :func:`pairwise_sqdiffs` of ``X``.
    """
    theta = np.asarray(theta, dtype=float)
    sv = np.exp(theta[0])
    inv_ls2 = np.exp(-2.0 * theta[1:-1])
    noise = np.exp(theta[-1])
    if sqdiffs is None:
        sqdiffs = pairwise_sqdiffs(X)
    n = len(yc)
    r = np.sqrt(np.tensordot(inv_ls2, sqdiffs, axes=1))
    e = np.exp(-SQRT5 * r)
    Kf = sv * (1.0 + SQRT5 * r + (5.0 / 3.0) * r * r) * e
    K = Kf.copy()
    K.flat[:: n + 1] += noise
    L, _ = _cholesky(K)
    alpha = linalg.cho_solve((L, True), yc)
    mll = -0.5 * yc @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * np.log(2 * np.pi)
    Kinv, info = linalg.lapack.dpotri(L, lower=1)
    if info != 0:
        raise ConditioningError(f"dpotri failed with info={info}")
    # dpotri fills the lower triangle; the upper one is still L's zeros.
    Kinv = Kinv + Kinv.T
    Kinv.flat[:: n + 1] *= 0.5
    W = np.outer(alpha, alpha) - Kinv
    grad = np.empty(len(theta))
    grad[0] = 0.5 * np.vdot(W, Kf)
    WC = W * (sv * (5.0 / 3.0) * (1.0 + SQRT5 * r) * e)
    grad[1:-1] = 0.5 * inv_ls2 * np.tensordot(sqdiffs, WC, axes=([1, 2], [0, 1]))
    grad[-1] = 0.5 * noise * np.trace(W)
    return float(mll), grad


def _log_bounds(config: GPConfig, d: int) -> list[tuple[float, float]]:
    sv = tuple(np.log(config.signal_variance_bounds))
    ls = tuple(np.log(config.lengthscale_bounds))
    nv = tuple(np.log(config.noise_variance_bounds))
    return [sv] + [ls] * d + [nv]


def fit(X, y, config: GPConfig | None = None) -> SurrogateModel:
    """Fit kernel parameters by multi-start maximisation of the marginal likelihood."""
    config = config or GPConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(X) != len(y) or len(y) == 0:
        raise ValueError("fit needs at least one input and matching targets")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    n, d = X.shape
    yc = y - np.mean(y)
    bounds = _log_bounds(config, d)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])

    var_y = float(np.var(yc)) if n > 1 else 1.0
    start0 = np.log(np.concatenate([
        [np.clip(var_y, *config.signal_variance_bounds)],
        np.full(d, np.clip(0.3, *config.lengthscale_bounds)),
        [np.clip(1e-2 * max(var_y, 1e-12), *config.noise_variance_bounds)],
    ]))
    rng = np.random.default_rng(config.seed)
    starts = [start0] + [rng.uniform(lo, hi) for _ in range(config.n_restarts - 1)]

    sqdiffs = pairwise_sqdiffs(X)

    def objective(theta):
        try:
            mll, grad = mll_and_grad(theta, X, yc, sqdiffs)
        except ConditioningError:
            return 1e25, np.zeros_like(theta)
        return -mll, -grad

    best_theta, best_val = start0, np.inf
    for s in starts:
        res = optimize.minimize(objective, s, jac=True, method="L-BFGS-B", bounds=bounds,
                                options={"maxiter": config.maxiter, "ftol": config.ftol})
        if np.isfinite(res.fun) and res.fun < best_val:
            best_val, best_theta = res.fun, np.clip(res.x, lo, hi)
    return condition(X, y, KernelParams.from_log_vector(best_theta))


def with_params(model: SurrogateModel, **changes) -> SurrogateModel:
    """Re-condition the same data on modified kernel parameters."""
    return condition(model.inputs, model.targets, replace(model.params, **changes))
