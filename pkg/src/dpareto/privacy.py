"""Privacy oracles: closed-form SVT, analytic Gaussian mechanism, and an RDP
accountant for the Gaussian mechanism under subsampling without replacement.

All Gaussian routines use a unit-sensitivity convention: callers pass the
noise multiplier (noise standard deviation divided by sensitivity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln, log_ndtr, logsumexp, ndtr

DEFAULT_ORDERS = tuple(range(2, 257))
MAX_ORDER = 256
EPS_TOL = 1e-9
EPS_BRACKET_MAX = 1e6


class PrivacyDomainError(ValueError):
    """Arguments outside an oracle's domain."""


@dataclass(frozen=True)
class RdpCurve:
    orders: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        orders = tuple(float(a) for a in self.orders)
        values = tuple(float(v) for v in self.values)
        if len(orders) != len(values):
            raise ValueError("orders and values differ in length")
        if any(a <= 1 for a in orders) or any(b <= a for a, b in zip(orders, orders[1:])):
            raise ValueError("orders must be ascending and > 1")
        if any(not v >= 0 for v in values):
            raise ValueError("RDP values must be non-negative")
        object.__setattr__(self, "orders", orders)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.orders)


@dataclass(frozen=True)
class DpGuarantee:
    epsilon: float
    delta: float


def svt_epsilon(b: float, C: float) -> float:
    """Pure-DP epsilon of the sparse vector technique with noise ``b`` and bound ``C``."""
    _check_svt(b, C)
    c2 = 2.0 * C
    return (1.0 + c2 ** (1.0 / 3.0)) * (1.0 + c2 ** (2.0 / 3.0)) / b


def svt_noise_split(b: float, C: float) -> tuple[float, float]:
    """Threshold noise ``b1`` and per-query noise ``b2`` with ``b1 + b2 = b``."""
    _check_svt(b, C)
    b1 = b / (1.0 + (2.0 * C) ** (1.0 / 3.0))
    return b1, b - b1


def svt_epsilon_decomposed(b: float, C: float) -> tuple[float, float]:
    """Threshold and query parts ``(1/b1, 2C/b2)`` of the SVT epsilon."""
    b1, b2 = svt_noise_split(b, C)
    return 1.0 / b1, 2.0 * C / b2


def _check_svt(b, C):
    if not b > 0:
        raise PrivacyDomainError(f"SVT noise b must be > 0, got {b}")
    if not C >= 1:
        raise PrivacyDomainError(f"SVT bound C must be >= 1, got {C}")


def gaussian_delta(epsilon: float, sigma: float, sensitivity: float) -> float:
    """Exact delta of the Gaussian mechanism at ``epsilon``.

    delta(eps) = Phi(D/(2s) - eps*s/D) - exp(eps) * Phi(-D/(2s) - eps*s/D).
    The second term is evaluated in log space so large ``epsilon`` is safe.
    """
    a = sensitivity / (2.0 * sigma)
    c = epsilon * sigma / sensitivity
    first = ndtr(a - c)
    second = math.exp(epsilon + log_ndtr(-a - c))
    return float(first - second)


def gaussian_mechanism_epsilon(sigma: float, sensitivity: float, delta: float) -> float:
    """Smallest epsilon with ``gaussian_delta(epsilon) <= delta``, by bisection."""
    if not (sigma > 0 and sensitivity > 0):
        raise PrivacyDomainError("sigma and sensitivity must be > 0")
    if not 0 < delta < 1:
        raise PrivacyDomainError(f"delta must lie in (0, 1), got {delta}")
    if gaussian_delta(0.0, sigma, sensitivity) <= delta:
        return 0.0
    lo, hi = 0.0, 1.0
    while gaussian_delta(hi, sigma, sensitivity) > delta:
        lo, hi = hi, 2.0 * hi
        if hi > EPS_BRACKET_MAX:
            raise OverflowError(f"no epsilon below {EPS_BRACKET_MAX:g} reaches delta={delta:g}")
    # Bisect well past EPS_TOL; delta(eps) can be steep, and the upper end
    # of the bracket is always a valid (conservative) answer.
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if gaussian_delta(mid, sigma, sensitivity) > delta:
            lo = mid
        else:
            hi = mid
    return hi


def rdp_gaussian(order: float, noise_multiplier: float) -> float:
    if not order > 1:
        raise PrivacyDomainError(f"RDP order must be > 1, got {order}")
    if not noise_multiplier > 0:
        raise PrivacyDomainError("noise multiplier must be > 0")
    return order / (2.0 * noise_multiplier**2)


def _log_comb(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def _series_bounds(max_order: int, noise_multiplier: float, gamma: float) -> np.ndarray:
    """Raw series bound for orders 2..max_order (index 0 is order 2)."""
    log_g = math.log(gamma)
    eps2 = rdp_gaussian(2, noise_multiplier)
    # min{4(e^eps2 - 1), 2 e^eps2} in log space
    log_second = min(math.log(4.0) + eps2 + math.log(-math.expm1(-eps2)), math.log(2.0) + eps2)
    alphas = np.arange(2, max_order + 1, dtype=float)[:, None]
    j = np.arange(3, max_order + 1, dtype=float)[None, :]
    with np.errstate(invalid="ignore"):
        higher = _log_comb(alphas, j) + j * log_g + math.log(2.0) + (j - 1) * j / (2.0 * noise_multiplier**2)
    higher = np.where(j <= alphas, higher, -np.inf)
    terms = np.hstack([np.zeros_like(alphas), _log_comb(alphas, 2) + 2 * log_g + log_second, higher])
    return logsumexp(terms, axis=1) / (alphas[:, 0] - 1)


def _subsampled_table(max_order: int, noise_multiplier: float, gamma: float) -> np.ndarray:
    bound = _series_bounds(max_order, noise_multiplier, gamma)
    bound = np.minimum(bound, np.arange(2, max_order + 1) / (2.0 * noise_multiplier**2))
    # Renyi divergence is non-decreasing in the order, so a bound at any
    # higher order also holds at a lower one.
    return np.minimum.accumulate(bound[::-1])[::-1]


def _check_subsampled(order, noise_multiplier, gamma):
    if int(order) != order or order < 2:
        raise PrivacyDomainError(f"order must be an integer >= 2, got {order}")
    if not noise_multiplier > 0:
        raise PrivacyDomainError("noise multiplier must be > 0")
    if not 0.0 <= gamma <= 1.0:
        raise PrivacyDomainError(f"sampling fraction must lie in [0, 1], got {gamma}")


def rdp_subsampled_gaussian(order: int, noise_multiplier: float, gamma: float) -> float:
    """RDP of the Gaussian mechanism on a fixed-size subsample drawn without replacement.

    Integer ``order`` >= 2 and sampling fraction ``gamma = m / n``. The series
    bound is accumulated in log space, capped at the plain Gaussian RDP
    (subsampling never weakens the guarantee) and then replaced by its
    minimum over all orders from ``order`` up to ``max(order, 256)``. The
    last step makes the result non-decreasing in the order.
    """
    _check_subsampled(order, noise_multiplier, gamma)
    if gamma == 0.0:
        return 0.0
    alpha = int(order)
    return float(_subsampled_table(max(alpha, MAX_ORDER), noise_multiplier, gamma)[alpha - 2])


def rdp_subsampled_gaussian_curve(noise_multiplier: float, gamma: float,
                                  orders: Sequence[int] = DEFAULT_ORDERS) -> RdpCurve:
    """Same values as :func:`rdp_subsampled_gaussian` for many orders at once."""
    for a in orders:
        _check_subsampled(a, noise_multiplier, gamma)
    if gamma == 0.0:
        return RdpCurve(tuple(orders), (0.0,) * len(orders))
    top = max(max(orders), MAX_ORDER)
    table = _subsampled_table(top, noise_multiplier, gamma)
    values = []
    for a in orders:
        # orders above MAX_ORDER take the minimum up to themselves only
        row = table if a <= MAX_ORDER else _subsampled_table(int(a), noise_multiplier, gamma)
        values.append(float(row[int(a) - 2]))
    return RdpCurve(tuple(orders), tuple(values))


def rdp_curve(fn, orders: Sequence[float] = DEFAULT_ORDERS) -> RdpCurve:
    return RdpCurve(tuple(orders), tuple(fn(a) for a in orders))


def compose_rdp(per_step: RdpCurve, steps: int) -> RdpCurve:
    if steps < 1 or int(steps) != steps:
        raise PrivacyDomainError(f"steps must be a positive integer, got {steps}")
    return RdpCurve(per_step.orders, tuple(v * steps for v in per_step.values))


def rdp_to_dp(curve: RdpCurve, delta: float) -> tuple[DpGuarantee, float]:
    """Convert an RDP curve to (epsilon, delta)-DP; also returns the optimal order."""
    if len(curve) == 0:
        raise ValueError("empty RDP curve")
    if not 0 < delta < 1:
        raise PrivacyDomainError(f"delta must lie in (0, 1), got {delta}")
    orders = np.asarray(curve.orders)
    eps = np.asarray(curve.values) + math.log(1.0 / delta) / (orders - 1.0)
    k = int(np.argmin(eps))
    return DpGuarantee(float(eps[k]), delta), float(orders[k])


def dpsgd_steps(m: int, T: int, n: int) -> int:
    """Number of composed mechanism invocations charged for T epochs."""
    return T * math.ceil(n / m)


def dpsgd_rdp(m: int, T: int, sigma: float, n: int, orders: Sequence[int] = DEFAULT_ORDERS) -> RdpCurve:
    """Composed RDP curve of noisy clipped-gradient training.

    ``sigma`` is the noise multiplier: the gradient noise has standard
    deviation ``2 L sigma / m`` against the replace-one sensitivity ``2 L / m``
    of the clipped mean, so the clipping norm cancels.
    """
    if not (1 <= m <= n):
        raise PrivacyDomainError(f"need 1 <= m <= n, got m={m}, n={n}")
    if T < 1:
        raise PrivacyDomainError(f"need T >= 1, got {T}")
    gamma = m / n
    per_step = rdp_subsampled_gaussian_curve(sigma, gamma, orders)
    return compose_rdp(per_step, dpsgd_steps(m, T, n))


def dpsgd_privacy_oracle(m: int, T: int, sigma: float, n: int, delta: float) -> float:
    """Epsilon at ``delta`` for T epochs of lot size m with noise multiplier sigma."""
    guarantee, _ = rdp_to_dp(dpsgd_rdp(int(m), int(T), sigma, int(n)), delta)
    return guarantee.epsilon


def logreg_output_sensitivity(n: int, reg: float) -> float:
    """L2 sensitivity of the projected-SGD logistic regression weights.

    2 / (n * reg) for unit-norm features and a 1-Lipschitz loss.
    """
    if not (n >= 1 and reg > 0):
        raise PrivacyDomainError("need n >= 1 and reg > 0")
    return 2.0 / (n * reg)


def output_perturbation_epsilon(sigma: float, reg: float, n: int, delta: float = 1e-6) -> float:
    """Epsilon of releasing the trained weights plus N(0, sigma^2 I)."""
    return gaussian_mechanism_epsilon(sigma, logreg_output_sensitivity(n, reg), delta)
