"""Noisy clipped-gradient trainers for linear models, plus output perturbation.

Labels are in {-1, +1}; models are weight vectors without a bias term, and
predictions are ``sign(x @ w)`` with ties going to +1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..core import as_generator
from ..privacy import logreg_output_sensitivity
from .datasets import Dataset

ADAM_KAPPA = 1e-8
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainingHyperparams:
    """Epochs, lot size, learning rate, noise variance and clipping norm.

    ``noise_variance`` is the variance of the noise multiplier; zero disables
    noise and an infinite ``clip_norm`` disables clipping (useful in tests).
    """

    epochs: int
    lot_size: int
    learning_rate: float
    noise_variance: float
    clip_norm: float

    def __post_init__(self):
        if self.epochs < 1 or int(self.epochs) != self.epochs:
            raise ValueError(f"epochs must be a positive integer, got {self.epochs}")
        if self.lot_size < 1 or int(self.lot_size) != self.lot_size:
            raise ValueError(f"lot_size must be a positive integer, got {self.lot_size}")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not self.noise_variance >= 0:
            raise ValueError("noise_variance must be >= 0")
        if not self.clip_norm > 0:
            raise ValueError("clip_norm must be > 0")
        object.__setattr__(self, "epochs", int(self.epochs))
        object.__setattr__(self, "lot_size", int(self.lot_size))

    @property
    def noise_multiplier(self) -> float:
        return math.sqrt(self.noise_variance)

    @classmethod
    def from_dict(cls, values: dict) -> "TrainingHyperparams":
        return cls(
            epochs=int(round(values["epochs"])),
            lot_size=int(round(values["lot_size"])),
            learning_rate=float(values["learning_rate"]),
            noise_variance=float(values["noise_variance"]),
            clip_norm=float(values["clip_norm"]),
        )


def clip(v, L: float) -> np.ndarray:
    """Scale ``v`` down to norm ``L`` if it is longer; identity otherwise."""
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm <= L:
        return v.copy()
    return (L / norm) * v


def clip_rows(G, L: float) -> np.ndarray:
    norms = np.linalg.norm(G, axis=1, keepdims=True)
    scale = np.minimum(1.0, L / np.maximum(norms, 1e-300))
    return G * scale


def per_example_grads(X, y, w, loss: str) -> np.ndarray:
    margins = y * (X @ w)
    if loss == "logistic":
        # d/dw log(1 + exp(-y x.w)) = -y x * sigmoid(-y x.w)
        coef = -y * np.exp(-np.logaddexp(0.0, margins))
    elif loss == "hinge":
        # Subgradient 0 at the margin boundary.
        coef = np.where(margins < 1.0, -y, 0.0)
    else:
        raise ValueError(f"unknown loss {loss!r}")
    return coef[:, None] * X


def _noisy_gradients(data: Dataset, hp: TrainingHyperparams, loss: str, rng, monitor):
    """Closure returning a fresh noisy clipped lot gradient at given weights."""
    X, y = data.x_train, data.y_train
    n = len(y)
    if hp.lot_size > n:
        raise ValueError(f"lot size {hp.lot_size} exceeds {n} training points")
    noise_std = 2.0 * hp.clip_norm * hp.noise_multiplier / hp.lot_size

    def gradient(w):
        lot = rng.choice(n, size=hp.lot_size, replace=False)
        G = clip_rows(per_example_grads(X[lot], y[lot], w, loss), hp.clip_norm)
        noise = rng.standard_normal(len(w)) * noise_std if noise_std > 0 else np.zeros(len(w))
        if monitor is not None:
            monitor(G, noise)
        g = G.mean(axis=0) + noise
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient (norm {np.linalg.norm(w):.3g} weights)")
        return g

    return gradient


def dp_sgd_train(data: Dataset, hp: TrainingHyperparams, loss: str = "logistic", rng=None,
                 monitor: Callable | None = None) -> np.ndarray:
    """Noisy clipped mini-batch SGD from zero weights.

    Runs ``epochs * floor(n / lot_size)`` steps; each samples a lot without
    replacement, clips per-example gradients to ``clip_norm`` and adds
    Gaussian noise of std ``2 * clip_norm * sqrt(noise_variance) / lot_size``.
    ``monitor(clipped_grads, noise)`` is called every step if given.
    """
    rng = as_generator(0 if rng is None else rng)
    gradient = _noisy_gradients(data, hp, loss, rng, monitor)
    w = np.zeros(data.dim)
    steps = hp.epochs * (data.n_train // hp.lot_size)
    for _ in range(steps):
        w = w - hp.learning_rate * gradient(w)
    return w


def dp_adam_train(data: Dataset, hp: TrainingHyperparams, loss: str = "logistic", rng=None,
                  monitor: Callable | None = None) -> np.ndarray:
    """Adam driven by the same noisy clipped lot gradients as :func:`dp_sgd_train`."""
    rng = as_generator(0 if rng is None else rng)
    gradient = _noisy_gradients(data, hp, loss, rng, monitor)
    w = np.zeros(data.dim)
    mu = np.zeros(data.dim)
    nu = np.zeros(data.dim)
    steps = hp.epochs * (data.n_train // hp.lot_size)
    for i in range(1, steps + 1):
        g = gradient(w)
        mu = ADAM_BETA1 * mu + (1 - ADAM_BETA1) * g
        nu = ADAM_BETA2 * nu + (1 - ADAM_BETA2) * g * g
        mu_hat = mu / (1 - ADAM_BETA1**i)
        nu_hat = nu / (1 - ADAM_BETA2**i)
        w = w - hp.learning_rate * mu_hat / (np.sqrt(nu_hat) + ADAM_KAPPA)
    return w


def projected_sgd_logreg(data: Dataset, reg: float, epochs: int = 10, rng=None) -> np.ndarray:
    """L2-regularised logistic regression by projected SGD with batch size 1.

    Step size min(1/beta, 1/(reg * t)) with smoothness beta = 1/4 + reg;
    iterates are projected onto the ball of radius 1/reg.
    """
    rng = as_generator(0 if rng is None else rng)
    X, y = data.x_train, data.y_train
    n = len(y)
    radius = 1.0 / reg
    beta = 0.25 + reg
    w = np.zeros(data.dim)
    t = 0
    for _ in range(epochs):
        for j in rng.permutation(n):
            t += 1
            eta = min(1.0 / beta, 1.0 / (reg * t))
            margin = y[j] * (X[j] @ w)
            grad = -y[j] * X[j] * math.exp(-np.logaddexp(0.0, margin)) + reg * w
            w = w - eta * grad
            norm = np.linalg.norm(w)
            if norm > radius:
                w *= radius / norm
    return w


def output_perturbed_logreg_train(data: Dataset, reg: float, sigma: float, rng=None,
                                  epochs: int = 10) -> np.ndarray:
    """Projected-SGD logistic regression released with N(0, sigma^2 I) added.

    The matching privacy oracle is
    :func:`dpareto.privacy.output_perturbation_epsilon` with the sensitivity
    from :func:`dpareto.privacy.logreg_output_sensitivity`.
    """
    if not (reg > 0 and sigma >= 0):
        raise ValueError("need reg > 0 and sigma >= 0")
    rng = as_generator(0 if rng is None else rng)
    w = projected_sgd_logreg(data, reg, epochs, rng)
    return w + sigma * rng.standard_normal(len(w))


def sensitivity_for(data: Dataset, reg: float) -> float:
    return logreg_output_sensitivity(data.n_train, reg)


def predict_labels(X, w) -> np.ndarray:
    return np.where(np.asarray(X) @ w >= 0.0, 1.0, -1.0)


def accuracy(X, y, w) -> float:
    return float(np.mean(predict_labels(X, w) == y))


def accuracy_utility_oracle(trainer: Callable, data: Dataset, hp, R: int, rng):
    """Mean and per-run test accuracy over ``R`` independently seeded trainings.

    ``trainer(data, hp, rng)`` must return a weight vector.
    """
    if R < 1:
        raise ValueError("need R >= 1")
    rng = as_generator(rng)
    seeds = rng.integers(0, 2**63, size=R)
    runs = [accuracy(data.x_test, data.y_test, trainer(data, hp, np.random.default_rng(s)))
            for s in seeds]
    return float(np.mean(runs)), runs
