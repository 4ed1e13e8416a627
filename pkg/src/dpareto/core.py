"""Shared types: hyperparameter domains, objective points, evaluations, RNG streams.

Objectives are always minimised: ``epsilon`` (privacy loss) and ``error``
(one minus utility). Models work in a transformed space where epsilon is
log-transformed and error is logit-transformed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

EPS_CLAMP = 1e-12
ERR_CLAMP = 1e-6

METHODS = ("bo", "random", "grid", "manual")


class DomainError(ValueError):
    """A hyperparameter value falls outside its domain."""


@dataclass(frozen=True)
class Dimension:
    name: str
    low: float
    high: float
    scale: str = "linear"
    integral: bool = False

    def __post_init__(self):
        if self.scale not in ("linear", "log"):
            raise ValueError(f"{self.name}: scale must be 'linear' or 'log', got {self.scale!r}")
        if not self.low < self.high:
            raise ValueError(f"{self.name}: need low < high, got [{self.low}, {self.high}]")
        if self.scale == "log" and self.low <= 0:
            raise ValueError(f"{self.name}: log-scaled dimension needs low > 0")
        if self.integral and (round(self.low) != self.low or round(self.high) != self.high):
            raise ValueError(f"{self.name}: integral dimension needs integer bounds")

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high


@dataclass(frozen=True)
class HyperparameterDomain:
    """Ordered box of named hyperparameters."""

    dims: tuple[Dimension, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate dimension names in {names}")

    def __len__(self) -> int:
        return len(self.dims)

    def __iter__(self) -> Iterator[Dimension]:
        return iter(self.dims)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dims)

    def __getitem__(self, name: str) -> Dimension:
        for d in self.dims:
            if d.name == name:
                return d
        raise KeyError(name)

    def replace(self, name: str, **changes) -> "HyperparameterDomain":
        """Copy of the domain with one dimension's fields overridden."""
        dims = []
        for d in self.dims:
            if d.name == name:
                fields = dict(name=d.name, low=d.low, high=d.high, scale=d.scale, integral=d.integral)
                fields.update(changes)
                d = Dimension(**fields)
            dims.append(d)
        if name not in self.names:
            raise KeyError(name)
        return HyperparameterDomain(tuple(dims))

    def as_dict(self, values: Sequence[float]) -> dict[str, float]:
        return dict(zip(self.names, (float(v) for v in values)))

    def from_dict(self, mapping: dict) -> np.ndarray:
        try:
            return np.array([float(mapping[n]) for n in self.names])
        except KeyError as exc:
            raise DomainError(f"missing hyperparameter {exc.args[0]!r}") from None

    def validate(self, values: Sequence[float]) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != (len(self),):
            raise DomainError(f"expected {len(self)} values, got shape {values.shape}")
        for d, v in zip(self.dims, values):
            if not d.contains(v):
                raise DomainError(f"{d.name}={v} outside [{d.low}, {d.high}]")
            if d.integral and v != round(v):
                raise DomainError(f"{d.name}={v} must be integer-valued")
        return values


def normalize(domain: HyperparameterDomain, values: Sequence[float]) -> np.ndarray:
    """Map a hyperparameter vector into the unit cube (log dims in log space)."""
    values = np.asarray(values, dtype=float)
    out = np.empty(len(domain))
    for i, (d, v) in enumerate(zip(domain.dims, values)):
        if not d.contains(v):
            raise DomainError(f"{d.name}={v} outside [{d.low}, {d.high}]")
        if d.scale == "log":
            out[i] = (math.log(v) - math.log(d.low)) / (math.log(d.high) - math.log(d.low))
        else:
            out[i] = (v - d.low) / (d.high - d.low)
    return out


def denormalize(domain: HyperparameterDomain, u: Sequence[float]) -> np.ndarray:
    """Inverse of :func:`normalize`; integral dims are rounded half-to-even."""
    u = np.asarray(u, dtype=float)
    if u.shape != (len(domain),):
        raise DomainError(f"expected {len(domain)} coordinates, got shape {u.shape}")
    out = np.empty(len(domain))
    for i, (d, ui) in enumerate(zip(domain.dims, u)):
        if not 0.0 <= ui <= 1.0:
            raise DomainError(f"{d.name}: normalized coordinate {ui} outside [0, 1]")
        if d.scale == "log":
            lo, hi = math.log(d.low), math.log(d.high)
            v = math.exp(lo + ui * (hi - lo))
        else:
            v = d.low + ui * (d.high - d.low)
        if d.integral:
            v = float(round(v))
        out[i] = min(max(v, d.low), d.high)
    return out


class ObjectivePoint(NamedTuple):
    """A point in the (epsilon, error) plane.

    Used both for raw objectives and for their transformed counterparts, so no
    range checks happen here; :class:`Evaluation` validates raw values.
    """

    epsilon: float
    error: float


def _logit(p: float) -> float:
    return math.log(p) - math.log1p(-p)


def _logistic(t: float) -> float:
    if t >= 0:
        return 1.0 / (1.0 + math.exp(-t))
    z = math.exp(t)
    return z / (1.0 + z)


def transform_objectives(point) -> tuple[float, float]:
    """(log epsilon, logit error) of any (epsilon, error) pair, after clamping."""
    eps = max(point[0], EPS_CLAMP)
    err = min(max(point[1], ERR_CLAMP), 1.0 - ERR_CLAMP)
    return math.log(eps), _logit(err)


def inverse_transform(t_eps: float, t_err: float) -> ObjectivePoint:
    return ObjectivePoint(math.exp(t_eps), _logistic(t_err))


def transform_array(points: np.ndarray) -> np.ndarray:
    """Vectorised :func:`transform_objectives` over an (n, 2) array."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    eps = np.log(np.maximum(points[:, 0], EPS_CLAMP))
    err = np.clip(points[:, 1], ERR_CLAMP, 1.0 - ERR_CLAMP)
    return np.column_stack([eps, np.log(err) - np.log1p(-err)])


@dataclass(frozen=True)
class Evaluation:
    """One oracle evaluation and where it came from."""

    values: dict[str, float]
    objectives: ObjectivePoint
    per_run_utilities: tuple[float, ...]
    seed: int
    method: str
    wall_time_s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "per_run_utilities", tuple(float(u) for u in self.per_run_utilities))
        object.__setattr__(self, "objectives", ObjectivePoint(*map(float, self.objectives)))
        eps, err = self.objectives
        if not (eps >= 0):  # also rejects NaN
            raise ValueError(f"epsilon must be >= 0, got {eps}")
        if not (0.0 <= err <= 1.0):
            raise ValueError(f"error must lie in [0, 1], got {err}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.wall_time_s < 0:
            raise ValueError("wall_time_s must be >= 0")
        runs = self.per_run_utilities
        if runs:
            if any(not 0.0 <= u <= 1.0 for u in runs):
                raise ValueError("per-run utilities must lie in [0, 1]")
            if abs(err - (1.0 - math.fsum(runs) / len(runs))) > 1e-12:
                raise ValueError("error is not 1 - mean(per_run_utilities)")

    @classmethod
    def from_runs(cls, values, epsilon, per_run_utilities, seed, method, wall_time_s=0.0):
        runs = [float(u) for u in per_run_utilities]
        if not runs:
            raise ValueError("need at least one utility run")
        error = 1.0 - math.fsum(runs) / len(runs)
        error = min(max(error, 0.0), 1.0)
        return cls(dict(values), ObjectivePoint(float(epsilon), error), tuple(runs), seed, method, wall_time_s)

    @property
    def epsilon(self) -> float:
        return self.objectives.epsilon

    @property
    def error(self) -> float:
        return self.objectives.error

    def to_json(self) -> str:
        # Python's float repr is the shortest string that round-trips exactly
        # (up to 17 significant digits), so logs reload bit-for-bit.
        record = {
            "method": self.method,
            "seed": self.seed,
            "lambda": self.values,
            "epsilon": self.epsilon,
            "error": self.error,
            "per_run_utilities": list(self.per_run_utilities),
            "wall_time_s": self.wall_time_s,
        }
        return json.dumps(record, allow_nan=False)

    @classmethod
    def from_json(cls, line: str) -> "Evaluation":
        rec = json.loads(line)
        return cls(
            values={k: float(v) for k, v in rec["lambda"].items()},
            objectives=ObjectivePoint(rec["epsilon"], rec["error"]),
            per_run_utilities=tuple(rec.get("per_run_utilities", ())),
            seed=int(rec["seed"]),
            method=rec["method"],
            wall_time_s=float(rec.get("wall_time_s", 0.0)),
        )


class LogFormatError(ValueError):
    def __init__(self, path, lineno, reason):
        super().__init__(f"{path}:{lineno}: {reason}")
        self.path = path
        self.lineno = lineno


def read_log(path, *, drop_partial_tail: bool = False) -> list[Evaluation]:
    """Read an evaluation log (one JSON object per line).

    With ``drop_partial_tail`` an unterminated, unparseable final line (an
    interrupted write) is ignored instead of raising.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    lines = text.split("\n")
    evals = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            evals.append(Evaluation.from_json(line))
        except (ValueError, KeyError, TypeError) as exc:
            is_tail = lineno == len(lines) and not text.endswith("\n")
            if drop_partial_tail and is_tail:
                break
            raise LogFormatError(path, lineno, str(exc)) from None
    return evals


def write_log(path, evaluations: Iterable[Evaluation], mode: str = "w") -> None:
    with open(path, mode, encoding="utf-8") as fh:
        for ev in evaluations:
            fh.write(ev.to_json() + "\n")


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream keyed by ``(seed, stream_id)``.

    ``generator(*keys)`` derives independent child generators, so each
    stochastic step can own a stream without threading state around.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.stream_id < 0:
            raise ValueError("seed and stream_id must be non-negative")

    def generator(self, *keys: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *keys))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, key: int) -> "RngStream":
        # Fold the key into the stream id deterministically.
        sid = int(np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, key)).generate_state(1, np.uint64)[0])
        return RngStream(self.seed, sid)


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an RngStream or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)
