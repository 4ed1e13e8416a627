"""Dominance, Pareto fronts and exact two-objective hypervolume.

All routines minimise both coordinates. They accept any real pairs, so the
same code serves raw ``(epsilon, error)`` points and their transformed
counterparts.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .core import ObjectivePoint

DEFAULT_ANTI_IDEAL = (10.0, 1.0)


class AntiIdealPoint(NamedTuple):
    epsilon_max: float
    error_max: float


class Cell(NamedTuple):
    """Axis-aligned box ``lower < v <= upper``; lower edges may be ``-inf``."""

    lower: tuple[float, float]
    upper: tuple[float, float]

    @property
    def area(self) -> float:
        return (self.upper[0] - self.lower[0]) * (self.upper[1] - self.lower[1])


@dataclass(frozen=True)
class ParetoFront:
    """Non-dominated points, epsilon ascending (so error strictly descending)."""

    points: tuple[ObjectivePoint, ...] = ()

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[ObjectivePoint]:
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]

    def as_array(self) -> np.ndarray:
        return np.array(self.points, dtype=float).reshape(-1, 2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["epsilon", "error"])
        for p in self.points:
            writer.writerow([repr(float(p.epsilon)), repr(float(p.error))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ParetoFront":
        rows = list(csv.DictReader(io.StringIO(text)))
        return pareto_front([(float(r["epsilon"]), float(r["error"])) for r in rows])


def dominates(u, v) -> bool:
    """Weak dominance: ``u`` is no worse than ``v`` in every coordinate."""
    return u[0] <= v[0] and u[1] <= v[1]


def pareto_front(points: Iterable) -> ParetoFront:
    unique = sorted({(float(p[0]), float(p[1])) for p in points})
    kept = []
    best_err = np.inf
    # After an epsilon-ascending sort, a point survives iff its error beats
    # every point before it.
    for eps, err in unique:
        if err < best_err:
            kept.append(ObjectivePoint(eps, err))
            best_err = err
    return ParetoFront(tuple(kept))


def _as_front(front) -> ParetoFront:
    if isinstance(front, ParetoFront):
        return front
    return pareto_front(front)


def _inside(front: ParetoFront, anti_ideal) -> np.ndarray:
    """Front points strictly inside the anti-ideal box; others add zero area."""
    pts = front.as_array()
    e_max, r_max = anti_ideal
    mask = (pts[:, 0] < e_max) & (pts[:, 1] < r_max)
    return pts[mask]


def hypervolume(front, anti_ideal=DEFAULT_ANTI_IDEAL) -> float:
    """Area dominated by ``front`` and bounded above by ``anti_ideal``."""
    pts = _inside(_as_front(front), anti_ideal)
    if len(pts) == 0:
        return 0.0
    e_max, r_max = anti_ideal
    prev_err = np.concatenate([[r_max], pts[:-1, 1]])
    return float(np.sum((e_max - pts[:, 0]) * (prev_err - pts[:, 1])))


def nondominated_cells(front, anti_ideal=DEFAULT_ANTI_IDEAL) -> list[Cell]:
    """Staircase decomposition of the region below ``anti_ideal`` not dominated by ``front``.

    Returns ``n + 1`` cells for ``n`` front points inside the box. Lower
    edges on the error axis are ``-inf``, as is the first cell's epsilon edge.
    """
    pts = _inside(_as_front(front), anti_ideal)
    e_max, r_max = anti_ideal
    lefts = np.concatenate([[-np.inf], pts[:, 0]])
    rights = np.concatenate([pts[:, 0], [e_max]])
    tops = np.concatenate([[r_max], pts[:, 1]])
    return [
        Cell((float(lo), -np.inf), (float(hi), float(top)))
        for lo, hi, top in zip(lefts, rights, tops)
    ]


def cell_bounds(front, anti_ideal=DEFAULT_ANTI_IDEAL) -> tuple[np.ndarray, np.ndarray]:
    """Cells as ``(lower, upper)`` arrays of shape (n_cells, 2)."""
    cells = nondominated_cells(front, anti_ideal)
    return (np.array([c.lower for c in cells], dtype=float),
            np.array([c.upper for c in cells], dtype=float))


def hv_increment(front, v, anti_ideal=DEFAULT_ANTI_IDEAL) -> float:
    """Hypervolume gained by adding ``v`` to ``front``."""
    return float(hv_increments(front, np.asarray(v, dtype=float)[None, :], anti_ideal)[0])


def hv_increments(front, points: np.ndarray, anti_ideal=DEFAULT_ANTI_IDEAL) -> np.ndarray:
    """Vectorised :func:`hv_increment` over an (n, 2) array of candidate points.

    The gain equals the area of ``[v, anti_ideal]`` that falls in the
    non-dominated cells, which avoids rebuilding a front per candidate.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    lower, upper = cell_bounds(front, anti_ideal)
    lo_e = np.maximum(lower[None, :, 0], points[:, None, 0])
    lo_r = np.maximum(lower[None, :, 1], points[:, None, 1])
    width = np.clip(upper[None, :, 0] - lo_e, 0.0, None)
    height = np.clip(upper[None, :, 1] - lo_r, 0.0, None)
    return np.sum(width * height, axis=1)


def front_to_csv(front, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_as_front(front).to_csv())
