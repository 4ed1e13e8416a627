"""Dataset loading (CSV and libsvm), preprocessing and a synthetic generator."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources

import numpy as np

from ..core import as_generator


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Features and +-1 labels; the first ``n_train`` rows are the training split."""

    features: np.ndarray
    labels: np.ndarray
    n_train: int

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if X.ndim != 2 or len(X) != len(y):
            raise DatasetError(f"features {X.shape} do not match labels {y.shape}")
        if not 0 < self.n_train <= len(y):
            raise DatasetError(f"n_train={self.n_train} invalid for {len(y)} rows")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_test(self) -> int:
        return len(self.labels) - self.n_train

    @property
    def x_train(self):
        return self.features[: self.n_train]

    @property
    def y_train(self):
        return self.labels[: self.n_train]

    @property
    def x_test(self):
        return self.features[self.n_train:]

    @property
    def y_test(self):
        return self.labels[self.n_train:]


@dataclass(frozen=True)
class Preprocessing:
    """How to turn a raw file into a :class:`Dataset`.

    ``n_train``/``n_test`` of None keep everything (with ``test_fraction``
    deciding the split); otherwise rows are subsampled deterministically
    from ``seed``.
    """

    n_train: int | None = None
    n_test: int | None = None
    test_fraction: float = 0.2
    seed: int = 0
    normalize: bool = True
    shuffle: bool = True


def map_labels(raw) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    values = np.unique(raw)
    if len(values) != 2:
        raise DatasetError(f"expected two label values, found {len(values)}: {values[:10]}")
    return np.where(raw == values[1], 1.0, -1.0)


def normalize_rows(X) -> np.ndarray:
    """Scale all rows by the largest row norm so that max norm is 1."""
    X = np.asarray(X, dtype=float)
    max_norm = np.max(np.linalg.norm(X, axis=1)) if len(X) else 0.0
    return X / max_norm if max_norm > 0 else X.copy()


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if "label" not in header:
            raise DatasetError(f"{path}:1: no 'label' column in header")
        li = header.index("label")
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DatasetError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            labels.append(vals.pop(li))
            rows.append(vals)
    return np.array(rows, dtype=float).reshape(len(rows), len(header) - 1), np.array(labels)


def read_libsvm(path, n_features: int | None = None):
    entries, labels = [], []
    max_index = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                labels.append(float(parts[0]))
                row = {}
                for item in parts[1:]:
                    idx, val = item.split(":")
                    idx = int(idx)
                    if idx < 1:
                        raise ValueError(f"feature index {idx} < 1")
                    row[idx] = float(val)
                    max_index = max(max_index, idx)
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            entries.append(row)
    d = n_features if n_features is not None else max_index
    if max_index > d:
        raise DatasetError(f"{path}: feature index {max_index} exceeds n_features={d}")
    X = np.zeros((len(entries), d))
    for i, row in enumerate(entries):
        for idx, val in row.items():
            X[i, idx - 1] = val
    return X, np.array(labels)


def _split(X, y, prep: Preprocessing) -> Dataset:
    n = len(y)
    rng = np.random.default_rng(prep.seed)
    idx = rng.permutation(n) if prep.shuffle else np.arange(n)
    if prep.n_train is None and prep.n_test is None:
        n_test = int(round(prep.test_fraction * n))
        n_train = n - n_test
    else:
        n_train = prep.n_train if prep.n_train is not None else n - (prep.n_test or 0)
        n_test = prep.n_test if prep.n_test is not None else n - n_train
    if n_train < 1 or n_test < 0 or n_train + n_test > n:
        raise DatasetError(f"cannot take {n_train} train + {n_test} test rows from {n}")
    idx = idx[: n_train + n_test]
    if prep.normalize:
        X = normalize_rows(X)
    return Dataset(X[idx], y[idx], n_train)


def load_dataset(path, format: str = "csv", preprocessing: Preprocessing | None = None,
                 n_features: int | None = None) -> Dataset:
    """Load a CSV (header with a ``label`` column) or libsvm file."""
    prep = preprocessing or Preprocessing()
    if format == "csv":
        X, raw = read_csv(path)
    elif format == "libsvm":
        X, raw = read_libsvm(path, n_features)
    else:
        raise DatasetError(f"unknown dataset format {format!r}")
    if len(raw) == 0:
        raise DatasetError(f"{path}: no data rows")
    return _split(X, map_labels(raw), prep)


def synthetic_separable(n_train: int = 1000, n_test: int = 400, dim: int = 2,
                        separation: float = 0.5, noise: float = 0.15, rng=0) -> Dataset:
    """Two Gaussian blobs at +-``separation`` along a random direction.

    Rows are rescaled to max norm 1, so the classes stay linearly separable
    (through the origin) up to the blob overlap set by ``noise``.
    """
    rng = as_generator(rng)
    n = n_train + n_test
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    X = y[:, None] * separation * direction + noise * rng.standard_normal((n, dim))
    return Dataset(normalize_rows(X), y, n_train)


def bundled_path(name: str):
    """Path to a data file shipped inside the package."""
    return resources.files("dpareto").joinpath("data", name)


def synthetic_binary(n: int = 2400, dim: int = 24, active: float = 0.3, rng=0):
    """Binary features with labels from a noisy sparse linear rule.

    Feature 0 is a constant 1 so models without a bias term can still fit an
    intercept. Returns ``(X, labels)`` with labels in {0, 1}.
    """
    rng = as_generator(rng)
    X = (rng.random((n, dim)) < active).astype(float)
    X[:, 0] = 1.0
    w = rng.standard_normal(dim) * (rng.random(dim) < 0.5)
    w[0] = -active * np.sum(w[1:])
    logits = 3.0 * X @ w
    labels = (rng.random(n) < 1.0 / (1.0 + np.exp(-logits))).astype(int)
    return X, labels


def write_csv(path, X, labels, names=None) -> None:
    names = names or [f"x{j}" for j in range(X.shape[1])]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join([*names, "label"]) + "\n")
        for row, lab in zip(X, labels):
            fh.write(",".join([*(f"{v:g}" for v in row), str(lab)]) + "\n")
