"""Experiment configuration files (YAML) and their translation into problems."""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .acquisition import AcquisitionConfig
from .core import Dimension, HyperparameterDomain
from .gp import GPConfig
from .mechanisms import datasets
from .pareto import AntiIdealPoint
from . import problems

METHODS = ("bo", "random", "grid")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class ExperimentConfig:
    problem: str
    method: str = "bo"
    seed: int = 0
    delta: float | None = None
    anti_ideal: tuple[float, float] = (10.0, 1.0)
    repetitions: int | None = None
    k0: int = 16
    k: int = 256
    budget: int | None = None
    points_per_dim: int | None = None
    domain_overrides: dict = field(default_factory=dict)
    svt: dict = field(default_factory=dict)
    dataset: dict = field(default_factory=dict)
    acquisition: dict = field(default_factory=dict)
    gp: dict = field(default_factory=dict)
    sampling: str | None = None
    export_surface: bool = False
    output: str = "runs/out"
    raw: dict = field(default_factory=dict, repr=False)

    def digest(self) -> str:
        """sha256 of the canonical config (environment overrides applied)."""
        canon = yaml.safe_dump({**self.raw, "seed": self.seed, "output": self.output}, sort_keys=True)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


_TOP_KEYS = {
    "problem", "method", "seed", "delta", "anti_ideal", "repetitions", "budget", "domain", "svt",
    "dataset", "acquisition", "gp", "sampling", "export", "output",
}


def _num(value, name, kind=float, positive=False, minimum=None):
    if isinstance(value, bool):
        raise ConfigError(name, f"expected a number, got {value!r}")
    try:
        out = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected a number, got {value!r}") from None
    if kind is int and out != float(value):
        raise ConfigError(name, f"expected an integer, got {value!r}")
    if positive and not out > 0:
        raise ConfigError(name, f"must be positive, got {value!r}")
    if minimum is not None and out < minimum:
        raise ConfigError(name, f"must be >= {minimum}, got {value!r}")
    return out


def _table(raw, name):
    value = raw.get(name, {}) or {}
    if not isinstance(value, dict):
        raise ConfigError(name, "expected a mapping")
    return value


def parse_config(raw: dict, env: dict | None = None) -> ExperimentConfig:
    """Validate a config mapping; ``DPARETO_SEED`` / ``DPARETO_OUT`` in ``env`` override."""
    env = os.environ if env is None else env
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    if "problem" not in raw:
        raise ConfigError("problem", "missing required field")
    problem = raw["problem"]
    if problem not in problems.PROBLEMS:
        raise ConfigError("problem", f"unknown value {problem!r}; expected one of {', '.join(problems.PROBLEMS)}")
    method = raw.get("method", "bo")
    if method not in METHODS:
        raise ConfigError("method", f"unknown value {method!r}; expected one of {', '.join(METHODS)}")

    cfg = ExperimentConfig(problem=problem, method=method, raw=dict(raw))
    seed = env.get("DPARETO_SEED", raw.get("seed", 0))
    cfg.seed = _num(seed, "seed", int, minimum=0)
    if raw.get("delta") is not None:
        cfg.delta = _num(raw["delta"], "delta", positive=True)
        if cfg.delta >= 1:
            raise ConfigError("delta", "must be < 1")
    ai = raw.get("anti_ideal", [10.0, 1.0])
    if not isinstance(ai, (list, tuple)) or len(ai) != 2:
        raise ConfigError("anti_ideal", "expected [epsilon_max, error_max]")
    cfg.anti_ideal = (_num(ai[0], "anti_ideal[0]", positive=True), _num(ai[1], "anti_ideal[1]", positive=True))
    if raw.get("repetitions") is not None:
        cfg.repetitions = _num(raw["repetitions"], "repetitions", int, minimum=1)

    budget = _table(raw, "budget")
    if method == "bo":
        cfg.k0 = _num(budget.get("k0", 16), "budget.k0", int, minimum=2)
        cfg.k = _num(budget.get("k", 256), "budget.k", int, minimum=0)
    elif method == "random":
        if "budget" not in budget:
            raise ConfigError("budget.budget", "random search needs a budget")
        cfg.budget = _num(budget["budget"], "budget.budget", int, minimum=1)
    else:
        if "points_per_dim" not in budget:
            raise ConfigError("budget.points_per_dim", "grid search needs points_per_dim")
        cfg.points_per_dim = _num(budget["points_per_dim"], "budget.points_per_dim", int, minimum=2)

    cfg.domain_overrides = _table(raw, "domain")
    cfg.svt = _table(raw, "svt")
    cfg.dataset = _table(raw, "dataset")
    cfg.acquisition = _table(raw, "acquisition")
    cfg.gp = _table(raw, "gp")
    cfg.sampling = raw.get("sampling")
    if cfg.sampling not in (None, "uniform", "adult", "mnist"):
        raise ConfigError("sampling", f"unknown value {cfg.sampling!r}; expected uniform, adult or mnist")
    cfg.export_surface = bool(_table(raw, "export").get("surface", False))
    cfg.output = str(env.get("DPARETO_OUT", raw.get("output", "runs/out")))
    # Build once so every error surfaces at load time.
    build_problem(cfg)
    acquisition_config(cfg)
    gp_config(cfg)
    return cfg


def load_config(path, env: dict | None = None) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError("<file>", f"{path} not found") from None
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from None
    return parse_config(raw, env)


def _domain(base: HyperparameterDomain, overrides: dict) -> HyperparameterDomain:
    domain = base
    for name, changes in overrides.items():
        if name not in base.names:
            raise ConfigError(f"domain.{name}", f"no such dimension; expected one of {', '.join(base.names)}")
        if not isinstance(changes, dict):
            raise ConfigError(f"domain.{name}", "expected a mapping of low/high/scale/integral")
        bad = set(changes) - {"low", "high", "scale", "integral"}
        if bad:
            raise ConfigError(f"domain.{name}.{sorted(bad)[0]}", "unknown field")
        try:
            domain = domain.replace(name, **changes)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"domain.{name}", str(exc)) from None
    return domain


def load_data(cfg: ExperimentConfig) -> datasets.Dataset:
    ds = cfg.dataset
    source = ds.get("source", "file" if "path" in ds else "bundled")
    n_train = ds.get("n_train", 2000)
    n_test = ds.get("n_test", 400)
    n_train = _num(n_train, "dataset.n_train", int, minimum=1)
    n_test = _num(n_test, "dataset.n_test", int, minimum=1)
    seed = _num(ds.get("seed", 0), "dataset.seed", int, minimum=0)
    try:
        if source == "bundled":
            return problems.bundled_dataset(seed, n_train, n_test)
        if source == "synthetic":
            dim = _num(ds.get("dim", 2), "dataset.dim", int, minimum=1)
            return datasets.synthetic_separable(n_train, n_test, dim, rng=seed)
        if source == "file":
            path = ds.get("path")
            if not path or not Path(path).is_file():
                raise ConfigError("dataset.path", f"file {path!r} does not exist")
            fmt = ds.get("format", "csv")
            if fmt not in ("csv", "libsvm"):
                raise ConfigError("dataset.format", f"unknown value {fmt!r}; expected csv or libsvm")
            prep = datasets.Preprocessing(n_train=n_train, n_test=n_test, seed=seed)
            n_features = ds.get("n_features")
            return datasets.load_dataset(path, fmt, prep, n_features)
    except datasets.DatasetError as exc:
        raise ConfigError("dataset", str(exc)) from None
    raise ConfigError("dataset.source", f"unknown value {source!r}; expected bundled, synthetic or file")


def build_problem(cfg: ExperimentConfig):
    anti_ideal = AntiIdealPoint(*cfg.anti_ideal)
    if cfg.problem == "svt":
        base = problems.SVT_DOMAIN
        svt = cfg.svt
        m = _num(svt.get("m", 100), "svt.m", int, minimum=1)
        positives = _num(svt.get("positives", 10), "svt.positives", int, minimum=0)
        if positives > m:
            raise ConfigError("svt.positives", f"cannot exceed m={m}")
        workload_seed = _num(svt.get("workload_seed", 0), "svt.workload_seed", int, minimum=0)
        domain = _domain(base, cfg.domain_overrides)
        if domain["C"].low < 1:
            raise ConfigError("domain.C", "C must be >= 1")
        return problems.svt_problem(m, positives, cfg.repetitions or 50, workload_seed, domain, anti_ideal)
    data = load_data(cfg)
    base = problems.OUTPUT_PERTURBATION_DOMAIN if cfg.problem == "output_perturbed_logreg" else problems.ADULT_DOMAIN
    domain = _domain(base, cfg.domain_overrides)
    try:
        return problems.training_problem(cfg.problem, data, cfg.repetitions or 1,
                                         1e-6 if cfg.delta is None else cfg.delta, domain, anti_ideal)
    except ValueError as exc:
        raise ConfigError("domain", str(exc)) from None


def acquisition_config(cfg: ExperimentConfig) -> dict:
    """Acquisition settings (the RNG stream is attached per run)."""
    acq = cfg.acquisition
    bad = set(acq) - {"candidate_count", "refine_top", "refine_iters", "initial_step"}
    if bad:
        raise ConfigError(f"acquisition.{sorted(bad)[0]}", "unknown field")
    out = {
        "candidate_count": _num(acq.get("candidate_count", 1000), "acquisition.candidate_count", int, minimum=1),
        "refine_top": _num(acq.get("refine_top", 5), "acquisition.refine_top", int, minimum=1),
        "refine_iters": _num(acq.get("refine_iters", 50), "acquisition.refine_iters", int, minimum=1),
        "initial_step": _num(acq.get("initial_step", 0.05), "acquisition.initial_step", positive=True),
    }
    try:
        AcquisitionConfig(**out)
    except ValueError as exc:
        raise ConfigError("acquisition", str(exc)) from None
    return out


def gp_config(cfg: ExperimentConfig) -> GPConfig:
    g = cfg.gp
    bad = set(g) - {"n_restarts", "maxiter"}
    if bad:
        raise ConfigError(f"gp.{sorted(bad)[0]}", "unknown field")
    return GPConfig(n_restarts=_num(g.get("n_restarts", 3), "gp.n_restarts", int, minimum=1),
                    maxiter=_num(g.get("maxiter", 200), "gp.maxiter", int, minimum=1))


def sampling_distribution(cfg: ExperimentConfig):
    if cfg.sampling == "adult":
        return problems.ADULT_SAMPLING
    if cfg.sampling == "mnist":
        return problems.MNIST_SAMPLING
    if cfg.sampling == "uniform":
        return None
    return problems.sampling_for(cfg.problem)
