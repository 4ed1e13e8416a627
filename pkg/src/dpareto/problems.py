"""Ready-made problems: SVT and the private linear classifiers, with their domains."""

from __future__ import annotations

from .core import Dimension, HyperparameterDomain
from .driver import DimSampler, Problem
from .mechanisms import datasets, svt, training
from .pareto import AntiIdealPoint
from . import privacy

PROBLEMS = ("svt", "output_perturbed_logreg", "dpsgd_logreg", "dpsgd_svm", "dpadam_logreg")
TRAINING_PROBLEMS = PROBLEMS[1:]
BUNDLED_DATASET = "binary_features.csv"

SVT_DOMAIN = HyperparameterDomain((
    Dimension("C", 1, 30, integral=True),
    Dimension("b", 1e-2, 1e2, scale="log"),
))

OUTPUT_PERTURBATION_DOMAIN = HyperparameterDomain((
    Dimension("reg", 1e-4, 1.0, scale="log"),
    Dimension("sigma", 0.1, 10.0, scale="log"),
))

ADULT_DOMAIN = HyperparameterDomain((
    Dimension("epochs", 1, 64, integral=True),
    Dimension("lot_size", 8, 512, integral=True),
    Dimension("learning_rate", 5e-4, 5e-2, scale="log"),
    Dimension("noise_variance", 0.1, 16.0, scale="log"),
    Dimension("clip_norm", 0.1, 4.0, scale="log"),
))

MNIST_DOMAIN = HyperparameterDomain((
    Dimension("epochs", 1, 400, integral=True),
    Dimension("lot_size", 16, 4000, integral=True),
    Dimension("learning_rate", 1e-3, 5e-1, scale="log"),
    Dimension("noise_variance", 0.1, 16.0, scale="log"),
    Dimension("clip_norm", 0.1, 12.0, scale="log"),
))

# Random-search baselines. Learning-rate accept ranges are wider than the
# optimisation domains above; draws are clipped into the domain afterwards.
ADULT_SAMPLING = {
    "epochs": DimSampler("uniform", (1, 64), (1, 64), int_valued=True),
    "lot_size": DimSampler("normal", (128, 64), (8, 512), int_valued=True),
    "learning_rate": DimSampler("shifted_exponential", (10.0, 1e-3), (1e-3, 1e-1)),
    "noise_variance": DimSampler("shifted_exponential", (0.1, 0.1), (0.1, 16.0)),
    "clip_norm": DimSampler("shifted_exponential", (0.1, 0.1), (0.1, 4.0)),
}

MNIST_SAMPLING = {
    "epochs": DimSampler("uniform", (1, 400), (1, 400), int_valued=True),
    "lot_size": DimSampler("normal", (800, 800), (16, 4000), int_valued=True),
    "learning_rate": DimSampler("shifted_exponential", (10.0, 1e-3), (1e-3, 5e-1)),
    "noise_variance": DimSampler("shifted_exponential", (0.5, 0.1), (0.1, 16.0)),
    "clip_norm": DimSampler("shifted_exponential", (0.5, 0.1), (0.1, 12.0)),
}


def svt_problem(m: int = 100, positives: int = 10, repetitions: int = 50, workload_seed: int = 0,
                domain: HyperparameterDomain = SVT_DOMAIN,
                anti_ideal=AntiIdealPoint(10.0, 1.0)) -> Problem:
    """SVT on ``m`` random binary queries, F1 utility averaged over ``repetitions`` orders."""
    workload = svt.make_svt_workload(m, positives, workload_seed)

    def privacy_oracle(v):
        return privacy.svt_epsilon(v["b"], v["C"])

    def utility_oracle(v, rng):
        _, runs = svt.svt_utility_oracle(workload, v["b"], int(v["C"]), repetitions, rng)
        return runs

    return Problem(domain, privacy_oracle, utility_oracle, 0.0, AntiIdealPoint(*anti_ideal),
                   repetitions, "svt")


def bundled_dataset(seed: int = 0, n_train: int = 2000, n_test: int = 400) -> datasets.Dataset:
    prep = datasets.Preprocessing(n_train=n_train, n_test=n_test, seed=seed)
    return datasets.load_dataset(datasets.bundled_path(BUNDLED_DATASET), "csv", prep)


def _train_with(kind, loss):
    train = training.dp_adam_train if kind == "adam" else training.dp_sgd_train

    def trainer(data, values, rng):
        return train(data, training.TrainingHyperparams.from_dict(values), loss, rng)
    return trainer


def _output_perturbation_trainer(data, values, rng):
    return training.output_perturbed_logreg_train(data, values["reg"], values["sigma"], rng)


def training_problem(name: str, data: datasets.Dataset, repetitions: int = 1, delta: float = 1e-6,
                     domain: HyperparameterDomain | None = None,
                     anti_ideal=AntiIdealPoint(10.0, 1.0)) -> Problem:
    """One of the private linear classifiers trained on ``data``."""
    if name == "output_perturbed_logreg":
        domain = domain or OUTPUT_PERTURBATION_DOMAIN
        trainer = _output_perturbation_trainer

        def privacy_oracle(v):
            return privacy.output_perturbation_epsilon(v["sigma"], v["reg"], data.n_train, delta)
    elif name in ("dpsgd_logreg", "dpsgd_svm", "dpadam_logreg"):
        domain = domain or ADULT_DOMAIN
        if domain["lot_size"].high > data.n_train:
            raise ValueError(f"lot_size up to {domain['lot_size'].high:g} exceeds n_train={data.n_train}")
        trainer = _train_with("adam" if name == "dpadam_logreg" else "sgd",
                              "hinge" if name == "dpsgd_svm" else "logistic")

        def privacy_oracle(v):
            hp = training.TrainingHyperparams.from_dict(v)
            return privacy.dpsgd_privacy_oracle(hp.lot_size, hp.epochs, hp.noise_multiplier,
                                                data.n_train, delta)
    else:
        raise ValueError(f"unknown training problem {name!r}; expected one of {TRAINING_PROBLEMS}")

    def utility_oracle(v, rng):
        _, runs = training.accuracy_utility_oracle(trainer, data, v, repetitions, rng)
        return runs

    return Problem(domain, privacy_oracle, utility_oracle, delta, AntiIdealPoint(*anti_ideal),
                   repetitions, name)


def sampling_for(name: str):
    """Random-search distribution for a problem (None means uniform over the domain)."""
    return ADULT_SAMPLING if name in ("dpsgd_logreg", "dpsgd_svm", "dpadam_logreg") else None


__all__ = [
    "PROBLEMS", "SVT_DOMAIN", "OUTPUT_PERTURBATION_DOMAIN", "ADULT_DOMAIN", "MNIST_DOMAIN",
    "ADULT_SAMPLING", "MNIST_SAMPLING", "svt_problem", "training_problem", "bundled_dataset",
    "sampling_for",
]
