"""Multi-objective tuning of differentially private algorithms.

Searches for hyperparameters that trade privacy loss (epsilon) against error
with Gaussian-process surrogates and a hypervolume-based acquisition function.
"""

from .core import Dimension, Evaluation, HyperparameterDomain, ObjectivePoint, RngStream
from .driver import Problem, RunResult, dpareto_run, grid_search_run, random_search_run
from .pareto import AntiIdealPoint, ParetoFront, hypervolume, pareto_front

__version__ = "0.1.0"
