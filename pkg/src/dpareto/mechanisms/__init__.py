"""Private mechanisms under tuning and their utility oracles."""

from .datasets import Dataset, DatasetError, Preprocessing, load_dataset, synthetic_separable
from .svt import QueryWorkload, f1_score, make_svt_workload, run_svt, svt_utility_oracle
from .training import (
    TrainingError,
    TrainingHyperparams,
    accuracy_utility_oracle,
    clip,
    dp_adam_train,
    dp_sgd_train,
    output_perturbed_logreg_train,
)
