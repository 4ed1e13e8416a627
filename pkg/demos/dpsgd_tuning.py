"""
Tuning DP-SGD logistic regression
=================================

Five hyperparameters (epochs, lot size, learning rate, noise variance and
clipping norm) feed both epsilon and test accuracy. We tune them on the
bundled binary-feature dataset (2000 train / 400 test rows) with the
optimiser and with random search at the same budget.
"""

import time

import numpy as np

from dpareto import RngStream, dpareto_run, random_search_run
from dpareto.mechanisms import training
from dpareto.problems import ADULT_SAMPLING, bundled_dataset, training_problem

data = bundled_dataset(seed=0)
print(f"{data.n_train} training rows, {data.n_test} test rows, {data.dim} features")

# A non-private baseline: plain SGD with no clipping and no noise.
hp = training.TrainingHyperparams(epochs=20, lot_size=50, learning_rate=0.5, noise_variance=0.0,
                                  clip_norm=np.inf)
w = training.dp_sgd_train(data, hp, rng=0)
print(f"non-private accuracy: {training.accuracy(data.x_test, data.y_test, w):.3f}")

problem = training_problem("dpsgd_logreg", data, repetitions=1, delta=1e-6)

# -- optimiser: 16 seeds + 24 proposals --------------------------------------
start = time.perf_counter()
bo = dpareto_run(problem, k0=16, k=24, rng=RngStream(1))
print(f"\nBO: {len(bo.evaluations)} evaluations in {time.perf_counter() - start:.0f} s, "
      f"hypervolume {bo.hypervolume:.4f}")

# -- random search from hand-picked marginals ---------------------------------
start = time.perf_counter()
rnd = random_search_run(problem, ADULT_SAMPLING, 40, RngStream(1))
print(f"random: {len(rnd.evaluations)} evaluations in {time.perf_counter() - start:.0f} s, "
      f"hypervolume {rnd.hypervolume:.4f}")

print("\nBO front (epsilon, accuracy) and the settings behind it")
for p in bo.front:
    if p.epsilon > 10:
        continue
    v = next(e.values for e in bo.evaluations if e.objectives == p)
    print(f"  eps {p.epsilon:6.3f}  acc {1 - p.error:.3f}  "
          f"T={v['epochs']:.0f} m={v['lot_size']:.0f} lr={v['learning_rate']:.4f} "
          f"noise={v['noise_variance']:.2f} L={v['clip_norm']:.2f}")

# Accuracy at a few privacy budgets, read off each front (nan: nothing that private was found).
for budget in (0.5, 1.0, 2.0, 5.0):
    best = {name: max((1 - p.error for p in r.front if p.epsilon <= budget), default=float("nan"))
            for name, r in (("BO", bo), ("random", rnd))}
    print(f"  epsilon <= {budget:3g}: BO {best['BO']:.3f}   random {best['random']:.3f}")
