"""
Is the optimiser really better than random search?
==================================================

One BO run against one random run proves little, since both are noisy. The
comparison here cuts a long random-search log into chunks of the same
budget as the BO run, computes one hypervolume difference per chunk and
runs a t analysis on those differences.
"""

import numpy as np

from dpareto import RngStream, dpareto_run, random_search_run
from dpareto.driver import compare_hv, split_chunks
from dpareto.pareto import hypervolume, pareto_front
from dpareto.problems import svt_problem

problem = svt_problem(m=100, positives=10, repetitions=50)
budget = 40

bo = dpareto_run(problem, k0=16, k=budget - 16, rng=RngStream(0))

# 20 chunks of 40 random evaluations from one long run
long_random = random_search_run(problem, None, 20 * budget, RngStream(1))
chunks = split_chunks(long_random.evaluations, budget)

res = compare_hv(bo.evaluations, chunks, problem.anti_ideal)
print(f"BO hypervolume: {bo.hypervolume:.4f}")
print(res.report())
print("significant at p < 1e-3:", "yes" if res.significant else "no")

# The same analysis by hand, for the sceptical reader.
diffs = np.array([bo.hypervolume - hypervolume(pareto_front(e.objectives for e in c), problem.anti_ideal)
                  for c in chunks])
t = diffs.mean() / (diffs.std(ddof=1) / np.sqrt(len(diffs)))
print(f"by hand: mean diff {diffs.mean():.6g}, t {t:.6g}")
print(f"random chunks beat BO in {np.sum(diffs < 0)} of {len(diffs)} cases")
