"""
Four privacy oracles side by side
=================================

Each private algorithm comes with a map from hyperparameters to epsilon.
Some are closed-form; DP-SGD needs an RDP accountant. This script walks
through them and shows which knobs move epsilon, and by how much.
"""

import numpy as np

from dpareto import privacy

# -- sparse vector technique --------------------------------------------------
# epsilon = (1 + (2C)^(1/3)) (1 + (2C)^(2/3)) / b: linear in 1/b, sublinear in C
print("SVT epsilon")
for C in (1, 4, 16, 64):
    row = "  ".join(f"{privacy.svt_epsilon(b, C):8.4f}" for b in (1, 10, 100))
    print(f"  C={C:3d}  b=1,10,100: {row}")
b1, b2 = privacy.svt_noise_split(15, 4)
print(f"  b=15, C=4 splits into threshold noise {b1:g} and query noise {b2:g}")

# -- analytic Gaussian mechanism ----------------------------------------------
# The smallest epsilon whose exact delta(epsilon) fits the budget.
print("\nGaussian mechanism, sensitivity 1, delta 1e-5")
for sigma in (0.5, 1, 2, 4, 8):
    eps = privacy.gaussian_mechanism_epsilon(sigma, 1.0, 1e-5)
    print(f"  sigma={sigma:4g}: epsilon {eps:8.4f}  (delta back: {privacy.gaussian_delta(eps, sigma, 1.0):.3g})")

# -- DP-SGD -------------------------------------------------------------------
# Per-step RDP of the subsampled Gaussian, composed over T * ceil(n / m) steps,
# then converted at the best order.
n, delta = 2000, 1e-6
print(f"\nDP-SGD, n={n}, delta={delta:g}")
print("  epochs   m=20     m=100    m=500   (noise multiplier 1.5)")
for T in (1, 4, 16, 64):
    row = "  ".join(f"{privacy.dpsgd_privacy_oracle(m, T, 1.5, n, delta):7.3f}" for m in (20, 100, 500))
    print(f"  {T:5d}  {row}")

# Subsampling is where the savings come from. Per-step RDP at orders 2, 4, 8, 16, 32:
orders = np.array([2, 4, 8, 16, 32])
for gamma in (0.01, 0.05, 0.25, 1.0):
    vals = [privacy.rdp_subsampled_gaussian(int(a), 1.5, gamma) for a in orders]
    print(f"  gamma={gamma:4g}: " + "  ".join(f"{v:.2e}" for v in vals))
curve = privacy.dpsgd_rdp(100, 16, 1.5, n)
guarantee, order = privacy.rdp_to_dp(curve, delta)
print(f"  m=100, 16 epochs: epsilon {guarantee.epsilon:.3f} at order {order:g}")

# -- output perturbation ------------------------------------------------------
# Sensitivity 2 / (n reg): more regularisation buys privacy at fixed noise.
print("\noutput-perturbed logistic regression, n=2000")
for reg in (1e-3, 1e-2, 1e-1):
    row = "  ".join(f"{privacy.output_perturbation_epsilon(s, reg, 2000):8.4f}" for s in (0.1, 1.0))
    print(f"  reg={reg:5g}  sigma=0.1,1: {row}")
