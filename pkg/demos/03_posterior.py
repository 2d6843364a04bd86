"""A Gaussian posterior over the value of an integral, and how it contracts."""

import numpy as np

from fwbq import EqKernel, KernelExpansion, SelectionConfig, mean_element, posterior, select
from fwbq.density import random_mixture
from fwbq.quadrature import contraction_bound, contraction_mass

p = random_mixture(20, 2, seed=0)
k = EqKernel(1.0, 0.8, 2)
mu = mean_element(p, k)

# A test function inside the RKHS, so its integral and norm are known exactly.
rng = np.random.default_rng(1)
f = KernelExpansion(p.sample(6, 1, 99), rng.standard_normal(6), k)
truth = f.integral(mu)
print(f"true integral {truth:.6f}, ||f||_H = {f.rkhs_norm():.3f}\n")

trace = select("FWLSBQ", p, k, mu, SelectionConfig(60, pool_size=5000, seed=0))
print("  n      mean        sd     |error|   inside 95%")
for n in (1, 3, 5, 10, 20, 40, 60):
    x = trace.points[:n]
    post = posterior(x, f(x), k, mu)
    lo, hi = post.interval(0.95)
    print(f"{n:3d} {post.mean:10.6f} {post.std:9.2e} {abs(post.mean - truth):9.2e}   {lo <= truth <= hi}")

# Posterior mass outside a fixed neighbourhood of the truth shrinks with sd.
print("\nmass outside truth +/- 0.02")
for n in (5, 10, 20, 40, 60):
    x = trace.points[:n]
    post = posterior(x, f(x), k, mu)
    print(f"  n={n:3d}: {contraction_mass(post, truth - 0.02, truth + 0.02):.3e}")

exact, asym = contraction_bound(6.0, 1.0)
print(f"\nerfc tail at 6 sd: {exact:.3e}, asymptotic form {asym:.3e}")
