"""Kernel mean elements: closed forms against brute-force quadrature."""

import numpy as np

from fwbq import EqKernel, GaussianMixture, TruncatedGaussian, mean_element, numeric_mean_element
from fwbq.density import random_mixture
from fwbq.kernel import rff_sample

# A plain standard normal with a unit EQ kernel has mu(x) = exp(-x^2/4)/sqrt(2)
# and p[mu] = 1/sqrt(3).
p = GaussianMixture.single([0.0], [[1.0]])
mu = mean_element(p, EqKernel(1.0, 1.0, 1))
print("mu(0)   =", mu(0.0), " expected", 1 / np.sqrt(2))
print("p[mu]   =", mu.initial_error, " expected", 1 / np.sqrt(3))

# The 20-component mixture used by the convergence study.
p = random_mixture(20, 2, seed=0)
k = EqKernel(1.0, 0.8, 2)
exact = mean_element(p, k)
oracle = numeric_mean_element(p, k, tol=1e-10)
x = p.sample(5, 1)
print("\n20-component mixture, lambda = 1, sigma = 0.8")
print("closed form :", np.round(exact(x), 12))
print("quadrature  :", np.round(oracle(x), 12))
print("p[mu]       :", exact.initial_error, oracle.initial_error)

# Random Fourier features integrate exactly against a Gaussian mixture too.
kr = rff_sample(0.8, 1.0, 2, 300, seed=0)
print("\nRFF (D=300) p[mu]:", mean_element(p, kr).initial_error,
      " exact-kernel p[mu]:", exact.initial_error)

# Truncated N(1, I/2) on the positive orthant with k = exp(-||x - x'||^2).
print("\ntruncated Gaussian initial errors")
for d in (1, 2, 3):
    kd = EqKernel(1.0, 1.0, d, exponent_scale=1.0)
    closed = mean_element(TruncatedGaussian(d), kd).initial_error
    numeric = numeric_mean_element(TruncatedGaussian(d), kd).initial_error
    print(f"  d={d}: {closed:.10f}  (tensor quadrature {numeric:.10f})")
