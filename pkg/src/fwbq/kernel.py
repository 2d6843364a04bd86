"""Exponentiated-quadratic kernel and its random Fourier feature approximation.

Kernels are immutable and callable: ``k(X, Y)`` returns the cross matrix
between the rows of ``X`` and ``Y``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .density import as_points, make_rng

__all__ = ["EqKernel", "RffKernel", "rff_sample", "gram"]


@dataclass(frozen=True)
class EqKernel:
    """``k(x, y) = amplitude**2 * exp(-exponent_scale * ||x - y||^2)``.

    ``exponent_scale`` defaults to the usual ``1 / (2 lengthscale**2)``. Pass
    ``exponent_scale=1`` to get ``exp(-||x - y||^2)``, the convention under
    which the truncated-Gaussian mean element of the model-selection problem
    is derived.
    """

    amplitude: float = 1.0
    lengthscale: float = 1.0
    dim: int = 1
    exponent_scale: float = None

    def __post_init__(self):
        if self.amplitude <= 0 or self.lengthscale <= 0 or self.dim < 1:
            raise ValueError("amplitude, lengthscale and dim must be positive")
        if self.exponent_scale is None:
            object.__setattr__(self, "exponent_scale", 0.5 / self.lengthscale**2)
        elif self.exponent_scale <= 0:
            raise ValueError("exponent_scale must be positive")

    @property
    def variance(self):
        """Diagonal value ``k(x, x)``."""
        return self.amplitude**2

    @property
    def effective_lengthscale(self):
        """Lengthscale of the equivalent standard-convention kernel."""
        return np.sqrt(0.5 / self.exponent_scale)

    @property
    def is_standard(self):
        return np.isclose(self.exponent_scale, 0.5 / self.lengthscale**2, rtol=1e-14, atol=0)

    def __call__(self, X, Y):
        X, _ = as_points(X, self.dim)
        Y, _ = as_points(Y, self.dim)
        return self.variance * np.exp(-self.exponent_scale * cdist(X, Y, "sqeuclidean"))

    def eval(self, x, y):
        return float(self(x, y)[0, 0])

    def diag(self, X):
        X, _ = as_points(X, self.dim)
        return np.full(len(X), self.variance)


@dataclass(frozen=True, eq=False)
class RffKernel:
    """Random Fourier feature kernel ``(amplitude**2 / D) * sum_j z_j(x) z_j(y)``.

    Each feature is ``z_j(x) = sqrt(2) cos(w_j . x + b_j)``; the frequencies
    ``w_j`` have shape (D, d) and the phases ``b_j`` shape (D,).
    """

    frequencies: np.ndarray
    phases: np.ndarray
    amplitude: float = 1.0
    lengthscale: float = 1.0

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.frequencies, dtype=float))
        b = np.atleast_1d(np.asarray(self.phases, dtype=float))
        if b.shape != (w.shape[0],):
            raise ValueError("need one phase per frequency vector")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "phases", b)

    @property
    def dim(self):
        return self.frequencies.shape[1]

    @property
    def n_features(self):
        return self.frequencies.shape[0]

    @property
    def variance(self):
        """Nominal diagonal ``amplitude**2`` of the kernel being approximated."""
        return self.amplitude**2

    def features(self, X):
        """(n, D) matrix of ``z_j(x_i)``."""
        X, _ = as_points(X, self.dim)
        return np.sqrt(2.0) * np.cos(X @ self.frequencies.T + self.phases)

    def __call__(self, X, Y):
        scale = self.variance / self.n_features
        return scale * self.features(X) @ self.features(Y).T

    def eval(self, x, y):
        return float(self(x, y)[0, 0])

    def diag(self, X):
        Z = self.features(X)
        return self.variance * np.mean(Z * Z, axis=1)

    def exact(self):
        """The EQ kernel this feature set approximates."""
        return EqKernel(self.amplitude, self.lengthscale, self.dim)


def rff_sample(sigma, amplitude, dim, n_features, seed):
    """Draw frequencies ``N(0, I / sigma**2)`` and phases ``U[0, 2 pi]``."""
    if n_features < 1:
        raise ValueError("need at least one feature")
    rng = make_rng(seed, 0x726666)
    w = rng.standard_normal((n_features, dim)) / sigma
    b = rng.uniform(0.0, 2.0 * np.pi, size=n_features)
    return RffKernel(w, b, amplitude, sigma)


def gram(kernel, points):
    """Dense symmetric gram matrix of ``kernel`` over ``points``."""
    K = kernel(points, points)
    return 0.5 * (K + K.T)
