"""Quadrature rules, Bayesian quadrature weights and the integral posterior."""

from dataclasses import dataclass

import numpy as np
from scipy import linalg, special, stats

from .exceptions import IllConditionedGramError, NumericalInconsistencyError
from .kernel import gram

__all__ = [
    "QuadratureRule",
    "IntegralPosterior",
    "KernelExpansion",
    "fw_weights",
    "dedupe",
    "bq_weights",
    "bq_rule",
    "apply",
    "mmd_squared",
    "posterior",
    "contraction_mass",
    "contraction_bound",
]

JITTER_START = 1e-10
JITTER_MAX = 1e-4
NEGATIVE_WINDOW = 1e-10

FW_METHODS = ("MC", "FW", "FWLS")
BQ_METHODS = ("FWBQ", "FWLSBQ", "SBQ", "BQ")


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Points (n, d) and weights (n,) approximating ``p[f]`` by ``sum w_i f(x_i)``."""

    points: np.ndarray
    weights: np.ndarray
    method: str = "BQ"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if pts.ndim == 1:
            pts = pts[:, None]
        if len(pts) != len(w):
            raise ValueError(f"{len(pts)} points but {len(w)} weights")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.weights)

    def __call__(self, f):
        """Apply the rule to a vectorised callable ``f``."""
        if len(self) == 0:
            return 0.0
        return apply(self, f(self.points))


@dataclass(frozen=True)
class IntegralPosterior:
    """Gaussian ``N(mean, variance)`` over the value of an integral."""

    mean: float
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("variance must be nonnegative")

    @property
    def std(self):
        return float(np.sqrt(self.variance))

    def interval(self, level=0.95):
        half = stats.norm.ppf(0.5 + level / 2) * self.std
        return self.mean - half, self.mean + half


def fw_weights(step_sizes):
    """Unroll the Frank-Wolfe recursion ``g_i = (1 - rho_i) g_{i-1} + rho_i Phi(x_i)``.

    ``step_sizes[0]`` is the step that introduces the first atom and must
    be 1. The weight of atom ``i`` is ``rho_i * prod_{j > i} (1 - rho_j)``.
    """
    rho = np.asarray(step_sizes, dtype=float)
    if rho.size == 0:
        return rho
    if rho[0] != 1.0:
        raise ValueError("the first step size must be 1")
    if np.any((rho < 0) | (rho > 1)):
        raise ValueError("step sizes must lie in [0, 1]")
    keep = np.append(np.cumprod((1.0 - rho[1:])[::-1])[::-1], 1.0)
    return rho * keep


def dedupe(points):
    """Indices of the first occurrence of each distinct row, in order.

    Returns ``(first, inverse)`` so that ``points[first][inverse] == points``.
    Rows are compared by exact floating-point value.
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) == 0:
        return np.arange(0), np.arange(0)
    _, first, inverse = np.unique(pts, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return first[order], rank[np.ravel(inverse)]


def _solve_gram(K, z, variance, initial_error=None):
    """Solve ``K w = z`` by Cholesky, adding diagonal jitter only when needed.

    A factorisation is rejected when Cholesky fails or, if ``initial_error``
    is given, when ``initial_error - z'w`` is more negative than the
    roundoff window (an inaccurate solve on a nearly singular gram).
    """
    n = len(z)
    jitters = [0.0]
    j = JITTER_START
    while j <= JITTER_MAX * (1 + 1e-9):
        jitters.append(j * variance)
        j *= 10
    for jitter in jitters:
        try:
            factor = linalg.cho_factor(K + jitter * np.eye(n), lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
        w = linalg.cho_solve(factor, z, check_finite=False)
        if not np.all(np.isfinite(w)):
            continue
        if initial_error is not None and initial_error - z @ w < -NEGATIVE_WINDOW * variance:
            continue
        return w, jitter
    raise IllConditionedGramError("gram factorisation failed at maximum jitter", np.linalg.cond(K))


def _bq_solve(points, k, mu):
    """BQ weights and ``z`` over the distinct points, plus the index bookkeeping."""
    pts = np.asarray(points, dtype=float)
    first, inverse = dedupe(pts)
    uniq = pts[first]
    z = mu.evaluate(uniq)
    K = gram(k, uniq)
    w, _ = _solve_gram(K, z, k.variance, mu.initial_error)
    return w, z, first


def bq_weights(points, k, mu):
    """Bayesian quadrature weights ``K^{-1} z`` with ``z_i = mu_p(x_i)``.

    Repeated points get a single row in the solve; the weight goes to the
    first occurrence and later copies get zero.
    """
    pts = np.asarray(points, dtype=float)
    out = np.zeros(len(pts))
    if len(pts) == 0:
        return out
    w, _, first = _bq_solve(pts, k, mu)
    out[first] = w
    return out


def bq_rule(points, k, mu, method="BQ"):
    return QuadratureRule(points, bq_weights(points, k, mu), method)


def apply(rule, f_values):
    f = np.asarray(f_values, dtype=float).reshape(-1)
    if f.size != len(rule):
        raise ValueError(f"rule has {len(rule)} points but got {f.size} function values")
    return float(rule.weights @ f)


def _clamp(value, variance, what):
    if value < 0:
        if value < -NEGATIVE_WINDOW * variance:
            raise NumericalInconsistencyError(f"{what} is negative: {value:.3e}")
        return 0.0
    return float(value)


def mmd_squared(rule, k, mu):
    """``p[mu_p] - 2 sum w_i mu_p(x_i) + sum_ij w_i w_j k(x_i, x_j)``."""
    if len(rule) == 0:
        return float(mu.initial_error)
    w = rule.weights
    z = mu.evaluate(rule.points)
    K = gram(k, rule.points)
    value = mu.initial_error - 2.0 * w @ z + w @ K @ w
    return _clamp(value, k.variance, "squared MMD")


def posterior(points, f_values, k, mu):
    """BQ posterior ``N(z'K^{-1}f, p[mu_p] - z'K^{-1}z)`` over ``p[f]``."""
    pts = np.asarray(points, dtype=float)
    f = np.asarray(f_values, dtype=float).reshape(-1)
    if len(pts) != f.size:
        raise ValueError(f"{len(pts)} points but {f.size} function values")
    if len(pts) == 0:
        return IntegralPosterior(0.0, float(mu.initial_error))
    w, z, first = _bq_solve(pts, k, mu)
    var = _clamp(mu.initial_error - z @ w, k.variance, "posterior variance")
    return IntegralPosterior(float(w @ f[first]), var)


@dataclass(frozen=True, eq=False)
class KernelExpansion:
    """Test function ``f(x) = sum_j c_j k(x, y_j)`` with known integral and norm."""

    centres: np.ndarray
    coeffs: np.ndarray
    kernel: object

    def __call__(self, X):
        return self.kernel(X, self.centres) @ np.asarray(self.coeffs, dtype=float)

    def integral(self, mu):
        """Exact ``p[f] = sum_j c_j mu_p(y_j)``."""
        return float(np.asarray(self.coeffs) @ mu.evaluate(np.asarray(self.centres, dtype=float)))

    def rkhs_norm(self):
        c = np.asarray(self.coeffs, dtype=float)
        return float(np.sqrt(max(c @ gram(self.kernel, self.centres) @ c, 0.0)))


def contraction_mass(post, a, b):
    """Posterior probability outside the open interval ``(a, b)``."""
    if not a < b:
        raise ValueError("need a < b")
    m, s = post.mean, post.std
    if s == 0.0:
        return 0.0 if a < m < b else 1.0
    return float(stats.norm.cdf((a - m) / s) + stats.norm.sf((b - m) / s))


def contraction_bound(gamma, sigma):
    """``erfc(gamma / (sqrt 2 sigma))`` and its large-ratio asymptotic form.

    The first value is the posterior mass further than ``gamma`` from a
    centred mean; the second is ``sqrt(2) sigma / (sqrt(pi) gamma) *
    exp(-gamma^2 / (2 sigma^2))``.
    """
    if gamma <= 0 or sigma <= 0:
        raise ValueError("gamma and sigma must be positive")
    r = gamma / sigma
    exact = float(special.erfc(r / np.sqrt(2.0)))
    asymptotic = float(np.sqrt(2.0) / (np.sqrt(np.pi) * r) * np.exp(-0.5 * r * r))
    return exact, asymptotic
