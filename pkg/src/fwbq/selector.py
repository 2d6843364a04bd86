"""Design-point selection: Frank-Wolfe, Frank-Wolfe line search, SBQ and Monte Carlo.

Every greedy step minimises its criterion over a fresh pool of ``pool_size``
i.i.d. draws from the target. Pool ``i`` is generated from
``(seed, i)``, so runs are reproducible and all methods sharing a seed see
the same candidates. Ties go to the lowest pool index.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .exceptions import DegenerateStepError
from .kernel import gram
from .quadrature import fw_weights

log = logging.getLogger(__name__)

__all__ = [
    "SelectionConfig",
    "SelectionTrace",
    "atom_objective",
    "fwls_step",
    "fw_select",
    "fwls_select",
    "sbq_select",
    "mc_select",
    "select",
    "candidate_pool",
]

DEGENERATE_STEP = 1e-14
# conditional variance below which an SBQ candidate is treated as uninformative
SBQ_MIN_SCHUR = 1e-10


@dataclass(frozen=True)
class SelectionConfig:
    n: int
    pool_size: int = 10_000
    step_rule: str = "fixed"
    init_point: tuple = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.pool_size < 1:
            raise ValueError("n and pool_size must be at least 1")
        if self.step_rule not in ("fixed", "line-search"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")


@dataclass(frozen=True, eq=False)
class SelectionTrace:
    """Selected points in order, the step sizes used and the per-step objective.

    ``objective`` holds ``J(g_i) = MMD^2 / 2`` for the Frank-Wolfe methods and
    the BQ posterior variance for SBQ; it is empty for Monte Carlo.
    """

    points: np.ndarray
    step_sizes: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective: np.ndarray = field(default_factory=lambda: np.zeros(0))
    method: str = ""

    def __len__(self):
        return len(self.points)

    @property
    def fw_weights(self):
        return fw_weights(self.step_sizes)

    def prefix(self, n):
        """Trace truncated to the first ``n`` selections."""
        return SelectionTrace(
            self.points[:n], self.step_sizes[:n], self.objective[:n], self.method
        )


def candidate_pool(p, size, seed, iteration):
    return p.sample(size, seed, iteration)


def atom_objective(x, prior_points, prior_weights, k, mu):
    """``sum_l w_l k(x, x_l) - mu_p(x)`` for each row of ``x``.

    The Frank-Wolfe atom is the minimiser of this linearisation of the MMD.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    score = -mu.evaluate(x)
    w = np.asarray(prior_weights, dtype=float)
    if len(w) != len(prior_points):
        raise ValueError("prior points and weights differ in length")
    if len(w):
        score = score + k(x, prior_points) @ w
    return score


def _line_search(gg, gz, gk, zx, kxx, variance):
    """Exact minimiser of J((1 - rho) g + rho Phi(x)), before clamping.

    ``gg = <g, g>``, ``gz = <g, mu_p>``, ``gk = g(x)``, ``zx = mu_p(x)``,
    ``kxx = k(x, x)``.
    """
    denom = gg - 2.0 * gk + kxx
    if denom < DEGENERATE_STEP * variance:
        raise DegenerateStepError(f"line-search denominator {denom:.3e} vanishes")
    return (gg - gz - gk + zx) / denom


def _clamp_step(rho):
    if not 0.0 <= rho <= 1.0:
        log.debug("line-search step %.17g outside [0, 1]; clamped", rho)
    return min(max(rho, 0.0), 1.0)


def fwls_step(prior_points, prior_weights, new_point, k, mu):
    """Optimal line-search step towards ``Phi(new_point)``, clamped to [0, 1].

    ``rho* = <g - mu_p, g - Phi(x)> / ||g - Phi(x)||^2`` with
    ``g = sum_l w_l Phi(x_l)``, expanded in kernel and mean-element values.
    """
    X = np.atleast_2d(np.asarray(prior_points, dtype=float))
    w = np.asarray(prior_weights, dtype=float)
    x = np.atleast_2d(np.asarray(new_point, dtype=float))
    gg = w @ gram(k, X) @ w
    gz = w @ mu.evaluate(X)
    gk = float(k(x, X)[0] @ w)
    rho = _line_search(gg, gz, gk, float(mu.evaluate(x)[0]), float(k.diag(x)[0]), k.variance)
    return _clamp_step(rho)


def _half_mmd2(w, z, K, initial):
    return 0.5 * max(initial - 2.0 * w @ z + w @ K @ w, 0.0)


def _first_point(p, k, mu, cfg, score):
    """Explicit initial point, or the pool maximiser of ``score``."""
    if cfg.init_point is not None:
        x = np.asarray(cfg.init_point, dtype=float).reshape(1, -1)
        if x.shape[1] != p.dim:
            raise ValueError("init_point has the wrong dimension")
        return x[0]
    pool = candidate_pool(p, cfg.pool_size, cfg.seed, 1)
    return pool[int(np.argmax(score(pool)))]


def _frank_wolfe(p, k, mu, cfg, line_search):
    n, variance, initial = cfg.n, k.variance, mu.initial_error
    X = np.empty((n, p.dim))
    z = np.empty(n)
    K = np.empty((n, n))
    w = np.zeros(n)
    rhos = np.empty(n)
    objective = np.empty(n)

    X[0] = _first_point(p, k, mu, cfg, mu.evaluate)
    z[0] = mu.evaluate(X[:1])[0]
    K[0, 0] = k.diag(X[:1])[0]
    w[0] = rhos[0] = 1.0
    objective[0] = _half_mmd2(w[:1], z[:1], K[:1, :1], initial)

    for i in range(1, n):
        pool = candidate_pool(p, cfg.pool_size, cfg.seed, i + 1)
        k_pool = k(pool, X[:i])
        z_pool = mu.evaluate(pool)
        j = int(np.argmin(k_pool @ w[:i] - z_pool))
        X[i], z[i] = pool[j], z_pool[j]
        K[i, :i] = K[:i, i] = k_pool[j]
        K[i, i] = k.diag(X[i:i + 1])[0]
        if line_search:
            wi = w[:i]
            try:
                rho = _clamp_step(_line_search(
                    wi @ K[:i, :i] @ wi, wi @ z[:i], k_pool[j] @ wi, z[i], K[i, i], variance
                ))
            except DegenerateStepError:
                rho = 0.0
        else:
            rho = 1.0 / (i + 1)
        w[:i] *= 1.0 - rho
        w[i] = rho
        rhos[i] = rho
        objective[i] = _half_mmd2(w[:i + 1], z[:i + 1], K[:i + 1, :i + 1], initial)

    method = "FWLS" if line_search else "FW"
    return SelectionTrace(X, rhos, objective, method)


def fw_select(p, k, mu, cfg):
    """Frank-Wolfe with steps ``1 / (i + 1)`` (kernel herding weights)."""
    return _frank_wolfe(p, k, mu, cfg, line_search=False)


def fwls_select(p, k, mu, cfg):
    """Frank-Wolfe with the closed-form line-search step."""
    return _frank_wolfe(p, k, mu, cfg, line_search=True)


def sbq_select(p, k, mu, cfg):
    """Sequential BQ: greedily add the candidate minimising the posterior variance.

    With ``L`` the Cholesky factor of the current gram and ``c = L^{-1} z``,
    adding ``x`` reduces the variance by ``t^2 / s`` where
    ``a = L^{-1} k(X, x)``, ``s = k(x, x) - a'a`` and ``t = mu_p(x) - a'c``.
    Candidates with ``s`` below ``SBQ_MIN_SCHUR * k(x, x)`` are uninformative
    and score zero; a zero-gain selection enters the trace but not the factor.
    """
    n, variance = cfg.n, k.variance
    X = np.empty((n, p.dim))
    objective = np.empty(n)
    L = np.zeros((n, n))
    c = np.zeros(n)
    active = []
    v = mu.initial_error

    def gains(pool, z_pool):
        kd = k.diag(pool)
        if not active:
            s, t = kd, z_pool
            A = np.zeros((0, len(pool)))
        else:
            m = len(active)
            A = linalg.solve_triangular(L[:m, :m], k(X[active], pool), lower=True, check_finite=False)
            s = kd - np.einsum("ij,ij->j", A, A)
            t = z_pool - A.T @ c[:m]
        ok = s > SBQ_MIN_SCHUR * kd
        g = np.where(ok, t * t / np.where(ok, s, 1.0), 0.0)
        return g, A, s, t

    for i in range(n):
        if i == 0 and cfg.init_point is not None:
            pool = np.asarray(cfg.init_point, dtype=float).reshape(1, -1)
            if pool.shape[1] != p.dim:
                raise ValueError("init_point has the wrong dimension")
        else:
            pool = candidate_pool(p, cfg.pool_size, cfg.seed, i + 1)
        z_pool = mu.evaluate(pool)
        g, A, s, t = gains(pool, z_pool)
        j = int(np.argmax(g))
        X[i] = pool[j]
        if g[j] > 0:
            m = len(active)
            L[m, :m] = A[:, j]
            L[m, m] = np.sqrt(s[j])
            c[m] = t[j] / L[m, m]
            active.append(i)
            v = max(v - g[j], 0.0)
        objective[i] = v
    return SelectionTrace(X, np.zeros(0), objective, "SBQ")


def mc_select(p, cfg):
    """``n`` i.i.d. draws from ``p``."""
    return SelectionTrace(p.sample(cfg.n, cfg.seed), method="MC")


def select(method, p, k, mu, cfg):
    """Run the selector behind a method tag (``FWBQ`` uses the FW points, etc.)."""
    base = method.upper().removesuffix("BQ") if method.upper() != "SBQ" else "SBQ"
    if base == "FW":
        return fw_select(p, k, mu, cfg)
    if base == "FWLS":
        return fwls_select(p, k, mu, cfg)
    if base == "SBQ":
        return sbq_select(p, k, mu, cfg)
    if base == "MC":
        return mc_select(p, cfg)
    raise ValueError(f"unknown method {method!r}")
