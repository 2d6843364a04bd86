"""Model evidence for Michaelis-Menten gradient-matching models.

A candidate model names at most two regulating enzymes. Conditional on the
Michaelis-Menten constants ``K`` the evidence ``L(K, M)`` is available in
closed form under a g-prior; the remaining integral over ``K`` against a
truncated Gaussian prior is done by Bayesian quadrature, which yields a
Gaussian posterior per model. :func:`propagate` pushes those posteriors
through to posterior model probabilities.

The kernel is ``exp(-||K - K'||^2)``: the convention under which the
closed-form mean element of the truncated prior is derived.
"""

import csv
import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .density import TruncatedGaussian, make_rng
from .exceptions import (
    DegeneratePosteriorError,
    IllPosedError,
    NumericalInconsistencyError,
)
from .kernel import EqKernel
from .mean_element import trunc_eq_mean_element
from .quadrature import IntegralPosterior, posterior
from .selector import SelectionConfig, select

__all__ = [
    "LongitudinalData",
    "EvidencePosterior",
    "EvidenceResult",
    "enumerate_models",
    "build_design",
    "log_conditional_evidence",
    "conditional_evidence",
    "evidence_kernel",
    "design_points",
    "evidence_posterior",
    "model_evidence",
    "propagate",
    "run_model_selection",
    "synthetic_data",
    "read_table",
    "write_table",
]

QUANTILES = (2.5, 25.0, 50.0, 75.0, 97.5)


@dataclass(frozen=True, eq=False)
class LongitudinalData:
    """Substrate and enzyme expression levels at times ``t_1 < ... < t_{N+1}``.

    ``y_e_star`` has one row per enzyme.
    """

    times: np.ndarray
    y_s: np.ndarray
    y_s_star: np.ndarray
    y_e_star: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        ys = np.asarray(self.y_s, dtype=float)
        yss = np.asarray(self.y_s_star, dtype=float)
        ye = np.atleast_2d(np.asarray(self.y_e_star, dtype=float))
        if t.ndim != 1 or t.size < 2:
            raise ValueError("need at least two time points")
        if ys.shape != t.shape or yss.shape != t.shape or ye.shape[1] != t.size:
            raise ValueError("all series must have one value per time point")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(ys < 0) or np.any(yss < 0) or np.any(ye < 0):
            raise ValueError("expression levels must be nonnegative")
        for name, arr in (("times", t), ("y_s", ys), ("y_s_star", yss), ("y_e_star", ye)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_steps(self):
        """Number ``N`` of finite-difference observations."""
        return self.times.size - 1

    @property
    def n_enzymes(self):
        return self.y_e_star.shape[0]

    def gradients(self):
        return np.diff(self.y_s_star) / np.diff(self.times)


@dataclass(frozen=True)
class EvidencePosterior(IntegralPosterior):
    """Posterior over ``L(M) * exp(-log_scale)``."""

    log_scale: float = 0.0


@dataclass(frozen=True, eq=False)
class EvidenceResult:
    """Sampled posterior model probabilities.

    ``probability_samples`` is (samples, models); ``quantiles`` is
    (5, models) at the 2.5/25/50/75/97.5 percentiles.
    """

    per_model: list
    probability_samples: np.ndarray
    map_stability: float
    map_model: int
    quantiles: np.ndarray

    @property
    def widths(self):
        """Per-model 95% interval width of the model probability."""
        return self.quantiles[-1] - self.quantiles[0]


def enumerate_models(n_enzymes, max_size=2):
    """All enzyme subsets of size at most ``max_size``, smallest first."""
    if max_size > 2:
        raise ValueError("models contain at most two enzymes")
    out = []
    for size in range(max_size + 1):
        out.extend(itertools.combinations(range(n_enzymes), size))
    return out


def _check_model(data, model):
    model = tuple(int(j) for j in model)
    if len(model) > 2 or len(set(model)) != len(model):
        raise ValueError(f"invalid model {model}")
    if any(j < 0 or j >= data.n_enzymes for j in model):
        raise ValueError(f"model {model} references a missing enzyme")
    return model


def _design_batch(data, model, K):
    """Stacked designs: K is (m, 1 + |model|), returns X with shape (m, N, 1 + |model|)."""
    model = _check_model(data, model)
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape[1] != 1 + len(model):
        raise ValueError(f"model {model} needs {1 + len(model)} Michaelis-Menten constants")
    if np.any(K <= 0):
        raise ValueError("Michaelis-Menten constants must be positive")
    ys = data.y_s[:-1]
    yss = data.y_s_star[:-1]
    cols = [-yss / (yss[None, :] + K[:, :1])]
    for c, j in enumerate(model, start=1):
        cols.append(data.y_e_star[j, :-1] * ys / (ys[None, :] + K[:, c:c + 1]))
    return np.stack(cols, axis=-1)


def build_design(data, model, K):
    """Response ``Y`` (N,) and Michaelis-Menten design ``X`` (N, 1 + |model|)."""
    return data.gradients(), _design_batch(data, model, K)[0]


def _log_evidence_batch(data, model, K):
    X = _design_batch(data, model, K)
    Y = data.gradients()
    N, d = X.shape[1], X.shape[2]
    G = np.einsum("mni,mnj->mij", X, X)
    if np.any(np.linalg.matrix_rank(G) < d):
        raise IllPosedError(f"design for model {tuple(model)} is rank deficient")
    prior_pull = G.sum(axis=2) / N  # (1/N) X'X 1
    rhs = prior_pull + np.einsum("mni,n->mi", X, Y)
    omega = (1.0 + 1.0 / N) * G
    V = np.linalg.solve(omega, rhs[..., None])[..., 0]
    b = 0.5 * (Y @ Y + prior_pull.sum(axis=1) - np.einsum("mi,mi->m", V, rhs))
    if np.any(b <= 0):
        raise NumericalInconsistencyError("g-prior residual b_N is not positive")
    const = -0.5 * N * np.log(2 * np.pi) - 0.5 * d * np.log(N + 1.0) + special.gammaln(N / 2)
    return const - 0.5 * N * np.log(b)


def log_conditional_evidence(data, model, K):
    """``log L(K, M)``; ``K`` may be one vector or a stack of them (rows)."""
    K = np.asarray(K, dtype=float)
    out = _log_evidence_batch(data, model, K)
    return float(out[0]) if K.ndim == 1 else out


def conditional_evidence(data, model, K):
    """g-prior marginal likelihood ``L(K, M)`` with ``V`` and ``sigma_err`` integrated out.

    ``Omega = (1 + 1/N) X'X``, ``V_N = Omega^{-1}((1/N) X'X 1 + X'Y)``,
    ``b_N = (Y'Y + (1/N) 1'X'X 1 - V_N' Omega V_N) / 2`` and
    ``L = (2 pi)^{-N/2} (N + 1)^{-d/2} Gamma(N/2) b_N^{-N/2}``.
    """
    return np.exp(log_conditional_evidence(data, model, K))


def evidence_kernel(d):
    """``exp(-||x - x'||^2)`` in ``d`` dimensions."""
    return EqKernel(1.0, 1.0, d, exponent_scale=1.0)


@lru_cache(maxsize=32)
def design_points(d, method, n, seed, pool_size):
    """Selected design points under the truncated prior; shared by every model of dimension ``d``.

    The points depend only on the prior, kernel and configuration, never on
    the likelihood, so they are computed once per dimension.
    """
    p = TruncatedGaussian(d)
    k = evidence_kernel(d)
    mu = trunc_eq_mean_element(d)
    trace = select(method, p, k, mu, SelectionConfig(n=n, pool_size=pool_size, seed=seed))
    pts = trace.points.copy()
    pts.setflags(write=False)
    return pts


def evidence_posterior(likelihood, d, method="FWBQ", n=50, seed=0, pool_size=10_000, points=None):
    """BQ posterior over ``int likelihood(K) p(K) dK`` under the truncated prior.

    ``likelihood`` maps an (n, d) array to n values. ``points`` overrides the
    selector (they must come from it for the guarantees to hold).
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    mu = trunc_eq_mean_element(d)
    k = evidence_kernel(d)
    if n == 0:
        return IntegralPosterior(0.0, mu.initial_error)
    if points is None:
        points = design_points(d, method.upper(), n, seed, pool_size)
    points = points[:n]
    return posterior(points, likelihood(points), k, mu)


def model_evidence(data, model, method="FWBQ", n=50, seed=0, pool_size=10_000, log_scale=None,
                   points=None):
    """Posterior over ``L(M) = int L(K, M) p(K) dK``, reported on a rescaled axis.

    Likelihoods are divided by ``exp(log_scale)`` before integration; by
    default ``log_scale`` is the largest log-likelihood at the design points.
    """
    model = _check_model(data, model)
    d = 1 + len(model)
    if n == 0:
        prior = evidence_posterior(None, d, n=0)
        return EvidencePosterior(prior.mean, prior.variance, 0.0 if log_scale is None else log_scale)
    if points is None:
        points = design_points(d, method.upper(), n, seed, pool_size)
    points = points[:n]
    logl = log_conditional_evidence(data, model, points)
    scale = float(np.max(logl)) if log_scale is None else float(log_scale)
    post = evidence_posterior(lambda X: np.exp(logl - scale), d, method, n, points=points)
    return EvidencePosterior(post.mean, post.variance, scale)


def propagate(results, sample_count, seed, max_draw_factor=100):
    """Sample posterior model probabilities ``L_i / sum_j L_j`` from per-model posteriors.

    Every model's draw is conditioned on being positive by redrawing its
    nonpositive values; since models are independent this has the same
    distribution as redrawing whole vectors. A model needing more than
    ``max_draw_factor`` draws per accepted sample (over 99% rejected)
    raises :class:`DegeneratePosteriorError`.
    """
    if sample_count < 1 or not results:
        raise ValueError("need at least one sample and one model")
    rng = make_rng(seed, 0x70726F70)
    means = np.array([r.mean for r in results], dtype=float)
    sds = np.array([np.sqrt(r.variance) for r in results], dtype=float)
    draws = np.empty((sample_count, len(results)))
    for i, (m, s) in enumerate(zip(means, sds)):
        col = m + s * rng.standard_normal(sample_count)
        bad = col <= 0
        drawn = sample_count
        while bad.any():
            if drawn >= max_draw_factor * sample_count or s == 0.0:
                raise DegeneratePosteriorError(
                    f"model {i}: posterior N({m:.3g}, {s:.3g}^2) rejects over 99% of draws"
                )
            redraw = m + s * rng.standard_normal(int(bad.sum()))
            drawn += redraw.size
            col[bad] = redraw
            bad = col <= 0
        draws[:, i] = col
    probs = draws / draws.sum(axis=1, keepdims=True)
    winners = np.argmax(probs, axis=1)
    map_model = int(np.argmax(np.bincount(winners, minlength=len(results))))
    stability = float(np.mean(winners == map_model))
    quantiles = np.percentile(probs, QUANTILES, axis=0)
    return EvidenceResult(list(results), probs, stability, map_model, quantiles)


def run_model_selection(data, ns, method="FWBQ", seed=0, pool_size=10_000, sample_count=10_000,
                        models=None):
    """Evidence posteriors for every model at each ``n`` and their propagated probabilities.

    A single common ``log_scale`` (the largest log-likelihood seen at the
    largest ``n``) is used for every model and every ``n``.

    Returns ``(models, {n: EvidenceResult})``.
    """
    models = enumerate_models(data.n_enzymes) if models is None else [tuple(m) for m in models]
    ns = sorted(set(int(n) for n in ns))
    n_max = ns[-1]
    points = {d: design_points(d, method.upper(), n_max, seed, pool_size)
              for d in sorted({1 + len(m) for m in models})}
    logls = [log_conditional_evidence(data, m, points[1 + len(m)]) for m in models]
    scale = max(float(np.max(l)) for l in logls)
    out = {}
    for n in ns:
        per_model = [
            model_evidence(data, m, method, n, seed, pool_size, log_scale=scale,
                           points=points[1 + len(m)])
            for m in models
        ]
        out[n] = propagate(per_model, sample_count, seed)
    return models, out


def synthetic_data(n_enzymes=10, n_steps=20, true_model=(1, 4), noise=0.2, seed=0):
    """Seeded longitudinal dataset generated from the gradient-matching model.

    Enzyme and unphosphorylated-substrate series are smooth positive curves.
    The phosphorylated substrate is integrated forward with Euler steps of
    the Michaelis-Menten drift implied by ``true_model``, with Michaelis-
    Menten constants drawn from the truncated prior and Gaussian noise on
    the gradients.
    """
    rng = make_rng(seed, 0x73796E)
    t = np.linspace(0.0, 4.0, n_steps + 1)

    def smooth(count):
        level = rng.uniform(0.5, 1.5, size=(count, 1))
        amp = level * rng.uniform(0.2, 0.8, size=(count, 1))
        freq = rng.uniform(0.5, 2.0, size=(count, 1))
        phase = rng.uniform(0, 2 * np.pi, size=(count, 1))
        return level + amp * np.sin(freq * t[None, :] + phase)

    y_e = smooth(n_enzymes)
    y_s = smooth(1)[0]
    K = TruncatedGaussian(1 + len(true_model)).sample(1, seed, 1)[0]
    V = rng.uniform(0.5, 1.5, size=1 + len(true_model))
    y_star = np.empty_like(t)
    y_star[0] = 1.0
    for n in range(n_steps):
        drift = -V[0] * y_star[n] / (y_star[n] + K[0])
        for c, j in enumerate(true_model, start=1):
            drift += V[c] * y_e[j, n] * y_s[n] / (y_s[n] + K[c])
        y_star[n + 1] = max(y_star[n] + (t[n + 1] - t[n]) * (drift + noise * rng.standard_normal()), 1e-3)
    return LongitudinalData(t, y_s, y_star, y_e)


def write_table(data, path):
    """Comma-separated table with header ``time,yS,ySstar,yE1star,...``."""
    header = ["time", "yS", "ySstar"] + [f"yE{j + 1}star" for j in range(data.n_enzymes)]
    cols = np.vstack([data.times, data.y_s, data.y_s_star, data.y_e_star])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in cols.T:
            writer.writerow([repr(float(v)) for v in row])


def read_table(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty table")
    header = [h.strip() for h in rows[0]]
    if header[:3] != ["time", "yS", "ySstar"] or any(
        h != f"yE{j + 1}star" for j, h in enumerate(header[3:])
    ):
        raise ValueError(f"{path}: unexpected header {header}")
    vals = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    return LongitudinalData(vals[:, 0], vals[:, 1], vals[:, 2], vals[:, 3:].T)
