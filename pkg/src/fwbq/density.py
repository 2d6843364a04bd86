"""Target densities: Gaussian mixtures and the unit-location truncated Gaussian.

Both families support vectorised pdf evaluation and seeded i.i.d. sampling.
Samplers never share generator state: every call builds its own generator
from ``(seed, *context)``.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special, stats

__all__ = [
    "GaussianMixture",
    "TruncatedGaussian",
    "make_rng",
    "random_mixture",
    "density_from_config",
    "read_density_config",
]


def make_rng(seed, *context):
    """Independent generator for ``seed`` and an optional integer call context."""
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, context)]))


def as_points(x, dim):
    """Return ``(points, single)`` with points of shape (n, dim).

    A scalar or a length-``dim`` vector is one point. For ``dim == 1`` a
    longer flat vector is read as a list of points.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        pts, single = x.reshape(1, 1), True
    elif x.ndim == 1:
        if x.size == dim:
            pts, single = x[None, :], True
        elif dim == 1:
            pts, single = x[:, None], False
        else:
            pts, single = x[None, :], True
    else:
        pts, single = x, False
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {x.shape}")
    return pts, single


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Mixture ``sum_l w_l N(mean_l, cov_l)`` in ``dim`` dimensions.

    Parameters
    ----------
    weights : (L,) array
        Positive component weights summing to one.
    means : (L, d) array
    covs : (L, d, d) array
        Symmetric positive definite covariances.
    """

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        mu = np.asarray(self.means, dtype=float)
        if mu.ndim == 1:
            mu = mu[:, None] if w.size > 1 else mu[None, :]
        cov = np.asarray(self.covs, dtype=float)
        if cov.ndim == 0:
            cov = cov.reshape(1, 1, 1)
        elif cov.ndim == 1:
            cov = cov[:, None, None]
        elif cov.ndim == 2:
            cov = cov[None]
        L, d = mu.shape
        if w.shape != (L,) or cov.shape != (L, d, d):
            raise ValueError("inconsistent mixture shapes")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be positive and sum to 1")
        if not np.allclose(cov, np.swapaxes(cov, 1, 2), rtol=0, atol=1e-14):
            raise ValueError("covariances must be symmetric")
        if np.any(np.linalg.eigvalsh(cov) <= 0):
            raise ValueError("covariances must be positive definite")
        for name, arr in (("weights", w), ("means", mu), ("covs", cov)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        chol = np.linalg.cholesky(cov)
        chol.setflags(write=False)
        object.__setattr__(self, "_chol", chol)

    @classmethod
    def single(cls, mean, cov):
        """One-component mixture, i.e. a plain Gaussian."""
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.asarray(cov, dtype=float)
        if cov.ndim < 2:
            cov = np.eye(mean.size) * cov
        return cls(np.ones(1), mean[None, :], cov[None])

    @property
    def dim(self):
        return self.means.shape[1]

    @property
    def n_components(self):
        return self.weights.size

    def mean(self):
        return self.weights @ self.means

    def component_pdfs(self, x):
        """(n, L) matrix of component densities (unweighted)."""
        pts, _ = as_points(x, self.dim)
        return np.column_stack(
            [stats.multivariate_normal(m, c).pdf(pts).reshape(-1)
             for m, c in zip(self.means, self.covs)]
        )

    def pdf(self, x):
        pts, single = as_points(x, self.dim)
        out = self.component_pdfs(pts) @ self.weights
        return out[0] if single else out

    def in_support(self, x):
        pts, _ = as_points(x, self.dim)
        return np.ones(len(pts), dtype=bool)

    def sample(self, count, seed, *context):
        """Categorical component draw followed by Cholesky-transformed normals."""
        if count < 0:
            raise ValueError("count must be nonnegative")
        rng = make_rng(seed, *context)
        labels = rng.choice(self.n_components, size=count, p=self.weights)
        z = rng.standard_normal((count, self.dim))
        return self.means[labels] + np.einsum("nij,nj->ni", self._chol[labels], z)

    def bounding_box(self, width=8.0):
        """Per-axis box covering every component to ``width`` standard deviations."""
        sd = np.sqrt(np.diagonal(self.covs, axis1=1, axis2=2))
        return (self.means - width * sd).min(axis=0), (self.means + width * sd).max(axis=0)


@dataclass(frozen=True)
class TruncatedGaussian:
    """``N(1, I/2)`` truncated to the nonnegative orthant ``[0, inf)^dim``."""

    dim: int
    location = 1.0
    variance = 0.5

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")

    @property
    def _axis_mass(self):
        # P(N(1, 1/2) >= 0) = Phi(sqrt(2)) = (1 + erf(1)) / 2
        return 0.5 * (1.0 + special.erf(1.0))

    def axis_pdf(self, t):
        t = np.asarray(t, dtype=float)
        dens = stats.norm.pdf(t, self.location, np.sqrt(self.variance)) / self._axis_mass
        return np.where(t >= 0, dens, 0.0)

    def pdf(self, x):
        pts, single = as_points(x, self.dim)
        out = np.prod(self.axis_pdf(pts), axis=1)
        return out[0] if single else out

    def in_support(self, x):
        pts, _ = as_points(x, self.dim)
        return np.all(pts >= 0, axis=1)

    def mean(self):
        s = np.sqrt(self.variance)
        a = -self.location / s
        return np.full(self.dim, self.location + s * stats.norm.pdf(a) / stats.norm.sf(a))

    def sample(self, count, seed, *context):
        """Per-axis rejection from the untruncated normal (acceptance ~0.92 per axis)."""
        if count < 0:
            raise ValueError("count must be nonnegative")
        rng = make_rng(seed, *context)
        out = np.empty(count * self.dim)
        filled = 0
        sd = np.sqrt(self.variance)
        while filled < out.size:
            need = out.size - filled
            draw = self.location + sd * rng.standard_normal(int(need * 1.1) + 8)
            draw = draw[draw >= 0][:need]
            out[filled:filled + draw.size] = draw
            filled += draw.size
        return out.reshape(count, self.dim)

    def bounding_box(self, width=8.0):
        return np.zeros(self.dim), np.full(self.dim, self.location + width * np.sqrt(self.variance))


def random_mixture(n_components=20, dim=2, seed=0):
    """Reproducible random mixture in the style of the 2-D simulation study.

    Means are uniform on ``[-3, 3]^dim``, covariances ``A A^T + 0.1 I`` with
    entries of ``A`` uniform on ``[-0.7, 0.7]``, and weights proportional to
    uniform draws on ``[0.5, 1.5]``.
    """
    rng = make_rng(seed, 0x6D6978)
    means = rng.uniform(-3.0, 3.0, size=(n_components, dim))
    A = rng.uniform(-0.7, 0.7, size=(n_components, dim, dim))
    covs = A @ np.swapaxes(A, 1, 2) + 0.1 * np.eye(dim)
    covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
    w = rng.uniform(0.5, 1.5, size=n_components)
    return GaussianMixture(w / w.sum(), means, covs)


def _floats(value):
    return [float(v) for v in value.replace(",", " ").split()]


def density_from_config(text):
    """Build a density from ``key = value`` lines.

    Recognised keys::

        family = mixture | random-mixture | truncated
        dim = 2
        # family = mixture
        weights = 0.4 0.6
        mean.1 = 0 0
        cov.1 = 1 0 0 1          # row-major d*d entries, or one value for c*I
        # family = random-mixture
        components = 20
        seed = 0

    Blank lines and ``#`` comments are ignored. Weights are renormalised.
    """
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg[key.lower()] = value
    family = cfg.get("family", "mixture").lower()
    try:
        dim = int(cfg["dim"])
    except KeyError:
        raise ValueError("density config needs 'dim'") from None
    if family == "truncated":
        return TruncatedGaussian(dim)
    if family == "random-mixture":
        return random_mixture(int(cfg.get("components", 20)), dim, int(cfg.get("seed", 0)))
    if family != "mixture":
        raise ValueError(f"unknown density family {family!r}")
    idx = sorted({k.split(".", 1)[1] for k in cfg if k.startswith("mean.")}, key=int)
    if not idx:
        raise ValueError("mixture config needs at least one 'mean.<i>' entry")
    means, covs = [], []
    for i in idx:
        m = _floats(cfg[f"mean.{i}"])
        c = _floats(cfg.get(f"cov.{i}", "1"))
        if len(m) != dim:
            raise ValueError(f"mean.{i} has {len(m)} entries, expected {dim}")
        if len(c) == 1:
            c = list((np.eye(dim) * c[0]).ravel())
        if len(c) != dim * dim:
            raise ValueError(f"cov.{i} needs 1 or {dim * dim} entries")
        means.append(m)
        covs.append(np.reshape(c, (dim, dim)))
    w = np.array(_floats(cfg["weights"]) if "weights" in cfg else [1.0] * len(idx))
    if w.size != len(idx):
        raise ValueError("number of weights does not match number of components")
    return GaussianMixture(w / w.sum(), np.array(means), np.array(covs))


def read_density_config(path):
    with open(path) as fh:
        return density_from_config(fh.read())
