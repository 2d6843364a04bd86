"""Experiment driver: convergence, posterior, random-feature and model-selection tables.

Usage::

    python3 -m fwbq --experiment convergence --methods MC,FW,FWBQ --n-max 100
    python3 -m fwbq --experiment rff --rff-d 50,5000 --format json --out rff.json
    python3 -m fwbq --experiment model-select --n-max 200

Output schemas
--------------
``convergence``, ``posterior-demo`` and ``rff`` emit :class:`ResultRow`;
``model-select`` emits :class:`ModelRow`. CSV output has a header row
naming the dataclass fields in order, floats in shortest round-trip form,
booleans as ``true``/``false`` and missing values as empty cells. JSON
output is ``{"kind": "result" | "model", "rows": [{field: value}, ...]}``
with ``null`` for missing values. :func:`parse` reads either back.

Density config
--------------
``--density-config`` names a ``key = value`` file (``#`` starts a
comment)::

    family = mixture          # mixture | random-mixture | truncated
    dim = 2
    weights = 0.3, 0.7
    mean.0 = 0, 0
    cov.0 = 1, 0, 0, 1        # d*d entries, or one value for c * I
    mean.1 = 2, 1
    cov.1 = 0.5
    # random-mixture reads: components, dim, seed
    # truncated reads: dim

Without a config the target is the seeded 20-component 2-D mixture
``random_mixture(20, 2, seed=0)``; ``--seed`` drives the candidate pools
and test functions, not the target.

Exit status is 0 on success, 2 on a configuration error and 3 on a
numerical failure.
"""

import argparse
import csv
import io
import json
import logging
import sys
import time
import typing
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from .density import make_rng, random_mixture, read_density_config
from .evidence import read_table, run_model_selection, synthetic_data
from .exceptions import FWBQError
from .kernel import EqKernel, rff_sample
from .mean_element import mean_element
from .quadrature import (
    BQ_METHODS,
    KernelExpansion,
    QuadratureRule,
    bq_rule,
    mmd_squared,
    posterior,
)
from .selector import SelectionConfig, select

log = logging.getLogger("fwbq")

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "ModelRow",
    "n_grid",
    "run_convergence",
    "run_posterior_demo",
    "run_rff",
    "run_model_select",
    "emit",
    "parse",
    "main",
]

METHODS = ("MC", "FW", "FWLS", "FWBQ", "FWLSBQ", "SBQ")
EXPERIMENTS = ("convergence", "posterior-demo", "rff", "model-select")
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

DEFAULT_METHODS = {
    "convergence": ("MC", "FW", "FWLS", "FWBQ", "FWLSBQ", "SBQ"),
    "posterior-demo": ("FWBQ", "FWLSBQ", "SBQ"),
    "rff": ("FWLS", "FWLSBQ"),
    "model-select": ("FWBQ",),
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "convergence"
    methods: tuple = DEFAULT_METHODS["convergence"]
    n_max: int = 100
    pool_size: int = 10_000
    seeds: tuple = (0,)
    amplitude: float = 1.0
    lengthscale: float = 0.8
    rff_features: tuple = ()
    density: object = None
    data: object = None
    models: tuple = None
    test_centres: int = 5
    sample_count: int = 10_000
    timing: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if not self.methods:
            raise ValueError("need at least one method")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {', '.join(METHODS)}")
        if self.n_max < 1 or self.pool_size < 1:
            raise ValueError("--n-max and --pool-size must be at least 1")
        if not self.seeds or min(self.seeds) < 0:
            raise ValueError("seeds must be nonnegative")
        if self.amplitude <= 0 or self.lengthscale <= 0:
            raise ValueError("--lambda and --sigma must be positive")
        if any(D < 1 for D in self.rff_features):
            raise ValueError("--rff-d values must be positive")
        if self.experiment == "rff" and not self.rff_features:
            raise ValueError("the rff experiment needs --rff-d")

    def target(self):
        return random_mixture(20, 2, seed=0) if self.density is None else self.density

    def kernel(self):
        return EqKernel(self.amplitude, self.lengthscale, self.target().dim)


@dataclass(frozen=True)
class ResultRow:
    """One (method, n, seed) measurement.

    ``mmd2`` is always under the exact kernel. Posterior columns are empty
    for methods without BQ weights; ``abs_error`` and ``covered`` only
    appear when the true integral is known.
    """

    method: str
    n: int
    mmd2: float
    abs_error: Optional[float] = None
    posterior_mean: Optional[float] = None
    posterior_variance: Optional[float] = None
    covered: Optional[bool] = None
    seed: int = 0
    wall_clock_ms: Optional[float] = None


@dataclass(frozen=True)
class ModelRow:
    """Box-plot statistics of one model's posterior probability at one ``n``."""

    method: str
    n: int
    model: str
    evidence_mean: float
    evidence_variance: float
    log_scale: float
    q2_5: float
    q25: float
    q50: float
    q75: float
    q97_5: float
    map_stability: float
    is_map: bool
    seed: int = 0


def n_grid(n_max):
    """Logarithmic grid 1, 2, 3, 5, 7, 10, 15, 20, 30, 50, 70, 100, ... capped by ``n_max``.

    ``n_max`` itself is always the last entry.
    """
    out = []
    scale = 1
    while scale <= n_max:
        for m in (1, 1.5, 2, 3, 5, 7):
            n = m * scale
            if n == int(n) and n <= n_max:
                out.append(int(n))
        scale *= 10
    if out[-1] != n_max:
        out.append(n_max)
    return out


def _is_bq(method):
    return method in BQ_METHODS


def _rule(trace, method, n, k, mu):
    pts = trace.points[:n]
    if _is_bq(method):
        return bq_rule(pts, k, mu, method)
    if method == "MC":
        return QuadratureRule(pts, np.full(n, 1.0 / n), method)
    return QuadratureRule(pts, trace.prefix(n).fw_weights, method)


def _trace_rows(method, trace, k, mu, exact_k, exact_mu, cfg, seed, f=None, truth=None,
                select_ms=0.0, label=None):
    rows = []
    for n in n_grid(len(trace)):
        t0 = time.perf_counter()
        rule = _rule(trace, method, n, k, mu)
        mmd2 = mmd_squared(rule, exact_k, exact_mu)
        mean = var = err = covered = None
        if _is_bq(method):
            fx = f(rule.points) if f is not None else np.zeros(n)
            post = posterior(rule.points, fx, k, mu)
            var = post.variance
            if f is not None:
                mean = post.mean
        elif f is not None:
            mean = rule(f)
        if truth is not None and mean is not None:
            err = abs(mean - truth)
            if var is not None:
                covered = bool(err <= 1.96 * np.sqrt(var))
        ms = (time.perf_counter() - t0) * 1e3 + select_ms if cfg.timing else None
        rows.append(ResultRow(label or method, n, mmd2, err, mean, var, covered, seed, ms))
    return rows


def _select_timed(method, p, k, mu, cfg, seed):
    t0 = time.perf_counter()
    trace = select(method, p, k, mu, SelectionConfig(cfg.n_max, cfg.pool_size, seed=seed))
    return trace, (time.perf_counter() - t0) * 1e3


def _sorted(rows):
    return sorted(rows, key=lambda r: (r.seed, r.method, r.n))


def run_convergence(cfg):
    """MMD^2 on the n-grid for each method; BQ methods also report the posterior variance.

    One trace of length ``n_max`` is selected per (method, seed), so the
    point sets are nested across ``n``.
    """
    p, k = cfg.target(), cfg.kernel()
    mu = mean_element(p, k)
    rows = []
    for seed in cfg.seeds:
        for method in cfg.methods:
            trace, ms = _select_timed(method, p, k, mu, cfg, seed)
            rows += _trace_rows(method, trace, k, mu, k, mu, cfg, seed, select_ms=ms)
    return _sorted(rows)


def known_integrand(p, k, seed, centres=5, coeffs=None):
    """Kernel combination ``sum_j c_j k(., y_j)`` with centres drawn from ``p``.

    Coefficients are standard normal unless given.
    """
    rng = make_rng(seed, 0x66, 1)
    Y = p.sample(centres, seed, 0x66)
    c = rng.standard_normal(centres) if coeffs is None else np.asarray(coeffs, dtype=float)
    return KernelExpansion(Y, c, k)


def run_posterior_demo(cfg, coeffs=None):
    """BQ posteriors for a known-integral test function, with ±1.96 sd coverage.

    ``coeffs`` overrides the random coefficients of the test function
    (all zeros gives ``f = 0``).
    """
    p, k = cfg.target(), cfg.kernel()
    mu = mean_element(p, k)
    rows = []
    for seed in cfg.seeds:
        f = known_integrand(p, k, seed, cfg.test_centres, coeffs)
        truth = f.integral(mu)
        for method in cfg.methods:
            trace, ms = _select_timed(method, p, k, mu, cfg, seed)
            rows += _trace_rows(method, trace, k, mu, k, mu, cfg, seed, f, truth, ms)
    return _sorted(rows)


def run_rff(cfg):
    """Selection and weights under the exact kernel and under random-feature kernels.

    Rows for a ``D``-feature kernel are labelled ``<method>-RFF<D>``. The
    ``mmd2`` column is always measured in the exact kernel's norm; posterior
    columns belong to the kernel that produced the weights.
    """
    p, k = cfg.target(), cfg.kernel()
    mu = mean_element(p, k)
    rows = []
    for seed in cfg.seeds:
        for method in cfg.methods:
            trace, ms = _select_timed(method, p, k, mu, cfg, seed)
            rows += _trace_rows(method, trace, k, mu, k, mu, cfg, seed, select_ms=ms)
            for D in cfg.rff_features:
                kr = rff_sample(cfg.lengthscale, cfg.amplitude, p.dim, D, seed)
                mur = mean_element(p, kr)
                trace, ms = _select_timed(method, p, kr, mur, cfg, seed)
                rows += _trace_rows(method, trace, kr, mur, k, mu, cfg, seed, select_ms=ms,
                                    label=f"{method}-RFF{D}")
    return _sorted(rows)


def model_label(model):
    """``S`` for the substrate-only model, else ``E<j>`` or ``E<i>+E<j>`` (1-based)."""
    return "+".join(f"E{j + 1}" for j in model) or "S"


def run_model_select(cfg):
    """Posterior model probabilities on the n-grid for the synthetic (or given) dataset.

    Returns ``({n: EvidenceResult}, rows)``. Only the first BQ method in
    ``cfg.methods`` is used; ``cfg.models`` restricts the candidates.
    """
    method = next((m for m in cfg.methods if _is_bq(m)), None)
    if method is None:
        raise ValueError("model-select needs a BQ method (FWBQ, FWLSBQ or SBQ)")
    results, rows = {}, []
    for seed in cfg.seeds:
        data = synthetic_data(seed=seed) if cfg.data is None else cfg.data
        models, res = run_model_selection(data, n_grid(cfg.n_max), method, seed, cfg.pool_size,
                                          cfg.sample_count, cfg.models)
        results[seed] = res
        for n, r in res.items():
            for i, m in enumerate(models):
                q = r.quantiles[:, i]
                post = r.per_model[i]
                rows.append(ModelRow(method, n, model_label(m), post.mean, post.variance,
                                     post.log_scale, *map(float, q), r.map_stability,
                                     i == r.map_model, seed))
    out = results[cfg.seeds[0]] if len(cfg.seeds) == 1 else results
    return out, rows


# --------------------------------------------------------------------------
# tables

def _row_type(kind):
    return {"result": ResultRow, "model": ModelRow}[kind]


def _kind(rows):
    if rows and isinstance(rows[0], ModelRow):
        return "model"
    return "result"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _base_type(tp):
    args = [a for a in typing.get_args(tp) if a is not type(None)]
    return args[0] if args else tp


def _convert(text, tp):
    if text == "" and type(None) in typing.get_args(tp):
        return None
    base = _base_type(tp)
    if base is bool:
        if text not in ("true", "false"):
            raise ValueError(f"bad boolean {text!r}")
        return text == "true"
    return base(text)


def emit(rows, fmt="csv"):
    """Render rows as CSV or JSON text."""
    kind = _kind(rows)
    cls = _row_type(kind)
    names = [f.name for f in fields(cls)]
    if fmt == "json":
        body = [{k: _jsonable(v) for k, v in asdict(r).items()} for r in rows]
        return json.dumps({"kind": kind, "rows": body}, indent=1) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for r in rows:
        writer.writerow([_cell(getattr(r, n)) for n in names])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def parse(text, fmt="csv"):
    """Inverse of :func:`emit`; the row type is read from the header or ``kind``."""
    if fmt == "json":
        doc = json.loads(text)
        cls = _row_type(doc["kind"])
        return [cls(**r) for r in doc["rows"]]
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    for cls in (ResultRow, ModelRow):
        if header == [f.name for f in fields(cls)]:
            break
    else:
        raise ValueError(f"unrecognised header {header}")
    types = [f.type for f in fields(cls)]
    return [cls(*(_convert(c, t) for c, t in zip(cells, types))) for cells in reader if cells]


# --------------------------------------------------------------------------
# command line


def _int_list(text):
    """``3``, ``1,5,9`` or ``0-49``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty list {text!r}")
    return tuple(out)


def _method_list(text):
    return tuple(m.strip().upper() for m in text.split(",") if m.strip())


def build_parser():
    ap = argparse.ArgumentParser(prog="fwbq", description=__doc__.split("\n")[0])
    ap.add_argument("--experiment", choices=EXPERIMENTS, default="convergence")
    ap.add_argument("--methods", type=_method_list, default=None,
                    help="comma list from " + ",".join(METHODS))
    ap.add_argument("--n-max", type=int, default=100)
    ap.add_argument("--pool-size", type=int, default=10_000, help="candidates per step (M)")
    ap.add_argument("--seed", type=_int_list, default=(0,), help="seed, list or range a-b")
    ap.add_argument("--lambda", dest="amplitude", type=float, default=1.0)
    ap.add_argument("--sigma", dest="lengthscale", type=float, default=0.8)
    ap.add_argument("--rff-d", type=_int_list, default=(), help="feature counts, comma list")
    ap.add_argument("--density-config", default=None)
    ap.add_argument("--data", default=None, help="model-select: CSV table instead of synthetic data")
    ap.add_argument("--samples", type=int, default=10_000,
                    help="model-select: probability samples per n")
    ap.add_argument("--out", default="-")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--timing", action="store_true", help="fill wall_clock_ms (breaks byte-identity)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args):
    density = read_density_config(args.density_config) if args.density_config else None
    data = read_table(args.data) if args.data else None
    methods = args.methods or DEFAULT_METHODS[args.experiment]
    return ExperimentConfig(
        experiment=args.experiment,
        methods=methods,
        n_max=args.n_max,
        pool_size=args.pool_size,
        seeds=args.seed,
        amplitude=args.amplitude,
        lengthscale=args.lengthscale,
        rff_features=args.rff_d,
        density=density,
        data=data,
        sample_count=args.samples,
        timing=args.timing,
    )


RUNNERS = {
    "convergence": run_convergence,
    "posterior-demo": run_posterior_demo,
    "rff": run_rff,
    "model-select": lambda cfg: run_model_select(cfg)[1],
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except (ValueError, OSError) as exc:
        print(f"fwbq: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rows = RUNNERS[cfg.experiment](cfg)
    except FWBQError as exc:
        print(f"fwbq: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"fwbq: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = emit(rows, args.format)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        try:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"fwbq: cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    return 0
