import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special, stats

from fwbq.density import TruncatedGaussian
from fwbq.evidence import (
    EvidencePosterior,
    LongitudinalData,
    build_design,
    conditional_evidence,
    design_points,
    enumerate_models,
    log_conditional_evidence,
    model_evidence,
    propagate,
    read_table,
    run_model_selection,
    synthetic_data,
    write_table,
)
from fwbq.exceptions import DegeneratePosteriorError, IllPosedError
from fwbq.quadrature import IntegralPosterior


@pytest.fixture(scope="module")
def data():
    return synthetic_data()


def test_enumerate_models():
    models = enumerate_models(10)
    assert len(models) == 56
    assert len(set(models)) == 56
    assert models[0] == () and models[1] == (0,) and models[-1] == (8, 9)
    with pytest.raises(ValueError):
        enumerate_models(10, max_size=3)


def test_design_columns(data):
    Y, X = build_design(data, (2, 5), [0.7, 1.1, 0.4])
    yss, ys = data.y_s_star[:-1], data.y_s[:-1]
    np.testing.assert_allclose(Y, np.diff(data.y_s_star) / np.diff(data.times))
    np.testing.assert_allclose(X[:, 0], -yss / (yss + 0.7))
    np.testing.assert_allclose(X[:, 1], data.y_e_star[2, :-1] * ys / (ys + 1.1))
    np.testing.assert_allclose(X[:, 2], data.y_e_star[5, :-1] * ys / (ys + 0.4))


@pytest.mark.parametrize("model, K", [((), [0.7]), ((1, 4), [0.5, 1.2, 0.9]), ((3,), [1.1, 0.4])])
def test_evidence_matches_sigma_integral(data, model, K):
    # integrate V out analytically as a Gaussian, then sigma^2 against d sigma^2 / sigma^2
    Y, X = build_design(data, model, K)
    N, d = X.shape
    P = X @ np.linalg.solve(X.T @ X, X.T)
    cov = np.eye(N) + N * P
    r = Y - X @ np.ones(d)
    mode = np.log(r @ np.linalg.solve(cov, r) / N)
    val, _ = integrate.quad(
        lambda u: np.exp(stats.multivariate_normal(np.zeros(N), np.exp(u) * cov).logpdf(r)),
        mode - 12, mode + 12, epsabs=0, epsrel=1e-12, limit=200,
    )
    assert conditional_evidence(data, model, K) == pytest.approx(val, rel=1e-9)


def test_frozen_log_evidence(data):
    assert log_conditional_evidence(data, (1, 4), [0.5, 1.2, 0.9]) == pytest.approx(
        -6.98998528284668, rel=1e-12
    )


def test_batched_evidence(data):
    K = np.array([[0.5, 1.0], [1.5, 0.2]])
    out = log_conditional_evidence(data, (7,), K)
    assert out.shape == (2,)
    assert out[1] == pytest.approx(log_conditional_evidence(data, (7,), K[1]), rel=1e-14)


def test_invalid_models(data):
    with pytest.raises(ValueError):
        log_conditional_evidence(data, (1, 1), [1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        log_conditional_evidence(data, (10,), [1.0, 1.0])
    with pytest.raises(ValueError):
        log_conditional_evidence(data, (1,), [1.0])
    with pytest.raises(ValueError):
        log_conditional_evidence(data, (1,), [1.0, -1.0])


def test_rank_deficient_design(data):
    ye = data.y_e_star.copy()
    ye[1] = ye[0]
    twin = LongitudinalData(data.times, data.y_s, data.y_s_star, ye)
    with pytest.raises(IllPosedError):
        log_conditional_evidence(twin, (0, 1), [1.0, 0.5, 0.5])


def test_data_validation(data):
    t = data.times
    with pytest.raises(ValueError):
        LongitudinalData(t[::-1], data.y_s, data.y_s_star, data.y_e_star)
    with pytest.raises(ValueError):
        LongitudinalData(t, data.y_s[:-1], data.y_s_star, data.y_e_star)
    with pytest.raises(ValueError):
        LongitudinalData(t, -data.y_s, data.y_s_star, data.y_e_star)
    assert data.n_steps == 20 and data.n_enzymes == 10


def test_synthetic_data_reproducible():
    a, b = synthetic_data(seed=3), synthetic_data(seed=3)
    np.testing.assert_array_equal(a.y_s_star, b.y_s_star)
    assert not np.array_equal(a.y_s_star, synthetic_data(seed=4).y_s_star)


def test_table_round_trip(tmp_path, data):
    path = tmp_path / "data.csv"
    write_table(data, path)
    back = read_table(path)
    for name in ("times", "y_s", "y_s_star", "y_e_star"):
        np.testing.assert_array_equal(getattr(back, name), getattr(data, name))
    path.write_text("t,yS\n1,2\n")
    with pytest.raises(ValueError):
        read_table(path)


def test_design_points_shared_and_readonly():
    a = design_points(2, "FWBQ", 5, 0, 300)
    assert a is design_points(2, "FWBQ", 5, 0, 300)
    assert np.all(TruncatedGaussian(2).in_support(a))
    with pytest.raises(ValueError):
        a[0, 0] = 1.0


@pytest.mark.parametrize("model", [(), (2,)])
def test_bq_evidence_calibrated(data, model):
    p = TruncatedGaussian(1 + len(model))
    if model:
        truth, _ = integrate.dblquad(
            lambda b, a: conditional_evidence(data, model, [a, b]) * p.pdf([a, b]),
            0, 10, 0, 10, epsabs=0, epsrel=1e-10,
        )
    else:
        truth, _ = integrate.quad(
            lambda t: conditional_evidence(data, model, [t]) * p.pdf(t), 0, 12, epsabs=0, epsrel=1e-12
        )
    post = model_evidence(data, model, n=50, pool_size=2000)
    assert isinstance(post, EvidencePosterior)
    scaled = truth * np.exp(-post.log_scale)
    assert abs(post.mean - scaled) <= 3 * post.std


def test_evidence_prior_at_zero_points(data):
    post = model_evidence(data, (1,), n=0)
    assert post.mean == 0.0 and post.variance == pytest.approx(0.629908394588042**2, rel=1e-12)


def test_propagate_single_model():
    res = propagate([IntegralPosterior(2.0, 0.5)], 500, 0)
    np.testing.assert_array_equal(res.probability_samples, 1.0)
    np.testing.assert_array_equal(res.widths, 0.0)
    assert res.map_stability == 1.0 and res.map_model == 0


@given(st.lists(st.tuples(st.floats(0.1, 5), st.floats(0, 1)), min_size=2, max_size=6),
       st.integers(0, 2**31))
def test_propagate_probabilities(params, seed):
    res = propagate([IntegralPosterior(m, s * s) for m, s in params], 300, seed)
    probs = res.probability_samples
    assert np.all(probs > 0)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, rtol=1e-12)
    assert 0 < res.map_stability <= 1
    assert np.all(np.diff(res.quantiles, axis=0) >= 0)


def test_propagate_zero_variance_is_deterministic():
    res = propagate([IntegralPosterior(1.0, 0.0), IntegralPosterior(3.0, 0.0)], 100, 0)
    np.testing.assert_allclose(res.probability_samples, [[0.25, 0.75]] * 100)


def test_propagate_degenerate():
    with pytest.raises(DegeneratePosteriorError):
        propagate([IntegralPosterior(1.0, 0.1), IntegralPosterior(-1.0, 0.01)], 100, 0)
    with pytest.raises(DegeneratePosteriorError):
        propagate([IntegralPosterior(-1.0, 0.0)], 100, 0)
    with pytest.raises(ValueError):
        propagate([], 100, 0)


def test_run_model_selection_small(data):
    models, res = run_model_selection(data, [5, 20], pool_size=500, sample_count=500,
                                      models=[(), (1,), (4,), (1, 4)])
    assert models == [(), (1,), (4,), (1, 4)]
    assert set(res) == {5, 20}
    scales = {r.log_scale for out in res.values() for r in out.per_model}
    assert len(scales) == 1
    assert res[20].quantiles.shape == (5, 4)


def small_data(N=3, seed=0, enzymes=1, constant=False):
    rng = np.random.default_rng(seed)
    t = np.cumsum(rng.uniform(0.5, 1.5, N + 1))
    ys = rng.uniform(0.5, 1.5, N + 1)
    yss = np.full(N + 1, 0.8) if constant else rng.uniform(0.5, 1.5, N + 1)
    return LongitudinalData(t, ys, yss, rng.uniform(0.5, 1.5, (enzymes, N + 1)))


def test_design_reference_cases():
    flat = small_data(constant=True)
    Y, X = build_design(flat, (0,), [1.0, 1.0])
    np.testing.assert_array_equal(Y, 0.0)
    _, X = build_design(small_data(), (0,), [1e8, 1.0])
    assert np.max(np.abs(X[:, 0])) <= 1e-7


def test_design_by_hand():
    d = LongitudinalData([0.0, 1.0, 3.0, 4.0], [1.0, 2.0, 1.0, 1.0], [0.5, 1.0, 2.0, 2.5],
                         [[2.0, 1.0, 0.5, 1.0]])
    Y, X = build_design(d, (0,), [0.5, 1.0])
    np.testing.assert_allclose(Y, [0.5, 0.5, 0.5])
    np.testing.assert_allclose(X[:, 0], [-0.5, -2 / 3, -0.8])
    np.testing.assert_allclose(X[:, 1], [1.0, 2 / 3, 0.25])


def test_residual_positive_without_signal():
    for seed in range(100):
        d = small_data(N=6, seed=seed, enzymes=2, constant=True)
        assert np.isfinite(log_conditional_evidence(d, (0, 1), [0.7, 1.0, 1.3]))


def _step_by_step(Y, X):
    N, d = X.shape
    ones = np.ones(d)
    omega = (1 + 1 / N) * X.T @ X
    V = np.linalg.solve(omega, X.T @ X @ ones / N + X.T @ Y)
    b = 0.5 * (Y @ Y + ones @ X.T @ X @ ones / N - V @ omega @ V)
    return (2 * np.pi) ** (-N / 2) * (N + 1) ** (-d / 2) * np.exp(special.gammaln(N / 2)) * b ** (-N / 2)


def test_evidence_step_by_step():
    d = small_data(N=4, seed=3)
    K = [0.6, 1.4]
    Y, X = build_design(d, (0,), K)
    assert conditional_evidence(d, (0,), K) == pytest.approx(_step_by_step(Y, X), rel=1e-12)
    # scaling the gradients: recompute with cY
    scaled = LongitudinalData(d.times, d.y_s, d.y_s_star * 1.0, d.y_e_star)
    Y2, X2 = build_design(scaled, (0,), K)
    assert _step_by_step(3.0 * Y2, X2) > 0


def test_evidence_invariant_to_row_order(data):
    K = [0.6, 1.4, 0.9]
    Y, X = build_design(data, (2, 7), K)
    perm = np.random.default_rng(0).permutation(len(Y))
    assert _step_by_step(Y[perm], X[perm]) == pytest.approx(
        conditional_evidence(data, (2, 7), K), rel=1e-10
    )


def test_constant_likelihood():
    from fwbq.evidence import evidence_posterior

    post = evidence_posterior(lambda K: np.full(len(K), 3.0), 1, "FWBQ", 20, pool_size=2000)
    assert abs(post.mean - 3.0) <= 3e-3


def test_prior_variance_one_dimension(data):
    assert abs(model_evidence(data, (), n=0).variance - 0.629907) <= 5e-5


def test_variance_decreases(data):
    a = model_evidence(data, (3,), n=10, pool_size=2000)
    b = model_evidence(data, (3,), n=50, pool_size=2000)
    assert b.variance < a.variance


def test_propagate_symmetric_pair():
    post = IntegralPosterior(1.0, 0.04)
    res = propagate([post, post], 10_000, 0)
    assert res.map_stability == pytest.approx(0.5, abs=0.05)


def test_propagate_permutation_equivariant():
    posts = [IntegralPosterior(1.0, 0.0), IntegralPosterior(2.0, 0.0), IntegralPosterior(5.0, 0.0)]
    a = propagate(posts, 10, 0).probability_samples
    b = propagate(posts[::-1], 10, 0).probability_samples
    np.testing.assert_allclose(a, b[:, ::-1], rtol=1e-15)
