import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from rowcov.errors import DimensionError, InvalidCovarianceError, InvalidInputError
from rowcov.linalg import grassmann_projector
from rowcov.sampling import (
    GAUSSIAN,
    Family,
    RngStream,
    SeparableCovariance,
    beta_cdf,
    beta_pdf,
    beta_quantile,
    beta_sf,
    sample_elliptical_Z,
    sample_haar_orthogonal,
    sample_matrix_normal,
    sample_stiefel_uniform,
)

# Frozen from the quadrature oracle below (a = b = 5).
BETA55_CDF = {0.1: 0.00089092, 0.3: 0.09880866, 0.5: 0.5, 0.7: 0.90119134, 0.9: 0.99910908}


def beta_cdf_quadrature(x, a, b):
    lognorm = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    val, _ = integrate.quad(lambda t: t ** (a - 1) * (1 - t) ** (b - 1), 0.0, x, epsabs=1e-14, epsrel=1e-13)
    return val / math.exp(lognorm)


# --- RngStream --------------------------------------------------------------


def test_stream_determinism():
    a = RngStream(7).spawn(3).generator().standard_normal(50)
    b = RngStream(7).spawn(3).generator().standard_normal(50)
    np.testing.assert_array_equal(a, b)
    c = RngStream(7).spawn(4).generator().standard_normal(50)
    d = RngStream(8).spawn(3).generator().standard_normal(50)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)


def test_stream_independent_of_execution_order():
    root = RngStream(11)
    serial = [root.spawn(i).generator().random() for i in range(64)]
    with ThreadPoolExecutor(4) as pool:
        parallel = list(pool.map(lambda i: root.spawn(i).generator().random(), reversed(range(64))))
    assert serial == parallel[::-1]


def test_stream_nesting_distinct():
    r = RngStream(1)
    assert r.spawn(0).spawn(1).key != r.spawn(1).spawn(0).key
    assert r.spawn(0).spawn(1).generator().random() != r.spawn(1).spawn(0).generator().random()


def test_stream_rejects_bad_seed():
    with pytest.raises(InvalidInputError):
        RngStream(-1)


# --- matrix normal ----------------------------------------------------------


def test_white_noise_variance():
    Y = sample_matrix_normal(None, None, SeparableCovariance.white(1000, 100), RngStream(0))
    m = Y.size
    assert abs(Y.var() - 1.0) <= 1.65 * math.sqrt(2 / m)


def test_spiked_row_variance():
    n, S = 5, 10_000
    c = np.eye(n)[0]
    cov = SeparableCovariance.spiked(3.0, c, p=1)
    draws = np.stack([sample_matrix_normal(None, None, cov, RngStream(1).spawn(s))[:, 0] for s in range(S)])
    v = draws.var(axis=0)
    target = np.array([4.0, 1, 1, 1, 1])
    assert np.all(np.abs(v - target) <= 3 * target * math.sqrt(2 / S))


def test_row_covariance_is_psi_times_sigma():
    n, S = 3, 20_000
    Psi = np.array([[2.0, 0.6, 0.0], [0.6, 1.0, -0.3], [0.0, -0.3, 1.5]])
    Sigma = np.array([[1.0, 0.5], [0.5, 2.0]])
    cov = SeparableCovariance(Sigma=Sigma, Psi=Psi)
    X = np.ones((n, 1))
    B = np.array([[1.0], [-2.0]])
    Ys = np.stack([sample_matrix_normal(X, B, cov, RngStream(2).spawn(s)) for s in range(S)])
    np.testing.assert_allclose(Ys.mean(axis=0), X @ B.T, atol=0.05)
    # Cov(y_0, y_1) ~ psi_01 * Sigma
    s = np.sqrt(np.diag(Sigma))
    for i, j in [(0, 1), (1, 2), (2, 2)]:
        emp = np.einsum("sk,sl->kl", Ys[:, i] - Ys[:, i].mean(0), Ys[:, j] - Ys[:, j].mean(0)) / S
        se = np.sqrt((Psi[i, i] * Psi[j, j] * np.outer(s**2, s**2) + (Psi[i, j] * Sigma) ** 2) / S)
        assert np.all(np.abs(emp - Psi[i, j] * Sigma) <= 4 * se)


def test_covariance_validation():
    with pytest.raises(InvalidCovarianceError) as ei:
        SeparableCovariance(Sigma=np.eye(2), Psi=np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert ei.value.kind == "invalid_covariance"
    with pytest.raises(InvalidCovarianceError):
        SeparableCovariance(Sigma=np.array([[1.0, 0.3], [0.0, 1.0]]), Psi=np.eye(2))
    with pytest.raises(InvalidCovarianceError):
        SeparableCovariance.spiked(-1.0, np.array([1.0, 0.0]), p=2)
    with pytest.raises(DimensionError):
        sample_matrix_normal(np.ones((3, 1)), None, SeparableCovariance.white(3, 2), RngStream(0))


def test_spiked_expands():
    c = np.array([0.6, 0.8])
    cov = SeparableCovariance.spiked(2.0, c, p=3)
    np.testing.assert_allclose(cov.psi_matrix(), np.eye(2) + 2 * np.outer(c, c))
    np.testing.assert_allclose(cov.psi_sqrt() @ cov.psi_sqrt(), cov.psi_matrix(), atol=1e-12)


# --- Stiefel / Haar -----------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 10), data=st.data())
def test_stiefel_orthonormal(seed, n, data):
    p = data.draw(st.integers(1, n))
    W = sample_stiefel_uniform(n, p, RngStream(seed))
    np.testing.assert_allclose(W.T @ W, np.eye(p), atol=1e-10)


def test_stiefel_one_by_one_signs():
    vals = np.array([sample_stiefel_uniform(1, 1, RngStream(3).spawn(s))[0, 0] for s in range(4000)])
    assert set(np.round(vals, 12)) == {-1.0, 1.0}
    assert abs(np.mean(vals > 0) - 0.5) < 3 * 0.5 / math.sqrt(4000)


def test_stiefel_row_norm_is_beta():
    n, p, S = 10, 3, 100_000
    root = RngStream(4)
    w1 = np.array([np.sum(sample_stiefel_uniform(n, p, root.spawn(s))[0] ** 2) for s in range(S)])
    assert stats.kstest(w1, stats.beta(p / 2, (n - p) / 2).cdf).statistic <= 0.01


def test_stiefel_mean_zero():
    n, p, S = 6, 2, 20_000
    Ws = np.stack([sample_stiefel_uniform(n, p, RngStream(5).spawn(s)) for s in range(S)])
    se = Ws.std(axis=0) / math.sqrt(S)
    assert np.all(np.abs(Ws.mean(axis=0)) <= 3.5 * se)


def test_stiefel_errors():
    with pytest.raises(DimensionError):
        sample_stiefel_uniform(2, 3, RngStream(0))


def test_haar_orthogonal():
    Q = sample_haar_orthogonal(7, RngStream(0))
    np.testing.assert_allclose(Q.T @ Q, np.eye(7), atol=1e-12)
    # first-column entry squared is beta(1/2, (n-1)/2)
    x = np.array([sample_haar_orthogonal(5, RngStream(6).spawn(s))[0, 0] ** 2 for s in range(20_000)])
    assert stats.kstest(x, stats.beta(0.5, 2.0).cdf).statistic <= 0.015


def test_stochastic_representation_matches_stiefel_form():
    # U U^T from Psi^{1/2} Z matches E Lambda^{1/2} W (W^T Lambda W)^{-1} W^T Lambda^{1/2} E^T
    n, p, S = 8, 3, 10_000
    g = np.random.default_rng(0)
    E = np.linalg.qr(g.standard_normal((n, n)))[0]
    lam = np.array([5.0, 3.0, 2.0, 1.0, 1.0, 0.5, 0.5, 0.25])
    Psi = (E * lam) @ E.T
    c = np.ones(n) / math.sqrt(n)
    cov = SeparableCovariance(Sigma=np.eye(p), Psi=Psi)
    direct = np.empty(S)
    rep = np.empty(S)
    for s in range(S):
        Y = sample_matrix_normal(None, None, cov, RngStream(7).spawn(s))
        direct[s] = c @ grassmann_projector(Y).G @ c
        W = sample_stiefel_uniform(n, p, RngStream(8).spawn(s))
        M = (np.sqrt(lam)[:, None] * W) @ np.linalg.solve(W.T @ (lam[:, None] * W), W.T * np.sqrt(lam))
        rep[s] = c @ E @ M @ E.T @ c
    assert stats.ks_2samp(direct, rep).statistic <= 0.02


# --- elliptical families ------------------------------------------------------


def test_gaussian_family_is_standard_normal():
    a = sample_elliptical_Z(4, 3, GAUSSIAN, RngStream(9))
    b = RngStream(9).generator().standard_normal((4, 3))
    np.testing.assert_array_equal(a, b)


def test_zero_contamination_is_gaussian():
    a = sample_elliptical_Z(4, 3, Family.scale_contaminated(0.0, 25.0), RngStream(9))
    np.testing.assert_array_equal(a, sample_elliptical_Z(4, 3, GAUSSIAN, RngStream(9)))


def test_matrix_t_heavier_tails():
    S = 100_000
    t = np.array([sample_elliptical_Z(1, 1, Family.matrix_t(3), RngStream(10).spawn(s))[0, 0] for s in range(S)])
    z = np.array([sample_elliptical_Z(1, 1, GAUSSIAN, RngStream(11).spawn(s))[0, 0] for s in range(S)])
    assert stats.kurtosis(t) > stats.kurtosis(z) + 1.0


@pytest.mark.parametrize("family", [GAUSSIAN, Family.matrix_t(3), Family.scale_contaminated(0.2, 9.0)])
def test_direction_uniform_on_sphere(family):
    # moments of the normalized vec(Z): E[u_k^2] = 1/m and E[u_k^4] = 3/(m(m+2))
    n, p, S = 3, 2, 20_000
    m = n * p
    U = np.stack([sample_elliptical_Z(n, p, family, RngStream(12).spawn(s)).ravel() for s in range(S)])
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    np.testing.assert_allclose((U**2).mean(axis=0), 1 / m, atol=4 * math.sqrt(2 / (m * m * S)))
    assert abs((U**4).mean() - 3 / (m * (m + 2))) < 0.004
    np.testing.assert_allclose(U.mean(axis=0), 0, atol=4 / math.sqrt(m * S))


def test_family_parse_and_validation():
    assert Family.parse("gaussian") == GAUSSIAN
    assert Family.parse("matrix_t(3)") == Family.matrix_t(3)
    assert Family.parse(" scale_contaminated(0.1, 9) ") == Family.scale_contaminated(0.1, 9)
    assert str(Family.matrix_t(3)) == "matrix_t(3)"
    for bad in ["cauchy", "matrix_t", "matrix_t(-1)", "scale_contaminated(2,1)", "scale_contaminated(0.1,0)"]:
        with pytest.raises(InvalidInputError):
            Family.parse(bad)


# --- beta distribution --------------------------------------------------------


def test_beta_cdf_matches_quadrature_oracle():
    for x, frozen in BETA55_CDF.items():
        assert beta_cdf(x, 5, 5) == pytest.approx(beta_cdf_quadrature(x, 5, 5), abs=1e-8)
        assert beta_cdf(x, 5, 5) == pytest.approx(frozen, abs=1e-8)
    for x in np.linspace(0.01, 0.99, 25):
        assert beta_cdf(x, 5, 5) == pytest.approx(beta_cdf_quadrature(x, 5, 5), abs=1e-8)
        assert beta_cdf(x, 4, 5.5) == pytest.approx(beta_cdf_quadrature(x, 4, 5.5), abs=1e-8)


def test_beta_sf_complements_cdf():
    x = np.linspace(0, 1, 41)
    np.testing.assert_allclose(beta_cdf(x, 2.5, 3) + beta_sf(x, 2.5, 3), 1.0, atol=1e-15)
    assert beta_sf(0.9999, 2, 20) > 0


def test_beta_pdf_against_scipy():
    x = np.linspace(0.01, 0.99, 11)
    np.testing.assert_allclose(beta_pdf(x, 4, 5.5), stats.beta(4, 5.5).pdf(x), rtol=1e-12)


def test_beta_quantile_examples():
    assert beta_quantile(0.5, 3, 3) == pytest.approx(0.5, abs=1e-12)
    assert beta_quantile(0.95, 1, 1) == pytest.approx(0.95, abs=1e-12)
    assert beta_quantile(0.05, 1, 1, upper=True) == pytest.approx(0.95, abs=1e-12)
    assert beta_quantile(0.95, 4, 5.5) == pytest.approx(stats.beta(4, 5.5).ppf(0.95), abs=1e-10)


@pytest.mark.parametrize("a,b", [(5, 5), (4, 5.5), (1, 1), (0.5, 0.5), (10, 5), (2, 20), (0.3, 7)])
def test_beta_quantile_round_trip(a, b):
    # invert whichever tail is well conditioned at x
    for x in np.linspace(0.001, 0.999, 999):
        lo = beta_cdf(x, a, b)
        back = beta_quantile(lo, a, b) if lo <= 0.5 else beta_quantile(beta_sf(x, a, b), a, b, upper=True)
        assert abs(back - x) <= 1e-8


@settings(max_examples=100, deadline=None)
@given(u=st.floats(1e-10, 1 - 1e-10), a=st.floats(0.2, 50), b=st.floats(0.2, 50))
def test_beta_quantile_backward_error(u, a, b):
    x = beta_quantile(u, a, b)
    assert 0.0 <= x <= 1.0
    # the root lies within the 1e-12 terminal bracket around x
    lo, hi = beta_cdf(max(x - 1e-12, 0.0), a, b), beta_cdf(min(x + 1e-12, 1.0), a, b)
    assert lo - 1e-14 <= u <= hi + 1e-14


@settings(max_examples=50, deadline=None)
@given(a=st.floats(0.2, 30), b=st.floats(0.2, 30))
def test_beta_cdf_monotone(a, b):
    assert np.all(np.diff(beta_cdf(np.linspace(0, 1, 201), a, b)) >= 0)


def test_beta_errors():
    with pytest.raises(InvalidInputError):
        beta_cdf(1.5, 1, 1)
    with pytest.raises(InvalidInputError):
        beta_cdf(0.5, 0, 1)
    with pytest.raises(InvalidInputError):
        beta_quantile(1.0, 2, 2)
    with pytest.raises(InvalidInputError):
        beta_quantile(0.5, 2, -1)
