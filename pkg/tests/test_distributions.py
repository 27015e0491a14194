from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate, stats

from bnpvar.distributions import (
    GammaScaleShapeParams,
    GigParams,
    HiwParams,
    NormalGammaParams,
    bessel_k,
    gig_mean,
    gig_sample,
    gs_is_proper,
    gs_log_kernel,
    gs_log_marginal,
    gs_sample,
    gs_sample_exact,
    hiw_sample,
    inverse_wishart_sample,
    log_bessel_k,
    ng_log_density,
    ng_log_pdf,
    ng_sample,
)
from bnpvar.graph import DecomposableGraph

from oracles import (
    ShapeMarginal,
    bessel_k_quad,
    chisq_equiprobable,
    gig_moment,
    gs_joint_scale_integral,
    ng_mixture_logpdf,
)


# --- Bessel K ------------------------------------------------------------------


def test_bessel_half_integer_closed_form():
    assert bessel_k(0.5, 1.0) == pytest.approx(math.sqrt(math.pi / 2) * math.exp(-1), rel=1e-13)
    assert bessel_k(0.5, 1.0) == pytest.approx(0.461068, abs=1e-6)


@pytest.mark.parametrize("order,x", [(1.5, 2.0), (0.0, 0.3), (3.7, 12.0), (25.3, 0.01), (40.0, 80.0)])
def test_bessel_against_integral_representation(order, x):
    assert bessel_k(order, x) == pytest.approx(bessel_k_quad(order, x), rel=1e-10)


def test_bessel_order_symmetry_and_domain():
    rng = np.random.default_rng(0)
    for nu, x in zip(rng.uniform(0, 30, 50), rng.uniform(0.01, 50, 50)):
        assert log_bessel_k(-nu, x) == log_bessel_k(nu, x)
    with pytest.raises(ValueError):
        bessel_k(1.0, 0.0)
    with pytest.raises(ValueError):
        bessel_k(1.0, -2.0)


def test_log_bessel_survives_overflow():
    # K_200(1e-3) overflows double precision; the log stays finite
    assert np.isfinite(log_bessel_k(200.0, 1e-3))
    assert log_bessel_k(200.0, 1e-3) > 700


# --- normal-gamma ----------------------------------------------------------------


def test_ng_laplace_special_case():
    assert ng_log_pdf(0.0, NormalGammaParams(0.0, 1.0, 4.0)) == pytest.approx(0.0, abs=1e-14)
    for x in (0.3, -1.2, 2.5):
        assert ng_log_pdf(x, NormalGammaParams(0.0, 1.0, 4.0)) == pytest.approx(-2.0 * abs(x), abs=1e-12)


def test_ng_matches_mixture_quadrature_fixed_point():
    assert ng_log_pdf(0.7, NormalGammaParams(0.0, 2.0, 1.0)) == pytest.approx(
        ng_mixture_logpdf(0.7, 0.0, 2.0, 1.0), abs=1e-8
    )


def test_ng_symmetry_and_mode_limits():
    p = NormalGammaParams(1.5, 0.8, 2.0)
    for delta in (0.1, 1.0, 7.0):
        assert ng_log_pdf(1.5 + delta, p) == pytest.approx(ng_log_pdf(1.5 - delta, p), abs=1e-13)
    # finite at the centre for gamma > 1/2
    assert ng_log_pdf(1.5, p) == pytest.approx(ng_mixture_logpdf(1.5, 1.5, 0.8, 2.0), abs=1e-8)
    assert ng_log_pdf(0.0, NormalGammaParams(0.0, 0.4, 1.0)) == math.inf
    with pytest.raises(ValueError):
        ng_log_pdf(math.nan, p)
    with pytest.raises(ValueError):
        NormalGammaParams(0.0, -1.0, 1.0)


@pytest.mark.parametrize("mu,gamma,tau", [(0.0, 1.0, 1.0), (0.5, 2.0, 0.5), (0.0, 0.7, 3.0), (-1.0, 5.0, 20.0)])
def test_ng_integrates_to_one(mu, gamma, tau):
    f = lambda x: math.exp(ng_log_pdf(x, NormalGammaParams(mu, gamma, tau)))
    total = sum(
        integrate.quad(f, a, b, limit=200, epsabs=1e-13)[0]
        for a, b in ((-math.inf, mu - 1e-9), (mu + 1e-9, math.inf))
    )
    assert total == pytest.approx(1.0, abs=1e-6)


def test_ng_vectorized_agrees_with_scalar():
    rng = np.random.default_rng(3)
    x = rng.normal(0, 2, 200)
    mu = rng.normal(0, 1, 200)
    g = rng.uniform(0.1, 40, 200)
    t = rng.uniform(0.1, 900, 200)
    vec = ng_log_density(x, mu, g, t)
    ref = [ng_log_pdf(a, NormalGammaParams(b, c, d)) for a, b, c, d in zip(x, mu, g, t)]
    np.testing.assert_allclose(vec, ref, rtol=1e-12, atol=1e-12)


def test_ng_sample_moments_and_laplace_law():
    rng = np.random.default_rng(11)
    n = 10**6
    x = ng_sample(NormalGammaParams(3.0, 2.0, 1.0), rng, n)
    assert abs(x.mean() - 3.0) < 3 * x.std() / math.sqrt(n)
    # variance oracle: integral of x^2 against the closed form density
    f = lambda v: v * v * math.exp(ng_log_pdf(v, NormalGammaParams(0.0, 2.0, 1.0)))
    var = 2 * integrate.quad(f, 1e-12, math.inf, limit=200)[0]
    assert var == pytest.approx(4.0, rel=1e-8)
    assert x.var() == pytest.approx(var, rel=0.02)
    lap = ng_sample(NormalGammaParams(0.0, 1.0, 4.0), rng, 20000)
    assert stats.kstest(lap, stats.laplace(scale=0.5).cdf).pvalue > 0.01


# --- GIG -------------------------------------------------------------------------


def test_gig_gamma_limit():
    rng = np.random.default_rng(5)
    x = gig_sample(GigParams(2.0, 0.0, 3.0), rng, 10**5)
    assert abs(x.mean() - 3.0) < 3 * math.sqrt(3.0 / 10**5)
    assert stats.kstest(x, stats.gamma(3.0, scale=1.0).cdf).pvalue > 0.01


@pytest.mark.parametrize(
    "a,b,c",
    [(2.0, 3.0, 0.5), (2.0, 1.0, 1.5), (1.0, 1.0, -0.5), (0.5, 0.01, 0.2), (600.0, 1e-4, 24.5), (3.0, 40.0, -3.0),
     (1e-3, 1e-3, 0.3)],
)
def test_gig_moments_match_bessel_ratio(a, b, c):
    rng = np.random.default_rng(int(1000 * a + b) % 2**31)
    n = 10**5
    x = gig_sample(GigParams(a, b, c), rng, n)
    mean = gig_mean(a, b, c)
    assert mean == pytest.approx(gig_moment(a, b, c), rel=1e-6)
    assert abs(x.mean() - mean) < 3 * x.std() / math.sqrt(n)
    m2 = gig_moment(a, b, c, 2)
    y = x**2
    assert abs(y.mean() - m2) < 4 * y.std() / math.sqrt(n)


def test_gig_reciprocal_identity():
    rng = np.random.default_rng(8)
    x = gig_sample(GigParams(1.0, 1.0, -0.5), rng, 10**5)
    y = gig_sample(GigParams(1.0, 1.0, 0.5), rng, 10**5)
    assert stats.ks_2samp(1.0 / x, y).pvalue > 0.01


def test_gig_vectorized_and_validation():
    rng = np.random.default_rng(1)
    a = np.array([1.0, 2.0, 3.0])
    out = gig_sample(GigParams(a, np.array([0.5, 0.0, 2.0]), np.array([-0.3, 1.0, 2.5])), rng)
    assert out.shape == (3,) and np.all(out > 0)
    with pytest.raises(ValueError):
        GigParams(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        GigParams(1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        GigParams(1.0, 0.0, -1.0)


def test_gig_deterministic_given_seed():
    p = GigParams(2.0, 3.0, 0.5)
    a = gig_sample(p, np.random.default_rng(4), 100)
    b = gig_sample(p, np.random.default_rng(4), 100)
    assert np.array_equal(a, b)


# --- Gamma scale-shape -------------------------------------------------------------


def test_gs_kernel_plugins():
    p = GammaScaleShapeParams(3.0, 0.5, 1 / 3, 10.0)
    assert gs_log_kernel(1.0, 1.0, p) == pytest.approx(-1 / 3, abs=1e-15)
    x, y1, y2 = 2.3, 0.7, 4.1
    diff = gs_log_kernel(x, y1, p) - gs_log_kernel(x, y2, p)
    assert diff == pytest.approx((3.0 * x - 1) * (math.log(y1) - math.log(y2)) - (y1 - y2) / 3, abs=1e-12)


def test_gs_marginal_matches_numerical_integral_over_scale():
    p = GammaScaleShapeParams(3.0, 0.5, 1 / 3, 10.0)
    for x in (0.4, 2.0, 5.0):
        assert gs_log_marginal(x, p) == pytest.approx(gs_joint_scale_integral(x, 3.0, 0.5, 1 / 3, 10.0), abs=1e-8)


def test_gs_nonsparse_marginal_unimodal_and_finite():
    m = ShapeMarginal(3.0, 0.5, 1 / 3, 10.0)
    assert math.isfinite(m.pdf(2.0)) and m.pdf(2.0) > 0
    grid = np.linspace(m.lo, m.hi, 2000)
    dens = np.array([m.pdf(v) for v in grid])
    peak = int(np.argmax(dens))
    assert np.all(np.diff(dens[: peak + 1]) >= -1e-12) and np.all(np.diff(dens[peak:]) <= 1e-12)


def test_gs_propriety_guard():
    assert gs_is_proper(3.0, 0.5, 1 / 3, 10.0)
    assert not gs_is_proper(30.0, 0.5, 1 / 30, 18.0)
    with pytest.raises(ValueError):
        GammaScaleShapeParams(30.0, 0.5, 1 / 30, 18.0)
    GammaScaleShapeParams(30.0, 0.5, 1 / 30, 18.0, x_max=50.0)


def test_gs_scale_conditional_mean():
    rng = np.random.default_rng(2)
    p = GammaScaleShapeParams(3.0, 0.5, 1 / 3, 10.0)
    taus = np.array([gs_sample(p, (2.0, 1.0), rng, step=1e-12)[1] for _ in range(20000)])
    assert abs(taus.mean() - 18.0) < 3 * math.sqrt(6.0 * 9.0 / 20000)


@pytest.mark.parametrize(
    "nu,p,s,n,x_max", [(3.0, 0.5, 1 / 3, 10.0, math.inf), (30.0, 0.5, 1 / 30, 18.0, 50.0)]
)
def test_gs_exact_sampler_chisquare(nu, p, s, n, x_max):
    marg = ShapeMarginal(nu, p, s, n, x_max)
    x, y = gs_sample_exact(GammaScaleShapeParams(nu, p, s, n, x_max), np.random.default_rng(3), 50000)
    assert chisq_equiprobable(x, marg).pvalue > 0.01
    assert np.all(x <= x_max)


def test_gs_mh_chain_converges_from_poor_start():
    marg = ShapeMarginal(3.0, 0.5, 1 / 3, 10.0)
    params = GammaScaleShapeParams(3.0, 0.5, 1 / 3, 10.0)
    rng = np.random.default_rng(9)
    x = np.full(20000, 20.0)
    y = np.ones(20000)
    for _ in range(300):
        x, y, _ = gs_sample(params, (x, y), rng, step=0.5)
    assert chisq_equiprobable(x, marg).pvalue > 0.01


def _acceptance(params, start, step, n=5000, seed=4):
    rng = np.random.default_rng(seed)
    state, acc = start, []
    for _ in range(n):
        x, y, a = gs_sample(params, state, rng, step=step)
        state = (x, y)
        acc.append(a)
    return float(np.mean(acc))


def test_gs_acceptance_rates():
    assert 0.1 < _acceptance(GammaScaleShapeParams(3.0, 0.5, 1 / 3, 10.0), (2.0, 1.0), 0.5) < 0.9
    # the capped sparse setting piles its mass within ~1e-3 of the cap: a 0.5
    # log-step is never accepted there, a tuned step is
    sparse = GammaScaleShapeParams(30.0, 0.5, 1 / 30, 18.0, x_max=50.0)
    assert _acceptance(sparse, (49.999, 1.0), 0.5, 2000) < 0.01
    assert 0.1 < _acceptance(sparse, (49.999, 1.0), 1e-4) < 0.9


# --- inverse Wishart / HIW ---------------------------------------------------------


def test_inverse_wishart_mean_against_scipy():
    rng = np.random.default_rng(6)
    scale = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.3], [0.0, 0.3, 1.5]])
    df = 8.0  # textbook degrees of freedom df + p - 1 = 10
    ours = np.array([inverse_wishart_sample(df, scale, rng) for _ in range(40000)])
    ref = stats.invwishart(df=df + 2, scale=scale).rvs(40000, random_state=7)
    se = np.sqrt(ours.var(0) / 40000 + ref.var(0) / 40000)
    assert np.all(np.abs(ours.mean(0) - ref.mean(0)) < 4 * se)
    np.testing.assert_allclose(scale / (df + 2 - 4), ref.mean(0), rtol=0.05, atol=0.01)


def test_inverse_wishart_scalar_case():
    rng = np.random.default_rng(2)
    x = np.array([inverse_wishart_sample(5.0, np.array([[2.0]]), rng)[0, 0] for _ in range(50000)])
    # 1/x ~ Gamma(5/2, rate 1)
    assert stats.kstest(1.0 / x, stats.gamma(2.5, scale=1.0).cdf).pvalue > 0.01


def test_hiw_structural_zeros_and_spd():
    rng = np.random.default_rng(0)
    g = DecomposableGraph(5, [(0, 1), (1, 2), (0, 2), (2, 3)])
    scale = np.eye(5) + 0.2
    for _ in range(200):
        s = hiw_sample(HiwParams(4.0, scale, g), rng)
        assert np.allclose(s, s.T)
        assert np.all(np.linalg.eigvalsh(s) > 0)
        k = np.linalg.inv(s)
        for i, j in [(0, 3), (1, 3), (0, 4), (1, 4), (2, 4), (3, 4)]:
            assert abs(k[i, j]) < 1e-9 * np.abs(k).max()


def test_hiw_disconnected_blocks_and_empty_graph():
    rng = np.random.default_rng(1)
    g = DecomposableGraph(3, [(0, 1)])
    for _ in range(100):
        s = hiw_sample(HiwParams(3.0, np.eye(3) + 0.5, g), rng)
        assert s[0, 2] == 0.0 and s[1, 2] == 0.0
        e = hiw_sample(HiwParams(3.0, np.eye(3) + 0.5, DecomposableGraph(3)), rng)
        assert np.count_nonzero(e - np.diag(np.diag(e))) == 0


def test_hiw_clique_marginal_is_inverse_wishart():
    # path 0-1-2: the {1,2} clique block must follow IW(df, scale_{12})
    rng = np.random.default_rng(3)
    g = DecomposableGraph(3, [(0, 1), (1, 2)])
    scale = np.array([[1.0, 0.3, 0.1], [0.3, 2.0, 0.4], [0.1, 0.4, 1.0]])
    df = 8.0
    draws = np.array([hiw_sample(HiwParams(df, scale, g), rng) for _ in range(30000)])
    blk = draws[:, 1:, 1:]
    expected = scale[1:, 1:] / (df + 1 - 3)  # textbook df = df + |C| - 1 = 9, mean = scale/(9 - 2 - 1)
    se = blk.std(0) / math.sqrt(len(draws))
    assert np.all(np.abs(blk.mean(0) - expected) < 4 * se)


def test_hiw_rejects_bad_inputs():
    with pytest.raises(ValueError):
        hiw_sample(HiwParams(3.0, np.eye(4), DecomposableGraph(4, [(0, 1), (1, 2), (2, 3), (0, 3)])),
                   np.random.default_rng(0))
    with pytest.raises(ValueError):
        HiwParams(3.0, np.eye(3), DecomposableGraph(4))
    with pytest.raises(ValueError):
        HiwParams(-1.0, np.eye(2), DecomposableGraph(2))
