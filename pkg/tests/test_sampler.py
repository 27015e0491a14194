from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import special, stats

from bnpvar.distributions import ng_log_density
from bnpvar.graph import DecomposableGraph
from bnpvar.sampler import (
    Hyperparameters,
    Model,
    blasso_baseline,
    initial_state,
    posterior_mean_beta,
    run_chain,
    slice_truncation,
    stick_weights,
    sweep,
    update_allocations,
    update_atoms,
    update_beta,
    update_graph,
    update_lambda,
    update_pi,
    update_sigma,
    update_slice_and_sticks,
)
from bnpvar.var import DgpConfig, PanelSpec, simulate_var


def _blank(model: Model, rng):
    state = initial_state(model, rng)
    state.graph = DecomposableGraph(model.q)
    state.sigma = np.eye(model.q)
    return state


def test_stick_weights_and_truncation():
    np.testing.assert_allclose(stick_weights(np.full(4, 0.5)), [0.5, 0.25, 0.125, 0.0625])
    assert slice_truncation(np.array([0.5, 0.25, 0.125]), 0.3) == 2
    assert slice_truncation(np.array([0.5, 0.1]), 0.3) == 0


def test_slices_uniform_when_all_sparse():
    rng = np.random.default_rng(0)
    spec = PanelSpec(1, 10, 1)
    model = Model(None, spec, Hyperparameters())
    state = _blank(model, rng)
    state.xi[:] = 0
    state.d[:] = 0
    us = []
    while len(us) < 10_000:
        update_slice_and_sticks(state, model, rng)
        us.extend(state.u.tolist())
    assert stats.kstest(us[:10_000], "uniform").pvalue > 0.01


def test_slice_validity_after_sweeps():
    rng = np.random.default_rng(1)
    spec = PanelSpec(1, 3, 2)
    data, _ = simulate_var(DgpConfig(kind="random", dimension=3, nonzero_count=4, horizon=60), rng)
    model = Model(data.values, spec, Hyperparameters())
    state = initial_state(model, rng)
    for _ in range(100):
        sweep(state, model, rng)
        # the slices are drawn at the start of the next sweep; check them right after drawing
        update_slice_and_sticks(state, model, rng)
        for i, idx in enumerate(model.layout.blocks):
            w = state.weights(i)
            sel = idx[state.xi[idx] == 1]
            assert np.all(state.u[sel] < w[state.d[sel] - 1])
            assert w.sum() > 1 - state.u[idx].min()
        assert np.all(state.d[state.xi == 0] == 0)
        assert np.all(state.lam > 0)


def test_lambda_gamma_reduction():
    rng = np.random.default_rng(2)
    spec = PanelSpec(1, 20, 1)
    model = Model(None, spec, Hyperparameters())
    state = _blank(model, rng)
    state.xi[:] = 0
    state.d[:] = 0
    state.beta[:] = 0.0
    state.gamma0, state.tau0 = 2.0, 4.0
    draws = np.concatenate([update_lambda(state, model, rng).lam.copy() for _ in range(50)])
    se = math.sqrt(1.5 / 4) / math.sqrt(draws.size)  # Gamma(3/2, rate 2)
    assert abs(draws.mean() - 0.75) < 4 * se
    assert stats.kstest(draws, stats.gamma(1.5, scale=0.5).cdf).pvalue > 0.01


def test_lambda_generic_gig_mean():
    rng = np.random.default_rng(3)
    spec = PanelSpec(1, 20, 1)
    model = Model(None, spec, Hyperparameters())
    state = _blank(model, rng)
    state.xi[:] = 0
    state.d[:] = 0
    state.beta[:] = 1.0  # B = 1
    state.gamma0, state.tau0 = 2.0, 2.0  # A = 2, C = 1.5
    draws = np.concatenate([update_lambda(state, model, rng).lam.copy() for _ in range(100)])
    a, b, c = 2.0, 1.0, 1.5
    z = math.sqrt(a * b)
    mean = math.sqrt(b / a) * special.kv(c + 1, z) / special.kv(c, z)
    second = (b / a) * special.kv(c + 2, z) / special.kv(c, z)
    se = math.sqrt(second - mean**2) / math.sqrt(draws.size)
    assert abs(draws.mean() - mean) < 3 * se


def test_atom_location_posterior():
    """Two members beta = (1, 3), lambda = (1, 1), c = 0, d = 10: N(4/2.1, 1/2.1)."""
    rng = np.random.default_rng(4)
    spec = PanelSpec(1, 1, 1)
    model = Model(None, spec, Hyperparameters(atom_mean=0.0, atom_var=10.0))
    state = _blank(model, rng)
    state.xi[:] = 1
    state.d[:] = 1
    state.beta[:] = [1.0, 3.0]
    state.lam[:] = 1.0
    state.sticks[0] = np.array([0.9])
    state.mu[0], state.gam[0], state.tau[0] = np.zeros(1), np.ones(1), np.ones(1)
    mus = np.array([update_atoms(state, model, rng).mu[0][0] for _ in range(20_000)])
    assert 4 / 2.1 == pytest.approx(1.9048, abs=1e-4)
    se = math.sqrt(1 / 2.1 / mus.size)
    assert abs(mus.mean() - 4 / 2.1) < 4 * se
    assert mus.var() == pytest.approx(1 / 2.1, rel=0.05)


def test_empty_atom_refreshed_from_base_measure():
    rng = np.random.default_rng(5)
    spec = PanelSpec(1, 1, 1)
    model = Model(None, spec, Hyperparameters(atom_mean=0.0, atom_var=10.0))
    state = _blank(model, rng)
    state.xi[:] = 0
    state.d[:] = 0
    state.sticks[0] = np.array([0.5])
    mus = np.array([update_atoms(state, model, rng).mu[0][0] for _ in range(10_000)])
    assert stats.kstest(mus, stats.norm(0, math.sqrt(10)).cdf).pvalue > 0.01


def test_beta_prior_only_draw():
    rng = np.random.default_rng(6)
    spec = PanelSpec(1, 2, 1)
    model = Model(None, spec, Hyperparameters())
    state = _blank(model, rng)
    state.xi[:] = 0
    state.d[:] = 0
    lam = np.linspace(0.5, 3.0, state.beta.size)
    state.lam = lam
    draws = np.array([update_beta(state, model, rng).beta.copy() for _ in range(20_000)])
    np.testing.assert_allclose(draws.mean(axis=0), 0, atol=4 * np.sqrt(lam.max() / 20_000))
    np.testing.assert_allclose(draws.var(axis=0), lam, rtol=0.05)


def test_beta_conjugate_limit_is_sample_mean():
    rng = np.random.default_rng(7)
    spec = PanelSpec(1, 1, 1)
    model = Model(None, spec, Hyperparameters())
    y = rng.normal(2.0, 1.0, size=(50, 1))
    x = np.column_stack([np.ones(50), np.zeros(50)])
    model.set_data(x, y)
    state = _blank(model, rng)
    state.xi[:] = 0
    state.lam[:] = 1e12
    draws = np.array([update_beta(state, model, rng).beta[0] for _ in range(20_000)])
    assert draws.mean() == pytest.approx(y.mean(), abs=4 / math.sqrt(50 * 20_000))
    assert draws.var() == pytest.approx(1 / 50, rel=0.05)


def test_beta_consistency_large_sample():
    rng = np.random.default_rng(8)
    coef = np.array([[0.5, 0.2, 0.0], [0.0, -0.4, 0.3], [0.1, 0.0, 0.6]])
    data, _ = simulate_var(DgpConfig(kind="random", dimension=3, nonzero_count=6, horizon=10_000), rng, coef=coef)
    spec = PanelSpec(1, 3, 1)
    model = Model(data.values, spec, Hyperparameters())
    state = _blank(model, rng)
    state.lam[:] = 100.0
    state.xi[:] = 0
    draws = np.array([update_beta(state, model, rng).beta.copy() for _ in range(200)])
    est = model.layout.lag_matrix(draws.mean(axis=0), 1)
    np.testing.assert_allclose(est, coef, atol=0.05)


def test_sigma_updates():
    rng = np.random.default_rng(9)
    spec = PanelSpec(1, 3, 1)
    model = Model(None, spec, Hyperparameters())
    cov = np.array([[1.0, 0.5, 0.2], [0.5, 2.0, 0.3], [0.2, 0.3, 1.0]])
    y = rng.multivariate_normal(np.zeros(3), cov, size=10_000)
    model.set_data(np.zeros((10_000, model.layout.k)), y)
    state = _blank(model, rng)
    state.beta[:] = 0.0
    state.graph = DecomposableGraph.complete(3)
    mean = np.mean([update_sigma(state, model, rng).sigma for _ in range(200)], axis=0)
    emp = y.T @ y / 10_000
    assert np.all(np.abs(mean - emp) <= 0.05 * np.abs(emp).max())
    state.graph = DecomposableGraph(3)
    for _ in range(20):
        s = update_sigma(state, model, rng).sigma
        assert np.count_nonzero(s - np.diag(np.diag(s))) == 0


def _edge_frequency(cov, seed, sweeps=3000):
    rng = np.random.default_rng(seed)
    spec = PanelSpec(1, 3, 1)
    model = Model(None, spec, Hyperparameters())
    y = rng.multivariate_normal(np.zeros(3), cov, size=500)
    model.set_data(np.zeros((500, model.layout.k)), y)
    state = _blank(model, rng)
    state.beta[:] = 0.0
    freq = np.zeros((3, 3))
    for _ in range(sweeps):
        update_sigma(state, model, rng)
        update_graph(state, model, rng)
        freq += state.graph.adjacency
    return freq / sweeps


def test_graph_posterior_diagonal_truth():
    freq = _edge_frequency(np.eye(3), 10)
    assert np.all(freq[np.triu_indices(3, 1)] < 0.5)


def test_graph_posterior_correlated_pair():
    cov = np.array([[1.0, 0.9, 0.0], [0.9, 1.0, 0.0], [0.0, 0.0, 1.0]])
    freq = _edge_frequency(cov, 11)
    assert freq[0, 1] > 0.9


def test_graph_prior_recovery_without_likelihood():
    rng = np.random.default_rng(12)
    spec = PanelSpec(1, 3, 1)
    model = Model(None, spec, Hyperparameters(graph_psi=0.5))
    state = _blank(model, rng)
    freq = np.zeros((3, 3))
    n = 20_000
    for _ in range(n):
        update_graph(state, model, rng, use_likelihood=False)
        freq += state.graph.adjacency
    np.testing.assert_allclose((freq / n)[np.triu_indices(3, 1)], 0.5, atol=0.03)


def test_allocations_degenerate_mixing():
    rng = np.random.default_rng(13)
    spec = PanelSpec(1, 3, 1)
    model = Model(None, spec, Hyperparameters())
    state = _blank(model, rng)
    update_slice_and_sticks(state, model, rng)
    state.pi[:] = 1.0
    update_allocations(state, model, rng)
    assert np.all(state.xi == 0) and np.all(state.d == 0)


@pytest.mark.parametrize("collapse", [True, False])
def test_allocation_frequencies_match_weights(collapse):
    """One atom at mu = beta; compare empirical xi = 1 rates with the two-term weights."""
    rng = np.random.default_rng(14)
    spec = PanelSpec(1, 1, 1)
    model = Model(None, spec, Hyperparameters(collapse_lambda=collapse))
    for beta in (1.0, 5.0, 10.0):
        state = _blank(model, rng)
        state.beta[:] = beta
        state.lam[:] = 1.0
        state.pi[:] = 0.5
        state.gamma0, state.tau0 = 2.0, 4.0
        state.sticks[0] = np.array([0.999999])
        state.mu[0], state.gam[0], state.tau[0] = np.array([beta]), np.array([2.0]), np.array([4.0])
        if collapse:
            lw0 = ng_log_density(beta, 0.0, 2.0, 4.0)
            lw1 = ng_log_density(beta, beta, 2.0, 4.0)
        else:
            lw0 = stats.norm.logpdf(beta, 0, 1)
            lw1 = stats.norm.logpdf(0.0)
        p1 = 1 / (1 + math.exp(lw0 - lw1))
        hits = 0
        n = 4000
        for _ in range(n):
            state.u[:] = 0.5
            state.lam[:] = 1.0
            update_allocations(state, model, rng)
            hits += int(state.xi.sum())
        rate = hits / (2 * n)
        assert abs(rate - p1) < 4 * math.sqrt(p1 * (1 - p1) / (2 * n)) + 1e-9
    assert p1 > 0.999


def test_pi_conditional():
    rng = np.random.default_rng(15)
    spec = PanelSpec(1, 1, 9)
    blocks = [np.arange(10)]
    model = Model(None, spec, Hyperparameters(), blocks=blocks)
    state = _blank(model, rng)
    for val, ref in ((0, stats.beta(11, 1)), (1, stats.beta(1, 11))):
        state.xi[:] = val
        draws = [update_pi(state, model, rng).pi[0] for _ in range(5000)]
        assert stats.kstest(draws, ref.cdf).pvalue > 0.01


def test_pi_prior_recovery_without_data():
    rng = np.random.default_rng(16)
    spec = PanelSpec(1, 2, 1)
    model = Model(None, spec, Hyperparameters(adapt_step=False))
    state = _blank(model, rng)
    state.graph = DecomposableGraph(2)
    pis = []
    for _ in range(6000):
        sweep(state, model, rng)
        pis.append(state.pi[0])
    assert np.mean(pis[500:]) == pytest.approx(0.5, abs=0.05)


def test_run_chain_records_and_determinism():
    hyper = Hyperparameters()
    assert hyper.retained == 900
    rng = np.random.default_rng(17)
    data, _ = simulate_var(DgpConfig(kind="random", dimension=3, nonzero_count=3, horizon=50), rng)
    small = Hyperparameters(iterations=60, burn_in=10, thin=5, seed=3)
    a = run_chain(data.values, PanelSpec(1, 3, 1), small)
    b = run_chain(data.values, PanelSpec(1, 3, 1), small)
    assert len(a.draws) == small.retained == 10
    assert [r.iteration for r in a.draws] == list(range(10, 60, 5))
    for ra, rb in zip(a.draws, b.draws):
        assert ra.beta.tobytes() == rb.beta.tobytes()
        assert ra.d.tobytes() == rb.d.tobytes()
        assert ra.sigma.tobytes() == rb.sigma.tobytes()
    assert a.trace.tobytes() == b.trace.tobytes()


def test_blasso_has_no_slab_allocations():
    rng = np.random.default_rng(18)
    data, _ = simulate_var(DgpConfig(kind="random", dimension=3, nonzero_count=3, horizon=50), rng)
    res = blasso_baseline(data.values, PanelSpec(1, 3, 1), Hyperparameters(iterations=50, burn_in=10, thin=1))
    assert all(np.all(r.xi == 0) for r in res.draws)


def test_posterior_recovery_small_system():
    rng = np.random.default_rng(19)
    coef = np.array([[0.6, 0.0, 0.0], [0.0, -0.5, 0.0], [0.4, 0.0, 0.5]])
    data, _ = simulate_var(DgpConfig(kind="random", dimension=3, nonzero_count=4, horizon=2000), rng, coef=coef)
    hyper = Hyperparameters(iterations=1500, burn_in=500, thin=2, seed=1)
    res = run_chain(data.values, PanelSpec(1, 3, 1), hyper)
    est = res.draws[0]
    from bnpvar.var import CoefficientLayout

    lay = CoefficientLayout(PanelSpec(1, 3, 1))
    mean = lay.lag_matrix(posterior_mean_beta(res.draws), 1)
    nz = coef != 0
    assert np.all(np.abs(mean[nz] - coef[nz]) < 0.1)
    assert est.beta.shape == (lay.n,)
    with pytest.raises(ValueError):
        posterior_mean_beta([])


def test_hyperparameter_validation():
    with pytest.raises(ValueError):
        Hyperparameters(nu0=-1)
    with pytest.raises(ValueError):
        Hyperparameters(burn_in=10, iterations=10)
    with pytest.raises(ValueError):
        Hyperparameters(thin=0)
    with pytest.raises(ValueError):
        Hyperparameters(graph_psi=1.0)
    with pytest.raises(ValueError):
        Model(None, PanelSpec(), Hyperparameters(), mode="other")
