"""Slice Gibbs sampler for the sparse Dirichlet-process Lasso VAR.

One sweep updates, in order: slice and stick variables (U, V), latent scales
(Lambda), atoms (Theta), coefficients (beta), the covariance (Sigma), the
graph (G), the allocations (D, Xi) and the mixing weights (pi).

Conventions: xi = 1 puts a coefficient in the Dirichlet-process (non-sparse)
component, xi = 0 in the zero-centred sparse component. Cluster labels d are
1-based within each block; d = 0 exactly when xi = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy import linalg, special

from .distributions import (
    GammaScaleShapeParams,
    GigParams,
    HiwParams,
    gig_sample,
    gs_mh_step,
    ng_log_density,
    gs_sample_exact,
    hiw_sample,
)
from .graph import DecomposableGraph, GraphPrior, graph_log_marginal_likelihood, graph_log_prior, propose_toggle
from .var import CoefficientLayout, PanelSpec, design_matrices

_TARGET_ACCEPT = 0.35
_ADAPT_EVERY = 50


class NumericalError(ArithmeticError):
    """A sampler step produced a non-finite or non-positive-definite quantity."""


@dataclass
class Hyperparameters:
    # sparse-component Gamma scale-shape hyperprior on (gamma0, tau0)
    nu0: float = 30.0
    p0: float = 0.5
    s0: float = 1.0 / 30.0
    n0: float = 18.0
    # non-sparse base measure: Gamma scale-shape part
    nu1: float = 3.0
    p1: float = 0.5
    s1: float = 1.0 / 3.0
    n1: float = 10.0
    # non-sparse base measure: Normal(c, d) on atom locations
    atom_mean: float = 0.0
    atom_var: float = 10.0
    dp_concentration: float = 1.0
    mixing_alpha: float = 1.0
    hiw_df: float = 3.0
    hiw_scale: float = 1.0
    graph_psi: float | None = None
    gs_shape_max: float = 50.0
    gs_step: float = 0.5
    adapt_step: bool = True
    collapse_lambda: bool = True
    graph_moves: int = 1
    iterations: int = 5000
    burn_in: int = 500
    thin: int = 5
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        positive = ("nu0", "p0", "s0", "n0", "nu1", "p1", "s1", "n1", "atom_var",
                    "dp_concentration", "mixing_alpha", "hiw_df", "hiw_scale", "gs_shape_max", "gs_step")
        for name in positive:
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")
        if self.p0 > 1 or self.p1 > 1:
            raise ValueError("Gamma scale-shape p must not exceed 1")
        if self.graph_psi is not None and not 0 < self.graph_psi < 1:
            raise ValueError("graph_psi must lie in (0, 1)")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.graph_moves < 0:
            raise ValueError("graph_moves must be >= 0")
        self.sparse_gs()
        self.slab_gs()

    def sparse_gs(self, **override) -> GammaScaleShapeParams:
        kw = dict(nu=self.nu0, p=self.p0, s=self.s0, n=self.n0, x_max=self.gs_shape_max)
        kw.update(override)
        return GammaScaleShapeParams(**kw)

    def slab_gs(self, **override) -> GammaScaleShapeParams:
        kw = dict(nu=self.nu1, p=self.p1, s=self.s1, n=self.n1, x_max=self.gs_shape_max)
        kw.update(override)
        return GammaScaleShapeParams(**kw)

    def psi(self, q: int) -> float:
        return GraphPrior.default(q).psi if self.graph_psi is None else self.graph_psi

    @property
    def retained(self) -> int:
        return len(range(self.burn_in, self.iterations, self.thin))

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class ChainState:
    beta: np.ndarray
    lam: np.ndarray
    u: np.ndarray
    d: np.ndarray
    xi: np.ndarray
    pi: np.ndarray
    gamma0: float
    tau0: float
    sticks: list[np.ndarray]
    mu: list[np.ndarray]
    gam: list[np.ndarray]
    tau: list[np.ndarray]
    sigma: np.ndarray
    graph: DecomposableGraph

    def weights(self, block: int) -> np.ndarray:
        return stick_weights(self.sticks[block])

    def copy(self) -> "ChainState":
        return ChainState(
            self.beta.copy(), self.lam.copy(), self.u.copy(), self.d.copy(), self.xi.copy(),
            self.pi.copy(), self.gamma0, self.tau0,
            [v.copy() for v in self.sticks], [v.copy() for v in self.mu],
            [v.copy() for v in self.gam], [v.copy() for v in self.tau],
            self.sigma.copy(), self.graph,
        )


@dataclass
class DrawRecord:
    iteration: int
    beta: np.ndarray
    xi: np.ndarray
    d: np.ndarray
    pi: np.ndarray
    gamma0: float
    tau0: float
    atoms: list[np.ndarray]  # per block, rows (cluster id, mu, gamma, tau) for occupied clusters
    sigma: np.ndarray
    edge_count: int
    lambda_norm: float


@dataclass
class ChainResult:
    draws: list[DrawRecord]
    trace: np.ndarray  # lambda L2 norm at every iteration
    burn_in: int
    thin: int
    acceptance: dict = field(default_factory=dict)


def stick_weights(v: np.ndarray) -> np.ndarray:
    """w_k = v_k prod_{l<k} (1 - v_l)."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return v.copy()
    rest = np.concatenate([[1.0], np.cumprod(1.0 - v)[:-1]])
    return v * rest


def slice_truncation(w: np.ndarray, u_min: float) -> int:
    """Smallest N with sum_{k<=N} w_k > 1 - u_min (0 if none within w)."""
    hit = np.flatnonzero(np.cumsum(w) > 1.0 - u_min)
    return int(hit[0]) + 1 if hit.size else 0


def _log_gamma_pdf(x, shape, rate):
    return shape * np.log(rate) - special.gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x


def _log_normal_pdf(x, mean, var):
    return -0.5 * (np.log(2.0 * np.pi * var) + (x - mean) ** 2 / var)


class Model:
    """Data, layout and hyperparameters shared by the update steps."""

    def __init__(self, values, spec: PanelSpec, hyper: Hyperparameters, blocks=None, mode: str = "bnp"):
        if mode not in ("bnp", "blasso"):
            raise ValueError("mode must be 'bnp' or 'blasso'")
        self.spec = spec
        self.hyper = hyper
        self.mode = mode
        self.layout = CoefficientLayout(spec, blocks)
        self.q = spec.n_series
        self.prior_graph = GraphPrior(hyper.psi(self.q))
        self.scale = hyper.hiw_scale * np.eye(self.q)
        self.sparse_prior = hyper.sparse_gs()
        self.slab_prior = hyper.slab_gs()
        self.step = {"sparse": hyper.gs_step, "slab": hyper.gs_step}
        self.accepted = {"sparse": [0, 0], "slab": [0, 0], "graph": [0, 0]}
        if values is None:
            self.set_data(np.empty((0, self.layout.k)), np.empty((0, self.q)))
        else:
            x, y = design_matrices(values, spec)
            self.set_data(x, y)

    def set_data(self, x: np.ndarray, y: np.ndarray) -> None:
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.n_obs = self.y.shape[0]
        self.xtx = self.x.T @ self.x
        self.ytx = self.y.T @ self.x  # (q, K)

    def residuals(self, beta: np.ndarray) -> np.ndarray:
        return self.y - self.x @ self.layout.to_matrix(beta).T

    def scatter(self, beta: np.ndarray) -> np.ndarray:
        r = self.residuals(beta)
        return r.T @ r


# ---------------------------------------------------------------------------
# update steps
# ---------------------------------------------------------------------------


def update_slice_and_sticks(state: ChainState, model: Model, rng: np.random.Generator) -> ChainState:
    alpha = model.hyper.dp_concentration
    for i, idx in enumerate(model.layout.blocks):
        xi = state.xi[idx]
        d = state.d[idx]
        occupied = d[xi == 1]
        d_star = int(occupied.max()) if occupied.size else 0
        counts = np.bincount(occupied, minlength=d_star + 1)[1:]
        tail = np.concatenate([np.cumsum(counts[::-1])[::-1][1:], [0]]) if d_star else counts
        v = rng.beta(1.0 + counts, alpha + tail) if d_star else np.empty(0)
        w = stick_weights(v)
        u = rng.random(idx.size)
        if d_star:
            sel = xi == 1
            u[sel] *= w[d[sel] - 1]
        state.u[idx] = u
        u_min = float(u.min())
        # extend with prior sticks until the slice set is covered
        total = w.sum()
        rem = 1.0 - total
        extra = []
        while total <= 1.0 - u_min:
            vk = rng.beta(1.0, alpha)
            extra.append(vk)
            total += rem * vk
            rem *= 1.0 - vk
        v = np.concatenate([v, extra])
        k = v.size
        state.sticks[i] = v
        state.mu[i] = _resize(state.mu[i], k)
        state.gam[i] = _resize(state.gam[i], k, 1.0)
        state.tau[i] = _resize(state.tau[i], k, 1.0)
    return state


def _resize(a: np.ndarray, k: int, fill: float = 0.0) -> np.ndarray:
    if a.size >= k:
        return a[:k].copy()
    return np.concatenate([a, np.full(k - a.size, fill)])


def _coefficient_atoms(state: ChainState, model: Model):
    """Per-coefficient (mu, gamma, tau) of the allocated component."""
    n = state.beta.size
    mu = np.zeros(n)
    gam = np.full(n, state.gamma0)
    tau = np.full(n, state.tau0)
    for i, idx in enumerate(model.layout.blocks):
        sel = idx[state.xi[idx] == 1]
        if sel.size:
            k = state.d[sel] - 1
            mu[sel] = state.mu[i][k]
            gam[sel] = state.gam[i][k]
            tau[sel] = state.tau[i][k]
    return mu, gam, tau


def update_lambda(state: ChainState, model: Model, rng: np.random.Generator) -> ChainState:
    mu, gam, tau = _coefficient_atoms(state, model)
    a = tau
    b = (state.beta - mu) ** 2
    c = gam - 0.5
    b = np.where((b == 0) & (c <= 0), np.finfo(float).tiny, b)
    lam = gig_sample(GigParams(a, b, c), rng)
    lam = np.maximum(np.atleast_1d(lam), np.finfo(float).tiny)
    if not np.all(np.isfinite(lam)):
        raise NumericalError("non-finite latent scale draw")
    state.lam = lam
    return state


def _gs_move(prior: GammaScaleShapeParams, shape, count, sum_lam, sum_log_half_lam, step, rng):
    """Collapsed move on the Gamma scale-shape posterior given member scales.

    Members contribute Ga(lambda | shape, rate scale/2) factors, which update
    (nu, p, s, n) to (nu + k, p prod(lambda/2), s + sum(lambda)/2, n + k).
    """
    nu = prior.nu + count
    log_p = prior.log_p + sum_log_half_lam
    s = prior.s + 0.5 * sum_lam
    n = prior.n + count
    new, acc = gs_mh_step(shape, nu, log_p, s, n, prior.x_max, step, rng)
    scale = rng.gamma(nu * new, 1.0 / s)
    return new, scale, acc


def update_atoms(state: ChainState, model: Model, rng: np.random.Generator) -> ChainState:
    hyper = model.hyper
    sparse = state.xi == 0
    lam0 = state.lam[sparse]
    g0, t0, acc = _gs_move(
        model.sparse_prior, np.array(state.gamma0), lam0.size, lam0.sum(),
        np.log(0.5 * lam0).sum(), model.step["sparse"], rng,
    )
    state.gamma0, state.tau0 = float(g0), float(t0)
    model.accepted["sparse"][0] += int(acc)
    model.accepted["sparse"][1] += 1
    if model.mode == "blasso":
        return state

    c, dvar = hyper.atom_mean, hyper.atom_var
    for i, idx in enumerate(model.layout.blocks):
        k_tot = state.sticks[i].size
        if k_tot == 0:
            continue
        sel = idx[state.xi[idx] == 1]
        lab = state.d[sel] - 1
        lam = state.lam[sel]
        count = np.bincount(lab, minlength=k_tot).astype(float)
        inv_sum = np.bincount(lab, weights=1.0 / lam, minlength=k_tot)
        b_sum = np.bincount(lab, weights=state.beta[sel] / lam, minlength=k_tot)
        l_sum = np.bincount(lab, weights=lam, minlength=k_tot)
        ll_sum = np.bincount(lab, weights=np.log(0.5 * lam), minlength=k_tot)
        v = 1.0 / (1.0 / dvar + inv_sum)
        e = v * (c / dvar + b_sum)
        mu = e + np.sqrt(v) * rng.standard_normal(k_tot)
        occ = count > 0
        gam = np.empty(k_tot)
        tau = np.empty(k_tot)
        if np.any(occ):
            g_new, t_new, acc = _gs_move(
                model.slab_prior, state.gam[i][occ], count[occ], l_sum[occ], ll_sum[occ],
                model.step["slab"], rng,
            )
            gam[occ], tau[occ] = g_new, t_new
            model.accepted["slab"][0] += int(np.sum(acc))
            model.accepted["slab"][1] += int(np.sum(occ))
        if np.any(~occ):
            gam[~occ], tau[~occ] = gs_sample_exact(model.slab_prior, rng, int(np.sum(~occ)))
        state.mu[i], state.gam[i], state.tau[i] = mu, gam, tau
    return state


def _precision_draw(prec: np.ndarray, lin: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    try:
        chol = linalg.cholesky(prec, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        diag = np.diag(prec)
        raise NumericalError(
            f"coefficient precision not positive definite (diag range {diag.min():.3g}..{diag.max():.3g})"
        ) from exc
    mean = linalg.cho_solve((chol, True), lin)
    z = rng.standard_normal(lin.size)
    return mean + linalg.solve_triangular(chol.T, z, lower=False)


def update_beta(state: ChainState, model: Model, rng: np.random.Generator) -> ChainState:
    lay = model.layout
    q, k = lay.q, lay.k
    sig_inv = linalg.inv(state.sigma)
    sig_inv = 0.5 * (sig_inv + sig_inv.T)
    mu, _, _ = _coefficient_atoms(state, model)
    prior_mean = mu * (state.xi == 1)
    beta = state.beta.copy()
    diagonal = state.graph.edge_count == 0
    base_lin = (sig_inv @ model.ytx).ravel()
    for idx in lay.blocks:
        eq, reg = np.divmod(idx, k)
        # residualize on the other blocks: subtract P beta restricted to idx, add back P_II beta_I
        p_beta = (sig_inv @ lay.to_matrix(beta) @ model.xtx).ravel()
        lin = base_lin[idx] - p_beta[idx] + prior_mean[idx] / state.lam[idx]
        if diagonal:
            # Sigma diagonal: equations decouple
            p_ii_beta = np.empty(idx.size)
            out = np.empty(idx.size)
            for e in np.unique(eq):
                pos = np.flatnonzero(eq == e)
                r = reg[pos]
                prec = sig_inv[e, e] * model.xtx[np.ix_(r, r)]
                p_ii_beta[pos] = prec @ beta[idx[pos]]
                prec[np.diag_indices(r.size)] += 1.0 / state.lam[idx[pos]]
                out[pos] = _precision_draw(prec, lin[pos] + p_ii_beta[pos], rng)
            beta[idx] = out
        else:
            p_ii = sig_inv[np.ix_(eq, eq)] * model.xtx[np.ix_(reg, reg)]
            lin = lin + p_ii @ beta[idx]
            p_ii[np.diag_indices(idx.size)] += 1.0 / state.lam[idx]
            beta[idx] = _precision_draw(p_ii, lin, rng)
    state.beta = beta
    return state


def update_sigma(state: ChainState, model: Model, rng: np.random.Generator) -> ChainState:
    scatter = model.scatter(state.beta)
    params = HiwParams(model.hyper.hiw_df + model.n_obs, model.scale + scatter, state.graph)
    state.sigma = hiw_sample(params, rng)
    if not np.all(np.isfinite(state.sigma)):
        raise NumericalError("non-finite covariance draw")
    return state


def update_graph(
    state: ChainState, model: Model, rng: np.random.Generator, use_likelihood: bool = True
) -> ChainState:
    """Add/delete-edge Metropolis moves with Sigma integrated out, redrawing
    Sigma from its conditional under the proposed graph on acceptance."""
    if model.q < 2:
        return state
    hyper = model.hyper
    scatter = model.scatter(state.beta) if use_likelihood else None
    for _ in range(hyper.graph_moves):
        cand, log_q, valid = propose_toggle(state.graph, rng)
        model.accepted["graph"][1] += 1
        if not valid:
            continue
        log_a = graph_log_prior(cand, model.prior_graph) - graph_log_prior(state.graph, model.prior_graph) + log_q
        if use_likelihood:
            log_a += graph_log_marginal_likelihood(cand, hyper.hiw_df, model.scale, scatter, model.n_obs)
            log_a -= graph_log_marginal_likelihood(state.graph, hyper.hiw_df, model.scale, scatter, model.n_obs)
        if math.log(rng.random()) < log_a:
            state.graph = cand
            model.accepted["graph"][0] += 1
            if use_likelihood:
                params = HiwParams(hyper.hiw_df + model.n_obs, model.scale + scatter, cand)
            else:
                params = HiwParams(hyper.hiw_df, model.scale, cand)
            state.sigma = hiw_sample(params, rng)
    return state


def update_allocations(state: ChainState, model: Model, rng: np.random.Generator) -> ChainState:
    """Draw (d, xi) for every coefficient.

    With ``collapse_lambda`` the latent scales are integrated out, so the
    weights use normal-gamma densities, and lambda is then redrawn from its
    GIG conditional; together this is an exact block update of (d, xi, lambda).
    Otherwise the weights condition on the current lambda.
    """
    collapse = model.hyper.collapse_lambda
    beta, lam = state.beta, state.lam
    for i, idx in enumerate(model.layout.blocks):
        b = beta[idx]
        l = lam[idx]
        pi = state.pi[i]
        w = stick_weights(state.sticks[i])
        allowed = state.u[idx][:, None] < w[None, :]
        with np.errstate(divide="ignore"):
            if collapse:
                sparse_lw = np.log(pi) + ng_log_density(b, 0.0, state.gamma0, state.tau0)
                slab_lw = np.full(allowed.shape, -np.inf)
                rows, cols = np.nonzero(allowed)
                if rows.size:
                    slab_lw[rows, cols] = np.log1p(-pi) + ng_log_density(
                        b[rows], state.mu[i][cols], state.gam[i][cols], state.tau[i][cols]
                    )
            else:
                sparse_lw = (
                    np.log(pi) + _log_normal_pdf(b, 0.0, l) + _log_gamma_pdf(l, state.gamma0, 0.5 * state.tau0)
                )
                slab_lw = (
                    np.log1p(-pi)
                    + _log_normal_pdf(b[:, None], state.mu[i][None, :], l[:, None])
                    + _log_gamma_pdf(l[:, None], state.gam[i][None, :], 0.5 * state.tau[i][None, :])
                )
                slab_lw = np.where(allowed, slab_lw, -np.inf)
        lw = np.column_stack([sparse_lw, slab_lw])
        # Gumbel-max categorical draw
        choice = np.argmax(lw + rng.gumbel(size=lw.shape), axis=1)
        state.d[idx] = choice
        state.xi[idx] = (choice > 0).astype(state.xi.dtype)
    if collapse:
        update_lambda(state, model, rng)
    return state


def update_pi(state: ChainState, model: Model, rng: np.random.Generator) -> ChainState:
    alpha = model.hyper.mixing_alpha
    for i, idx in enumerate(model.layout.blocks):
        s = int(state.xi[idx].sum())
        state.pi[i] = rng.beta(idx.size + 1 - s, alpha + s)
    return state


def sweep(state: ChainState, model: Model, rng: np.random.Generator, use_likelihood: bool = True) -> ChainState:
    if model.mode == "bnp":
        update_slice_and_sticks(state, model, rng)
    update_lambda(state, model, rng)
    update_atoms(state, model, rng)
    update_beta(state, model, rng)
    update_sigma(state, model, rng)
    update_graph(state, model, rng, use_likelihood)
    if model.mode == "bnp":
        update_allocations(state, model, rng)
        update_pi(state, model, rng)
    return state


# ---------------------------------------------------------------------------
# initialization and driver
# ---------------------------------------------------------------------------


def initial_state(model: Model, rng: np.random.Generator) -> ChainState:
    """Ridge estimates for beta; coefficients with small estimates start sparse,
    the rest in one positive and one negative cluster."""
    lay = model.layout
    n, q = lay.n, lay.q
    if model.n_obs > 0:
        coef = linalg.solve(model.xtx + np.eye(lay.k), model.ytx.T, assume_a="pos").T
        beta = coef.ravel()
        r = model.residuals(beta)
        var = np.maximum(r.var(axis=0), 1e-8) if model.n_obs > 1 else np.ones(q)
    else:
        beta = np.zeros(n)
        var = np.ones(q)
    sigma = np.diag(var)
    graph = DecomposableGraph(q)
    gamma0 = min(model.hyper.gs_shape_max, 10.0)
    spike = 0.01
    tau0 = 2.0 * gamma0 / spike
    if model.mode == "blasso":
        xi = np.zeros(n, dtype=np.int8)
    else:
        xi = (np.abs(beta) > 0.1).astype(np.int8)
    d = np.where(xi == 1, np.where(beta >= 0, 1, 2), 0).astype(np.int64)
    lam = np.where(xi == 1, np.maximum(beta**2, 0.05), spike)
    m_blocks = len(lay.blocks)
    sticks, mus, gams, taus, pis = [], [], [], [], np.empty(m_blocks)
    for i, idx in enumerate(lay.blocks):
        bi, xii = beta[idx], xi[idx]
        pos = bi[(xii == 1) & (bi >= 0)]
        neg = bi[(xii == 1) & (bi < 0)]
        sticks.append(np.array([0.5, 0.5]))
        mus.append(np.array([pos.mean() if pos.size else 0.5, neg.mean() if neg.size else -0.5]))
        gams.append(np.ones(2))
        taus.append(np.full(2, 2.0 / 0.05))
        pis[i] = min(max(1.0 - xii.mean(), 0.05), 0.95)
    return ChainState(
        beta=beta, lam=lam, u=np.full(n, 0.5), d=d, xi=xi, pi=pis, gamma0=gamma0, tau0=tau0,
        sticks=sticks, mu=mus, gam=gams, tau=taus, sigma=sigma, graph=graph,
    )


def _record(state: ChainState, model: Model, iteration: int) -> DrawRecord:
    atoms = []
    for i, idx in enumerate(model.layout.blocks):
        lab = np.unique(state.d[idx][state.xi[idx] == 1])
        atoms.append(np.column_stack([lab, state.mu[i][lab - 1], state.gam[i][lab - 1], state.tau[i][lab - 1]]))
    return DrawRecord(
        iteration=iteration,
        beta=state.beta.copy(),
        xi=state.xi.copy(),
        d=state.d.copy(),
        pi=state.pi.copy(),
        gamma0=state.gamma0,
        tau0=state.tau0,
        atoms=atoms,
        sigma=state.sigma.copy(),
        edge_count=state.graph.edge_count,
        lambda_norm=float(np.linalg.norm(state.lam)),
    )


def _adapt(model: Model, window: dict) -> None:
    for key in ("sparse", "slab"):
        acc, tot = model.accepted[key][0] - window[key][0], model.accepted[key][1] - window[key][1]
        if tot:
            rate = acc / tot
            # near-zero acceptance (a shape piled against its cap) needs a fast contraction
            factor = 0.25 if rate < 0.05 else math.exp(rate - _TARGET_ACCEPT)
            model.step[key] = float(np.clip(model.step[key] * factor, 1e-6, 5.0))


def run_chain(
    values,
    spec: PanelSpec,
    hyper: Hyperparameters,
    rng: np.random.Generator | None = None,
    blocks=None,
    mode: str = "bnp",
    state: ChainState | None = None,
) -> ChainResult:
    """Run one chain; keeps post-burn-in iterations spaced by ``hyper.thin``."""
    if rng is None:
        rng = np.random.default_rng(hyper.seed)
    model = Model(values, spec, hyper, blocks, mode)
    if state is None:
        state = initial_state(model, rng)
    draws: list[DrawRecord] = []
    trace = np.empty(hyper.iterations)
    window = {k: list(v) for k, v in model.accepted.items()}
    for it in range(hyper.iterations):
        sweep(state, model, rng)
        trace[it] = np.linalg.norm(state.lam)
        if hyper.adapt_step and it < hyper.burn_in and (it + 1) % _ADAPT_EVERY == 0:
            _adapt(model, window)
            window = {k: list(v) for k, v in model.accepted.items()}
        if it >= hyper.burn_in and (it - hyper.burn_in) % hyper.thin == 0:
            draws.append(_record(state, model, it))
    acceptance = {k: (v[0] / v[1] if v[1] else float("nan")) for k, v in model.accepted.items()}
    acceptance.update({f"step_{k}": v for k, v in model.step.items()})
    return ChainResult(draws=draws, trace=trace, burn_in=hyper.burn_in, thin=hyper.thin, acceptance=acceptance)


def blasso_baseline(values, spec: PanelSpec, hyper: Hyperparameters, rng: np.random.Generator | None = None,
                    blocks=None) -> ChainResult:
    """Bayesian-Lasso fit: every coefficient pinned to the sparse component."""
    return run_chain(values, spec, hyper, rng, blocks=blocks, mode="blasso")


def posterior_mean_beta(draws: list[DrawRecord]) -> np.ndarray:
    if not draws:
        raise ValueError("no draws")
    return np.mean([r.beta for r in draws], axis=0)


def with_overrides(hyper: Hyperparameters, **kw) -> Hyperparameters:
    return replace(hyper, **kw)


def sample_prior(model: Model, rng: np.random.Generator, graph_burn: int = 50) -> ChainState:
    """Exact draw of the full latent state from the prior (no data)."""
    hyper = model.hyper
    lay = model.layout
    n, q = lay.n, lay.q
    alpha = hyper.dp_concentration
    g0, t0 = gs_sample_exact(model.sparse_prior, rng, 1)
    beta, lam, u = np.empty(n), np.empty(n), np.empty(n)
    d = np.zeros(n, dtype=np.int64)
    xi = np.zeros(n, dtype=np.int8)
    pis = np.empty(len(lay.blocks))
    sticks, mus, gams, taus = [], [], [], []
    for i, idx in enumerate(lay.blocks):
        pi = rng.beta(1.0, hyper.mixing_alpha) if model.mode == "bnp" else 1.0
        pis[i] = pi
        v: list[float] = []
        xib = (rng.random(idx.size) >= pi).astype(np.int8)
        db = np.zeros(idx.size, dtype=np.int64)
        for j in np.flatnonzero(xib):
            # inverse-cdf over lazily broken sticks
            r = rng.random()
            acc, rem, k = 0.0, 1.0, 0
            while True:
                if k == len(v):
                    v.append(rng.beta(1.0, alpha))
                acc += rem * v[k]
                rem *= 1.0 - v[k]
                k += 1
                if r < acc:
                    break
            db[j] = k
        w = stick_weights(np.array(v))
        ub = rng.random(idx.size)
        sel = xib == 1
        ub[sel] *= w[db[sel] - 1]
        total, rem = w.sum(), 1.0 - w.sum()
        while total <= 1.0 - ub.min():
            vk = rng.beta(1.0, alpha)
            v.append(vk)
            total += rem * vk
            rem *= 1.0 - vk
        k_tot = len(v)
        mu = hyper.atom_mean + math.sqrt(hyper.atom_var) * rng.standard_normal(k_tot)
        gam, tau = gs_sample_exact(model.slab_prior, rng, k_tot)
        shape = np.where(sel, gam[np.maximum(db, 1) - 1], g0[0])
        rate = 0.5 * np.where(sel, tau[np.maximum(db, 1) - 1], t0[0])
        lb = rng.gamma(shape, 1.0 / rate)
        lb = np.maximum(lb, np.finfo(float).tiny)
        loc = np.where(sel, mu[np.maximum(db, 1) - 1], 0.0)
        beta[idx] = loc + np.sqrt(lb) * rng.standard_normal(idx.size)
        lam[idx], u[idx], d[idx], xi[idx] = lb, ub, db, xib
        sticks.append(np.array(v))
        mus.append(mu)
        gams.append(gam)
        taus.append(tau)
    graph = DecomposableGraph(q)
    if q <= 3:
        # every graph on at most three vertices is decomposable: edges are independent
        edges = [(a, b) for a in range(q) for b in range(a + 1, q) if rng.random() < model.prior_graph.psi]
        graph = DecomposableGraph(q, edges)
    else:
        for _ in range(graph_burn * graph.max_edges):
            cand, _, valid = propose_toggle(graph, rng)
            if valid and math.log(rng.random()) < graph_log_prior(cand, model.prior_graph) - graph_log_prior(
                graph, model.prior_graph
            ):
                graph = cand
    sigma = hiw_sample(HiwParams(hyper.hiw_df, model.scale, graph), rng)
    return ChainState(
        beta=beta, lam=lam, u=u, d=d, xi=xi, pi=pis, gamma0=float(g0[0]), tau0=float(t0[0]),
        sticks=sticks, mu=mus, gam=gams, tau=taus, sigma=sigma, graph=graph,
    )


def simulate_observations(state: ChainState, model: Model, presample: np.ndarray, n_obs: int,
                          rng: np.random.Generator) -> np.ndarray:
    """Generate ``n_obs`` rows from the VAR given the state, after ``presample`` rows."""
    from .var import regressor_vector

    spec = model.spec
    coef = model.layout.to_matrix(state.beta)
    chol = linalg.cholesky(state.sigma, lower=True)
    hist = [np.asarray(r, dtype=float) for r in np.atleast_2d(presample)]
    for _ in range(n_obs):
        x = regressor_vector(np.array(hist), spec)
        hist.append(coef @ x + chol @ rng.standard_normal(model.q))
    return np.array(hist)
