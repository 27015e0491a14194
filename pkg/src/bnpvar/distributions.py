"""Densities and random variate generators for the nonstandard laws of the model.

Covers the normal-gamma scale mixture, the generalized inverse Gaussian (GIG),
the Gamma scale-shape hyperprior on (shape, scale) pairs and the hyper inverse
Wishart law on covariance matrices Markov with respect to a decomposable graph.

All samplers take an explicit ``numpy.random.Generator`` and hold no state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING

import mpmath
import numpy as np
from scipy import linalg, special

if TYPE_CHECKING:
    from .graph import DecomposableGraph

LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Bessel K
# ---------------------------------------------------------------------------


def log_bessel_k(order, x):
    """Natural log of the modified Bessel function of the second kind.

    Uses the exponentially scaled ``kve`` so that large arguments do not
    underflow; falls back to arbitrary precision when ``kve`` overflows
    (large order, small argument).
    """
    order = np.abs(np.asarray(order, dtype=float))
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("bessel_k requires x > 0")
    order, x = np.broadcast_arrays(order, x)
    with np.errstate(over="ignore", divide="ignore"):
        out = np.log(special.kve(order, x)) - x
    bad = ~np.isfinite(out)
    if np.any(bad):
        fixed = [
            float(mpmath.log(mpmath.besselk(float(v), float(z))))
            for v, z in zip(order[bad], x[bad])
        ]
        out = np.array(out, copy=True)
        out[bad] = fixed
    return out if out.ndim else float(out)


def bessel_k(order: float, x: float) -> float:
    """K_order(x) for x > 0; symmetric in the order."""
    return float(np.exp(log_bessel_k(order, x)))


# ---------------------------------------------------------------------------
# Normal-gamma
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalGammaParams:
    mu: float
    gamma: float
    tau: float

    def __post_init__(self):
        if not (np.isfinite(self.mu) and self.gamma > 0 and self.tau > 0):
            raise ValueError(f"invalid normal-gamma parameters {self}")


def ng_log_pdf(x: float, params: NormalGammaParams) -> float:
    """Log density of NG(mu, gamma, tau) via the Bessel-K closed form.

    At ``x == mu`` the density is finite only for gamma > 1/2; for
    gamma <= 1/2 it is pointwise unbounded there and ``inf`` is returned.
    """
    if not np.isfinite(x):
        raise ValueError("x must be finite")
    mu, g, tau = params.mu, params.gamma, params.tau
    nu = g - 0.5
    r = abs(x - mu)
    const = (2 * g + 1) / 4 * math.log(tau) - nu * math.log(2.0) - 0.5 * math.log(math.pi) - special.gammaln(g)
    if r == 0.0:
        if nu <= 0:
            return math.inf
        # |r|^nu K_nu(sqrt(tau) r) -> Gamma(nu) 2^(nu-1) tau^(-nu/2)
        return const + special.gammaln(nu) + (nu - 1) * math.log(2.0) - 0.5 * nu * math.log(tau)
    return const + nu * math.log(r) + log_bessel_k(nu, math.sqrt(tau) * r)


def ng_log_density(x, mu, gamma, tau):
    """Vectorized NG log density; arguments broadcast. +inf at x == mu when gamma <= 1/2."""
    x, mu, gamma, tau = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, mu, gamma, tau)))
    nu = gamma - 0.5
    r = np.abs(x - mu)
    const = (2 * gamma + 1) / 4 * np.log(tau) - nu * math.log(2.0) - 0.5 * math.log(math.pi) - special.gammaln(gamma)
    out = np.empty(r.shape)
    pos = r > 0
    if np.any(pos):
        out[pos] = const[pos] + nu[pos] * np.log(r[pos]) + log_bessel_k(nu[pos], np.sqrt(tau[pos]) * r[pos])
    at = ~pos
    if np.any(at):
        fin = at & (nu > 0)
        out[fin] = (
            const[fin] + special.gammaln(nu[fin]) + (nu[fin] - 1) * math.log(2.0) - 0.5 * nu[fin] * np.log(tau[fin])
        )
        out[at & (nu <= 0)] = np.inf
    return out


def ng_sample(params: NormalGammaParams, rng: np.random.Generator, size=None):
    """Draw lambda ~ Ga(gamma, rate tau/2) then x ~ N(mu, lambda)."""
    lam = rng.gamma(params.gamma, 2.0 / params.tau, size=size)
    return params.mu + np.sqrt(lam) * rng.standard_normal(size=size)


# ---------------------------------------------------------------------------
# Generalized inverse Gaussian
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GigParams:
    """GIG law with density proportional to x^(c-1) exp(-(a x + b / x) / 2).

    Fields may be arrays of a common shape for vectorized sampling.
    """

    a: float | np.ndarray
    b: float | np.ndarray
    c: float | np.ndarray

    def __post_init__(self):
        a, b, c = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (self.a, self.b, self.c)))
        if np.any(~(a > 0)):
            raise ValueError("GIG requires a > 0")
        if np.any(~(b >= 0)):
            raise ValueError("GIG requires b >= 0")
        if np.any((b == 0) & ~(c > 0)):
            raise ValueError("GIG with b = 0 requires c > 0 (Gamma limit)")


def gig_mean(a, b, c):
    """Analytic mean sqrt(b/a) K_{c+1}(w) / K_c(w) with w = sqrt(ab)."""
    w = np.sqrt(a * b)
    return np.sqrt(b / a) * np.exp(log_bessel_k(c + 1, w) - log_bessel_k(c, w))


def _gig_mode(lam, omega):
    # both branches are evaluated; each is only used where it is well defined
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(
            lam >= 1.0,
            (np.sqrt((lam - 1.0) ** 2 + omega**2) + (lam - 1.0)) / omega,
            omega / (np.sqrt((1.0 - lam) ** 2 + omega**2) + (1.0 - lam)),
        )


def _gig_rou_shift(lam, omega, rng):
    """Ratio-of-uniforms with mode shift (Dagpunar / Lehner)."""
    t = 0.5 * (lam - 1.0)
    s = 0.25 * omega
    xm = _gig_mode(lam, omega)
    nc = t * np.log(xm) - s * (xm + 1.0 / xm)
    a = -(2.0 * (lam + 1.0) / omega + xm)
    b = 2.0 * (lam - 1.0) * xm / omega - 1.0
    p = b - a * a / 3.0
    q = 2.0 * a**3 / 27.0 - a * b / 3.0 + xm
    fi = np.arccos(np.clip(-q / (2.0 * np.sqrt(-(p**3) / 27.0)), -1.0, 1.0))
    fak = 2.0 * np.sqrt(-p / 3.0)
    y1 = fak * np.cos(fi / 3.0) - a / 3.0
    y2 = fak * np.cos(fi / 3.0 + 4.0 / 3.0 * np.pi) - a / 3.0
    uplus = (y1 - xm) * np.exp(t * np.log(y1) - s * (y1 + 1.0 / y1) - nc)
    uminus = (y2 - xm) * np.exp(t * np.log(y2) - s * (y2 + 1.0 / y2) - nc)
    out = np.empty_like(lam)
    todo = np.arange(lam.size)
    while todo.size:
        u = uminus[todo] + rng.random(todo.size) * (uplus[todo] - uminus[todo])
        v = rng.random(todo.size)
        x = u / v + xm[todo]
        with np.errstate(invalid="ignore", divide="ignore"):
            ok = (x > 0) & (np.log(v) <= t[todo] * np.log(x) - s[todo] * (x + 1.0 / x) - nc[todo])
        out[todo[ok]] = x[ok]
        todo = todo[~ok]
    return out


def _gig_rou_noshift(lam, omega, rng):
    t = 0.5 * (lam - 1.0)
    s = 0.25 * omega
    xm = _gig_mode(lam, omega)
    nc = t * np.log(xm) - s * (xm + 1.0 / xm)
    ym = ((lam + 1.0) + np.sqrt((lam + 1.0) ** 2 + omega**2)) / omega
    um = np.exp(0.5 * (lam + 1.0) * np.log(ym) - s * (ym + 1.0 / ym) - nc)
    out = np.empty_like(lam)
    todo = np.arange(lam.size)
    while todo.size:
        u = um[todo] * rng.random(todo.size)
        v = rng.random(todo.size)
        x = u / v
        with np.errstate(invalid="ignore", divide="ignore"):
            ok = (x > 0) & (np.log(v) <= t[todo] * np.log(x) - s[todo] * (x + 1.0 / x) - nc[todo])
        out[todo[ok]] = x[ok]
        todo = todo[~ok]
    return out


def _gig_small_omega(lam, omega, rng):
    """Hormann-Leydold rejection from a three-piece hat; 0 <= lam < 1, small omega."""
    xm = _gig_mode(lam, omega)
    x0 = omega / (1.0 - lam)
    k0 = np.exp((lam - 1.0) * np.log(xm) - 0.5 * omega * (xm + 1.0 / xm))
    a0 = k0 * x0
    wide = x0 >= 2.0 / omega
    k1 = np.where(wide, 0.0, np.exp(-omega))
    lam_pos = lam > 0
    safe_lam = np.where(lam_pos, lam, 1.0)
    a1_pow = k1 / safe_lam * ((2.0 / omega) ** lam - x0**lam)
    a1_log = k1 * np.log(2.0 / (omega * omega))
    a1 = np.where(wide, 0.0, np.where(lam_pos, a1_pow, a1_log))
    k2 = np.where(wide, x0 ** (lam - 1.0), (2.0 / omega) ** (lam - 1.0))
    a2 = np.where(wide, k2 * 2.0 * np.exp(-omega * x0 / 2.0) / omega, k2 * 2.0 * np.exp(-1.0) / omega)
    lower2 = np.maximum(x0, 2.0 / omega)

    out = np.empty_like(lam)
    todo = np.arange(lam.size)
    while todo.size:
        i = todo
        v = (a0[i] + a1[i] + a2[i]) * rng.random(i.size)
        x = np.empty(i.size)
        hx = np.empty(i.size)
        r0 = v <= a0[i]
        x[r0] = x0[i][r0] * v[r0] / a0[i][r0]
        hx[r0] = k0[i][r0]
        v1 = v - a0[i]
        r1 = ~r0 & (v1 <= a1[i])
        if np.any(r1):
            li, ki, xi = lam[i][r1], k1[i][r1], x0[i][r1]
            pos = li > 0
            xr = np.empty(li.size)
            xr[pos] = (xi[pos] ** li[pos] + li[pos] / ki[pos] * v1[r1][pos]) ** (1.0 / li[pos])
            xr[~pos] = xi[~pos] * np.exp(v1[r1][~pos] / ki[~pos])
            x[r1] = xr
            hx[r1] = ki * xr ** (li - 1.0)
        r2 = ~r0 & ~r1
        if np.any(r2):
            v2 = v1[r2] - a1[i][r2]
            om = omega[i][r2]
            x[r2] = -2.0 / om * np.log(np.exp(-om / 2.0 * lower2[i][r2]) - om / (2.0 * k2[i][r2]) * v2)
            hx[r2] = k2[i][r2] * np.exp(-om / 2.0 * x[r2])
        u = rng.random(i.size) * hx
        with np.errstate(invalid="ignore", divide="ignore"):
            ok = np.log(u) <= (lam[i] - 1.0) * np.log(x) - omega[i] / 2.0 * (x + 1.0 / x)
        ok &= np.isfinite(x) & (x > 0)
        out[i[ok]] = x[ok]
        todo = i[~ok]
    return out


def _gig_standard(lam, omega, rng):
    """Draws from the two-parameter GIG(lam, omega) with lam >= 0, omega > 0."""
    out = np.empty_like(lam)
    shift = (lam > 2.0) | (omega > 3.0)
    noshift = ~shift & ((lam >= 1.0 - 2.25 * omega**2) | (omega > 0.2))
    small = ~shift & ~noshift
    for mask, fn in ((shift, _gig_rou_shift), (noshift, _gig_rou_noshift), (small, _gig_small_omega)):
        if np.any(mask):
            out[mask] = fn(lam[mask], omega[mask], rng)
    return out


_OMEGA_GAMMA_LIMIT = 1e-10


def gig_sample(params: GigParams, rng: np.random.Generator, size=None):
    """Draw from GIG(a, b, c) for arbitrary real order c.

    Vectorized over array-valued params. Negative orders are handled through
    the reciprocal identity x -> 1/x, which maps (a, b, c) to (b, a, -c);
    b == 0 (or a vanishing sqrt(ab) with c > 0) reduces to Gamma(c, rate a/2).
    """
    a, b, c = (np.asarray(v, dtype=float) for v in (params.a, params.b, params.c))
    shape = np.broadcast_shapes(a.shape, b.shape, c.shape) if size is None else tuple(np.atleast_1d(size))
    a, b, c = (np.broadcast_to(v, shape).ravel() for v in (a, b, c))
    out = np.empty(a.size)

    neg = c < 0
    # reflect: 1/X ~ GIG(b, a, -c)
    aa = np.where(neg, b, a)
    bb = np.where(neg, a, b)
    lam = np.abs(c)
    omega = np.sqrt(aa * bb)

    gam = (omega < _OMEGA_GAMMA_LIMIT) & (lam > 0)
    if np.any(gam):
        out[gam] = rng.gamma(lam[gam], 2.0 / aa[gam])
    rest = ~gam
    if np.any(rest):
        y = _gig_standard(lam[rest], omega[rest], rng)
        out[rest] = y * np.sqrt(bb[rest] / aa[rest])
    out[neg] = 1.0 / out[neg]
    out = out.reshape(shape)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Gamma scale-shape
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GammaScaleShapeParams:
    """Joint law on (shape x, scale y) with kernel
    y^(nu x - 1) p^(x - 1) exp(-s y) / Gamma(x)^n.

    ``x_max`` truncates the shape; it is required whenever the shape marginal
    is not integrable on (0, inf), which happens for nu > n.
    """

    nu: float
    p: float
    s: float
    n: float
    x_max: float = math.inf

    def __post_init__(self):
        if not all(v > 0 for v in (self.nu, self.p, self.s, self.n)):
            raise ValueError(f"Gamma scale-shape parameters must be positive: {self}")
        if not self.x_max > 0:
            raise ValueError("x_max must be positive")
        if math.isinf(self.x_max) and not gs_is_proper(self.nu, self.p, self.s, self.n):
            raise ValueError(
                f"shape marginal is not integrable for nu={self.nu}, n={self.n}; set a finite x_max"
            )

    @property
    def log_p(self) -> float:
        return math.log(self.p)


def gs_is_proper(nu: float, p: float, s: float, n: float) -> bool:
    """Whether the untruncated shape marginal integrates on (0, inf).

    Its log behaves like (nu - n) x log x + x (nu log(nu / s) + log p) + O(log x).
    """
    if n > nu:
        return True
    if n < nu:
        return False
    return nu * math.log(nu / s) + math.log(p) < 0


def gs_log_kernel(x: float, y: float, params: GammaScaleShapeParams) -> float:
    """Log of the unnormalized joint kernel at shape ``x`` and scale ``y``."""
    return (
        (params.nu * x - 1.0) * math.log(y)
        + (x - 1.0) * params.log_p
        - params.s * y
        - params.n * special.gammaln(x)
    )


def _gs_log_marginal(x, nu, log_p, s, n):
    # integral over y of the joint kernel: Gamma(nu x) / s^(nu x)
    return special.gammaln(nu * x) - n * special.gammaln(x) + (x - 1.0) * log_p - nu * x * np.log(s)


def gs_log_marginal(x, params: GammaScaleShapeParams):
    """Unnormalized log marginal density of the shape; -inf above ``x_max``."""
    x = np.asarray(x, dtype=float)
    out = _gs_log_marginal(x, params.nu, params.log_p, params.s, params.n)
    out = np.where(x <= params.x_max, out, -np.inf)
    return out if out.ndim else float(out)


def gs_mh_step(shape, nu, log_p, s, n, x_max, step, rng):
    """One random-walk Metropolis move on log(shape) targeting the shape marginal.

    Array arguments broadcast; returns (new_shape, accepted).
    """
    shape = np.asarray(shape, dtype=float)
    z = rng.standard_normal(shape.shape)
    prop = shape * np.exp(step * z)
    with np.errstate(over="ignore", invalid="ignore"):
        log_ratio = (
            _gs_log_marginal(prop, nu, log_p, s, n)
            - _gs_log_marginal(shape, nu, log_p, s, n)
            + np.log(prop)
            - np.log(shape)
        )
    log_ratio = np.where(prop <= x_max, log_ratio, -np.inf)
    log_ratio = np.where(np.isnan(log_ratio), -np.inf, log_ratio)
    accept = np.log(rng.random(shape.shape)) < log_ratio
    return np.where(accept, prop, shape), accept


def gs_sample(
    params: GammaScaleShapeParams,
    current: tuple[float, float],
    rng: np.random.Generator,
    step: float = 0.5,
):
    """Collapsed Gibbs move: MH on the shape marginal, then scale | shape ~ Ga(nu x, rate s).

    ``current`` is the previous (shape, scale) pair; the previous scale is not
    used since the scale is redrawn exactly. Returns (shape, scale, accepted).
    """
    x, accepted = gs_mh_step(current[0], params.nu, params.log_p, params.s, params.n, params.x_max, step, rng)
    y = rng.gamma(params.nu * x, 1.0 / params.s)
    if np.ndim(x) == 0:
        return float(x), float(y), bool(accepted)
    return x, y, accepted


@lru_cache(maxsize=64)
def _gs_inverse_cdf_table(nu, log_p, s, n, x_max, points=20001):
    """Tabulated CDF of log(shape) under the shape marginal."""
    hi = x_max if math.isfinite(x_max) else 1e4
    u = np.linspace(math.log(1e-12), math.log(hi), 4001)
    lg = _gs_log_marginal(np.exp(u), nu, log_p, s, n) + u
    keep = lg > lg.max() - 60.0
    lo_u, hi_u = u[keep][0], u[keep][-1]
    step = u[1] - u[0]
    lo_u = max(lo_u - step, u[0])
    hi_u = min(hi_u + step, u[-1])
    u = np.linspace(lo_u, hi_u, points)
    lg = _gs_log_marginal(np.exp(u), nu, log_p, s, n) + u
    dens = np.exp(lg - lg.max())
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(u))])
    cdf /= cdf[-1]
    return u, cdf


def gs_sample_exact(params: GammaScaleShapeParams, rng: np.random.Generator, size=None):
    """Independent (shape, scale) draws via inverse-CDF on a fine grid of log(shape)."""
    u_grid, cdf = _gs_inverse_cdf_table(params.nu, params.log_p, params.s, params.n, params.x_max)
    r = rng.random(size)
    x = np.exp(np.interp(r, cdf, u_grid))
    y = rng.gamma(params.nu * x, 1.0 / params.s)
    return x, y


# ---------------------------------------------------------------------------
# (Hyper) inverse Wishart
# ---------------------------------------------------------------------------


def inverse_wishart_sample(df: float, scale: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-Wishart draw in the Dawid-Lauritzen parametrization.

    Density proportional to |S|^{-(df + 2p)/2} exp(-tr(S^{-1} scale)/2); this
    is the textbook IW with ``df + p - 1`` degrees of freedom. Sampled as the
    inverse of a Bartlett-decomposed Wishart.
    """
    scale = np.atleast_2d(scale)
    p = scale.shape[0]
    nu = df + p - 1.0
    if p == 1:
        return scale / rng.chisquare(nu)
    # Wishart(nu, scale^{-1}) = C A A' C' with C C' = scale^{-1}
    chol_scale = linalg.cholesky(scale, lower=True)
    a = np.zeros((p, p))
    a[np.diag_indices(p)] = np.sqrt(rng.chisquare(nu - np.arange(p)))
    a[np.tril_indices(p, -1)] = rng.standard_normal(p * (p - 1) // 2)
    # W^{-1} = L^{-T} ... with scale^{-1} = L^{-T} L^{-1}: W = L^{-T} A A' L^{-1}
    # so Sigma = W^{-1} = L A^{-T} A^{-1} L'
    m = linalg.solve_triangular(a, chol_scale.T, lower=True)  # A^{-1} L'
    sigma = m.T @ m
    return 0.5 * (sigma + sigma.T)


@dataclass(frozen=True)
class HiwParams:
    df: float
    scale: np.ndarray
    graph: "DecomposableGraph"

    def __post_init__(self):
        if not self.df > 0:
            raise ValueError("HIW degrees of freedom must be positive")
        sc = np.asarray(self.scale)
        if sc.shape != (self.graph.vertex_count, self.graph.vertex_count):
            raise ValueError("scale matrix does not match the graph size")
        if not np.allclose(sc, sc.T):
            raise ValueError("scale matrix must be symmetric")


def hiw_sample(params: HiwParams, rng: np.random.Generator) -> np.ndarray:
    """Draw Sigma ~ HIW_G(df, scale) sequentially along a perfect clique sequence.

    The first clique block is inverse-Wishart; every later clique C = S u R
    adds the residual R through its conditional given the separator S, and
    the entries between R and earlier vertices outside S are filled by the
    conditional-independence completion, so Sigma^{-1} vanishes on non-edges.
    """
    g = params.graph
    if not g.is_decomposable():
        raise ValueError("HIW sampling requires a decomposable graph")
    d = np.asarray(params.scale, dtype=float)
    q = g.vertex_count
    sigma = np.zeros((q, q))
    done: list[int] = []
    for clique, sep in g.perfect_sequence():
        rest = [v for v in clique if v not in sep]
        if not sep:
            sigma[np.ix_(rest, rest)] = inverse_wishart_sample(params.df, d[np.ix_(rest, rest)], rng)
            done.extend(rest)
            continue
        d_ss = d[np.ix_(sep, sep)]
        d_sr = d[np.ix_(sep, rest)]
        d_rr = d[np.ix_(rest, rest)]
        chol_ss = linalg.cho_factor(d_ss, lower=True)
        m = linalg.cho_solve(chol_ss, d_sr)
        d_r_s = d_rr - d_sr.T @ m
        sig_r_s = inverse_wishart_sample(params.df + len(sep), d_r_s, rng)
        # U = Sigma_SS^{-1} Sigma_SR ~ MN(m, D_SS^{-1}, Sigma_{R.S})
        row = linalg.solve_triangular(chol_ss[0], np.eye(len(sep)), lower=True).T  # L^{-T}: row cov D_SS^{-1}
        col = linalg.cholesky(sig_r_s, lower=True)
        u = m + row @ rng.standard_normal((len(sep), len(rest))) @ col.T
        sig_ss = sigma[np.ix_(sep, sep)]
        sigma[np.ix_(rest, rest)] = sig_r_s + u.T @ sig_ss @ u
        cross = u.T @ sigma[np.ix_(sep, done)]
        sigma[np.ix_(rest, done)] = cross
        sigma[np.ix_(done, rest)] = cross.T
        done.extend(rest)
    return 0.5 * (sigma + sigma.T)


def log_multigamma(a: float, p: int) -> float:
    return float(special.multigammaln(a, p)) if p > 0 else 0.0
