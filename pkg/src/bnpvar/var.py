"""Panel VAR data structures, SUR design construction, synthetic DGPs and
realized-volatility preprocessing."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class PanelSpec:
    units: int = 1
    vars_per_unit: int = 1
    lags: int = 1

    def __post_init__(self):
        if min(self.units, self.vars_per_unit, self.lags) < 1:
            raise ValueError("units, vars_per_unit and lags must all be >= 1")

    @property
    def n_series(self) -> int:
        return self.units * self.vars_per_unit

    @property
    def n_regressors(self) -> int:
        return 1 + self.n_series * self.lags

    @property
    def n_coefficients(self) -> int:
        return self.n_series * self.n_regressors


@dataclass
class TimeSeriesData:
    values: np.ndarray
    labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[0] == 1 and self.values.shape[1] > 1 and not self.labels:
            self.values = self.values.T
        if not self.labels:
            self.labels = [f"y{k + 1}" for k in range(self.values.shape[1])]
        if len(self.labels) != self.values.shape[1]:
            raise ValueError("one label per column required")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("time series contains missing or non-finite values")

    @property
    def length(self) -> int:
        return self.values.shape[0]

    def window(self, start: int, stop: int) -> "TimeSeriesData":
        return TimeSeriesData(self.values[start:stop], list(self.labels))


def regressor_vector(history: np.ndarray, spec: PanelSpec) -> np.ndarray:
    """(1, lagged values) from the last ``spec.lags`` rows of ``history``.

    Unit-major, lag-minor: for each unit its m variables at lag 1, then lag 2...
    """
    n, m, p = spec.units, spec.vars_per_unit, spec.lags
    parts = [np.ones(1)]
    for unit in range(n):
        cols = slice(unit * m, (unit + 1) * m)
        for lag in range(1, p + 1):
            parts.append(history[-lag, cols])
    return np.concatenate(parts)


def build_design(data: TimeSeriesData, spec: PanelSpec, t: int) -> np.ndarray:
    """Regressor vector x_t for the 1-based time index ``t`` (requires t > p)."""
    if t <= spec.lags or t > data.length:
        raise ValueError(f"time index {t} outside ({spec.lags}, {data.length}]")
    if data.values.shape[1] != spec.n_series:
        raise ValueError("data columns do not match the panel spec")
    return regressor_vector(data.values[: t - 1], spec)


def design_matrices(values: np.ndarray, spec: PanelSpec) -> tuple[np.ndarray, np.ndarray]:
    """Stacked regressors X (T-p, K) and responses Y (T-p, q)."""
    values = np.asarray(values, dtype=float)
    t_total, q = values.shape
    if q != spec.n_series:
        raise ValueError("data columns do not match the panel spec")
    p = spec.lags
    if t_total <= p:
        raise ValueError("need more observations than lags")
    m = spec.vars_per_unit
    cols = [np.ones((t_total - p, 1))]
    for unit in range(spec.units):
        for lag in range(1, p + 1):
            cols.append(values[p - lag : t_total - lag, unit * m : (unit + 1) * m])
    return np.hstack(cols), values[p:]


class CoefficientLayout:
    """Flat coefficient indexing for the SUR form.

    beta is equation-major: flat index = equation * K + regressor, so that
    y_t = (I_q kron x_t') beta. Regressor 0 is the intercept.
    """

    def __init__(self, spec: PanelSpec, blocks: list[np.ndarray] | None = None):
        self.spec = spec
        self.q = spec.n_series
        self.k = spec.n_regressors
        self.n = self.q * self.k
        # regressor -> (series index, lag); intercept -> (-1, 0)
        reg_series = [-1]
        reg_lag = [0]
        m = spec.vars_per_unit
        for unit in range(spec.units):
            for lag in range(1, spec.lags + 1):
                for v in range(m):
                    reg_series.append(unit * m + v)
                    reg_lag.append(lag)
        self.regressor_series = np.array(reg_series)
        self.regressor_lag = np.array(reg_lag)
        self.blocks = self.lag_blocks() if blocks is None else [np.asarray(b, dtype=int) for b in blocks]
        covered = np.sort(np.concatenate(self.blocks))
        if not np.array_equal(covered, np.arange(self.n)):
            raise ValueError("blocks must partition the coefficient indices")
        self.block_of = np.empty(self.n, dtype=int)
        for i, b in enumerate(self.blocks):
            self.block_of[b] = i

    def flat_index(self, equation: int, regressor: int) -> int:
        return equation * self.k + regressor

    def unflat(self, index: int) -> tuple[int, int]:
        return divmod(int(index), self.k)

    def coefficient_lag(self) -> np.ndarray:
        """Lag of each flat coefficient; 0 for intercepts."""
        return np.tile(self.regressor_lag, self.q)

    def lag_blocks(self) -> list[np.ndarray]:
        """One block per lag; intercepts join the lag-1 block."""
        lag = self.coefficient_lag()
        lag = np.where(lag == 0, 1, lag)
        return [np.flatnonzero(lag == l) for l in range(1, self.spec.lags + 1)]

    def lag_index(self, lag: int) -> np.ndarray:
        """(q, q) flat indices of B_lag: entry (i, j) is the coefficient of
        series j at the given lag in equation i."""
        out = np.empty((self.q, self.q), dtype=int)
        for r in np.flatnonzero(self.regressor_lag == lag):
            j = self.regressor_series[r]
            out[:, j] = np.arange(self.q) * self.k + r
        return out

    def to_matrix(self, beta: np.ndarray) -> np.ndarray:
        """(q, K) coefficient matrix, row e = equation e."""
        return np.asarray(beta).reshape(self.q, self.k)

    def from_matrix(self, mat: np.ndarray) -> np.ndarray:
        return np.asarray(mat).reshape(-1).copy()

    def lag_matrix(self, beta: np.ndarray, lag: int) -> np.ndarray:
        return np.asarray(beta)[self.lag_index(lag)]

    def intercepts(self, beta: np.ndarray) -> np.ndarray:
        return self.to_matrix(beta)[:, 0]

    def companion_coefficients(self, beta: np.ndarray) -> np.ndarray:
        """(q, q p) matrix [B_1 ... B_p]."""
        return np.hstack([self.lag_matrix(beta, l) for l in range(1, self.spec.lags + 1)])


def phi(i: int, j: int, n: int) -> int:
    """1-based position of cell (i, j) of an n x n lag matrix in row-major order."""
    return n * (i - 1) + j


def check_stationarity(coef, lags: int = 1) -> bool:
    """True iff the companion matrix of [B_1 ... B_p] has spectral radius < 1."""
    b = np.atleast_2d(np.asarray(coef, dtype=float))
    m = b.shape[0]
    if b.shape[1] != m * lags:
        raise ValueError("coefficient matrix must be m x (m p)")
    comp = np.zeros((m * lags, m * lags))
    comp[:m] = b
    if lags > 1:
        comp[m:, :-m] = np.eye(m * (lags - 1))
    return bool(np.max(np.abs(np.linalg.eigvals(comp))) < 1.0)


@dataclass
class DgpConfig:
    kind: str = "block"
    dimension: int = 20
    block_size: int = 4
    nonzero_count: int = 150
    coefficient_range: tuple[float, float] = (-1.4, 1.4)
    noise_cov: np.ndarray | None = None
    horizon: int = 100
    burn_in: int = 100
    max_redraws: int = 1000

    def __post_init__(self):
        if self.kind not in ("block", "random"):
            raise ValueError("kind must be 'block' or 'random'")
        if self.kind == "block" and self.dimension % self.block_size:
            raise ValueError("dimension must be a multiple of block_size")
        if self.kind == "random" and not 0 <= self.nonzero_count <= self.dimension**2:
            raise ValueError("nonzero_count out of range")
        if self.horizon < 2:
            raise ValueError("horizon must be >= 2")


def _draw_coefficients(config: DgpConfig, rng: np.random.Generator) -> np.ndarray:
    lo, hi = config.coefficient_range
    m = config.dimension
    coef = np.zeros((m, m))
    if config.kind == "block":
        # blocks are independent, so redrawing each block until it is stable
        # gives the same law as redrawing the whole matrix
        bs = config.block_size
        for start in range(0, m, bs):
            for _ in range(config.max_redraws):
                blk = rng.uniform(lo, hi, size=(bs, bs))
                if check_stationarity(blk):
                    break
            else:
                raise RuntimeError(f"{config.max_redraws} consecutive non-stationary block draws")
            coef[start : start + bs, start : start + bs] = blk
        return coef
    for _ in range(config.max_redraws):
        coef[:] = 0.0
        pos = rng.choice(m * m, size=config.nonzero_count, replace=False)
        coef.flat[pos] = rng.uniform(lo, hi, size=config.nonzero_count)
        if check_stationarity(coef):
            return coef
    raise RuntimeError(f"{config.max_redraws} consecutive non-stationary coefficient draws")


def simulate_var(config: DgpConfig, rng: np.random.Generator, coef: np.ndarray | None = None):
    """Simulate y_t = B y_{t-1} + e_t, e_t ~ N(0, Sigma); returns (data, B)."""
    m = config.dimension
    if coef is None:
        coef = _draw_coefficients(config, rng)
    elif not check_stationarity(coef):
        raise ValueError("supplied coefficient matrix is not stationary")
    cov = np.eye(m) if config.noise_cov is None else np.asarray(config.noise_cov, dtype=float)
    chol = np.linalg.cholesky(cov)
    total = config.burn_in + config.horizon
    shocks = rng.standard_normal((total, m)) @ chol.T
    y = np.zeros((total, m))
    prev = np.zeros(m)
    for t in range(total):
        prev = coef @ prev + shocks[t]
        y[t] = prev
    return TimeSeriesData(y[config.burn_in :], [f"y{k + 1}" for k in range(m)]), coef


def garman_klass_rv(high, low, close) -> np.ndarray:
    """0.5 (log H_t - log L_t)^2 - (2 log 2 - 1)(log C_t - log C_{t-1})^2, t >= 2."""
    h, l, c = (np.asarray(v, dtype=float) for v in (high, low, close))
    if not (h.shape == l.shape == c.shape) or h.ndim != 1 or h.size < 2:
        raise ValueError("high, low and close must be aligned 1-d series of length >= 2")
    if np.any(h <= 0) or np.any(l <= 0) or np.any(c <= 0):
        raise ValueError("prices must be strictly positive")
    rng_term = 0.5 * (np.log(h[1:]) - np.log(l[1:])) ** 2
    ret = np.diff(np.log(c))
    return rng_term - (2.0 * math.log(2.0) - 1.0) * ret**2


# --- CSV ------------------------------------------------------------------


def read_csv(path) -> TimeSeriesData:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header row and at least one data row")
    labels = [s.strip() for s in rows[0]]
    try:
        values = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from exc
    return TimeSeriesData(values, labels)


def write_csv(path, data: TimeSeriesData) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.labels)
        for row in data.values:
            w.writerow([repr(float(v)) for v in row])


def write_matrix(path, mat: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.atleast_2d(mat):
            w.writerow([repr(float(v)) for v in row])


def read_matrix(path) -> np.ndarray:
    return np.loadtxt(Path(path), delimiter=",", ndmin=2)
