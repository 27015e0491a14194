"""Estimation accuracy and rolling one-step forecast evaluation."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable

import numpy as np
from scipy import linalg, special

from .sampler import Hyperparameters, blasso_baseline, run_chain
from .var import CoefficientLayout, PanelSpec, regressor_vector

_LOG_2PI = math.log(2.0 * math.pi)


def msd(estimate, truth) -> float:
    """Mean squared elementwise deviation."""
    a = np.asarray(estimate, dtype=float)
    b = np.asarray(truth, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty coefficient matrices")
    return float(np.mean((a - b) ** 2))


@dataclass
class ForecastConfig:
    """Rolling design: fit on ``window`` rows, predict the next, slide by ``step``.

    ``span`` is the number of forecast origins (None: every row after the
    first window). Each origin refits a chain of ``iterations`` sweeps.
    """

    window: int
    span: int | None = None
    step: int = 1
    iterations: int = 1500
    burn_in: int = 300
    thin: int = 1
    draws: int = 1200
    model: str = "bnp"
    jobs: int = 1

    def __post_init__(self):
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if self.step < 1 or self.jobs < 1:
            raise ValueError("step and jobs must be >= 1")
        if self.span is not None and self.span < 1:
            raise ValueError("span must be >= 1")
        if self.model not in ("bnp", "blasso"):
            raise ValueError("model must be 'bnp' or 'blasso'")
        if self.draws < 1:
            raise ValueError("draws must be >= 1")

    def origins(self, n_obs: int) -> list[int]:
        """0-based row indices to be forecast."""
        if self.window + 1 > n_obs:
            raise ValueError(f"window {self.window} leaves nothing to forecast in {n_obs} rows")
        rows = list(range(self.window, n_obs, self.step))
        return rows if self.span is None else rows[: self.span]


@dataclass
class MetricReport:
    labels: list[str]
    rmse: np.ndarray
    lps: np.ndarray
    rmse_all: float
    lps_joint: float
    n_origins: int
    errors: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.rmse = np.asarray(self.rmse, dtype=float)
        self.lps = np.asarray(self.lps, dtype=float)
        if np.any(self.rmse < 0):
            raise ValueError("negative RMSE")

    def rows(self) -> list[tuple[str, float, float]]:
        out = [(lab, float(r), float(s)) for lab, r, s in zip(self.labels, self.rmse, self.lps)]
        out.append(("all", self.rmse_all, self.lps_joint))
        return out


# A fitter returns predictive ingredients: coefficient matrices (H, q, K) and covariances (H, q, q).
Fitter = Callable[[np.ndarray, PanelSpec, Hyperparameters, np.random.Generator], tuple[np.ndarray, np.ndarray]]


def _fit_chain(model, values, spec, hyper, rng):
    run = run_chain if model == "bnp" else blasso_baseline
    res = run(values, spec, hyper, rng)
    lay = CoefficientLayout(spec)
    coefs = np.array([lay.to_matrix(r.beta) for r in res.draws])
    sigmas = np.array([r.sigma for r in res.draws])
    return coefs, sigmas


def chain_fitter(model: str = "bnp") -> Fitter:
    """Fitter running the full sampler or the Lasso baseline (picklable for worker processes)."""
    if model not in ("bnp", "blasso"):
        raise ValueError("model must be 'bnp' or 'blasso'")
    return partial(_fit_chain, model)


def predictive_scores(coefs, sigmas, x, y) -> tuple[np.ndarray, np.ndarray, float]:
    """Predictive mean, per-series log density and joint log density of ``y``.

    The predictive is the equal-weight mixture of N(B_h x, Sigma_h) over draws.
    """
    coefs = np.asarray(coefs, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    means = coefs @ x  # (H, q)
    resid = y - means
    h = means.shape[0]
    var = np.diagonal(sigmas, axis1=1, axis2=2)
    marg = -0.5 * (_LOG_2PI + np.log(var) + resid**2 / var)
    per_series = special.logsumexp(marg, axis=0) - math.log(h)
    joint = np.empty(h)
    q = y.size
    for k in range(h):
        c = linalg.cho_factor(sigmas[k], lower=True)
        z = linalg.solve_triangular(c[0], resid[k], lower=True)
        joint[k] = -0.5 * (q * _LOG_2PI + z @ z) - np.sum(np.log(np.diag(c[0])))
    return means.mean(axis=0), per_series, float(special.logsumexp(joint) - math.log(h))


def _forecast_origin(args):
    values, spec, hyper, fitter, row, window, draws, seed = args
    rng = np.random.default_rng(seed)
    coefs, sigmas = fitter(values[row - window : row], spec, hyper, rng)
    coefs, sigmas = coefs[-draws:], sigmas[-draws:]
    x = regressor_vector(values[:row], spec)
    return predictive_scores(coefs, sigmas, x, values[row])


def rolling_forecast(
    values,
    spec: PanelSpec,
    hyper: Hyperparameters,
    config: ForecastConfig,
    rng: np.random.Generator | int | None = None,
    fitter: Fitter | None = None,
    labels: list[str] | None = None,
) -> MetricReport:
    """One-step rolling forecasts scored by RMSE and log predictive score.

    Origin k gets its own generator from ``SeedSequence(seed).spawn``, so the
    result does not depend on ``config.jobs``.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] != spec.n_series:
        raise ValueError("data columns do not match the panel spec")
    if config.window <= spec.lags + 1:
        raise ValueError("window too short for the lag order")
    rows = config.origins(values.shape[0])
    if fitter is None:
        fitter = chain_fitter(config.model)
    hyper = replace(hyper, iterations=config.iterations, burn_in=config.burn_in, thin=config.thin)
    if isinstance(rng, np.random.Generator):
        master = np.random.SeedSequence(int(rng.integers(2**63)))
    else:
        master = np.random.SeedSequence(hyper.seed if rng is None else int(rng))
    seeds = master.spawn(len(rows))
    tasks = [(values, spec, hyper, fitter, r, config.window, config.draws, s) for r, s in zip(rows, seeds)]
    if config.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_forecast_origin, tasks))
    else:
        results = [_forecast_origin(t) for t in tasks]
    means = np.array([m for m, _, _ in results])
    per = np.array([p for _, p, _ in results])
    joint = np.array([j for _, _, j in results])
    err = values[rows] - means
    q = spec.n_series
    return MetricReport(
        labels=list(labels) if labels else [f"y{k + 1}" for k in range(q)],
        rmse=np.sqrt(np.mean(err**2, axis=0)),
        lps=per.mean(axis=0),
        rmse_all=float(np.sqrt(np.mean(err**2))),
        lps_joint=float(joint.mean()),
        n_origins=len(rows),
        errors=err,
    )


def relative_table(report: MetricReport, baseline: MetricReport) -> list[tuple[str, float, float]]:
    """(label, RMSE ratio, LPS difference) against a baseline; ratios below 1 favour ``report``."""
    if report.labels != baseline.labels:
        raise ValueError("reports cover different series")
    a, b = report.rows(), baseline.rows()
    return [(la, ra / rb if rb > 0 else float("nan"), sa - sb) for (la, ra, sa), (_, rb, sb) in zip(a, b)]


def write_metric_csv(path, report: MetricReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "rmse", "lps"])
        for lab, r, s in report.rows():
            w.writerow([lab, repr(r), repr(s)])


def write_relative_csv(path, table, model_name: str = "model", baseline_name: str = "baseline") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", f"rmse_ratio_{model_name}_over_{baseline_name}", f"lps_diff_{model_name}_minus_{baseline_name}"])
        for lab, r, s in table:
            w.writerow([lab, repr(r), repr(s)])


def read_metric_csv(path) -> MetricReport:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    if not rows or rows[-1][0] != "all":
        raise ValueError(f"{path}: missing aggregate row")
    body = rows[:-1]
    return MetricReport(
        labels=[r[0] for r in body],
        rmse=np.array([float(r[1]) for r in body]),
        lps=np.array([float(r[2]) for r in body]),
        rmse_all=float(rows[-1][1]),
        lps_joint=float(rows[-1][2]),
        n_origins=0,
    )
