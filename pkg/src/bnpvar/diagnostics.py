"""Convergence and efficiency diagnostics for scalar MCMC output."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

EARLY_FRACTION = 0.1
LATE_FRACTION = 0.5


def _as_series(series, min_length: int = 2) -> np.ndarray:
    x = np.asarray(series, dtype=float).ravel()
    if x.size < min_length:
        raise ValueError(f"series needs at least {min_length} values, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    return x


def _autocovariance(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased (divide-by-n) autocovariances at lags 0..max_lag via FFT."""
    n = x.size
    xc = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1] / n
    return acov


def acf(series, lag: int) -> float:
    """Sample autocorrelation at ``lag``."""
    x = _as_series(series)
    if not 0 <= lag < x.size:
        raise ValueError("lag must satisfy 0 <= lag < length")
    acov = _autocovariance(x, lag)
    if acov[0] <= 0:
        raise ValueError("autocorrelation undefined for a constant series")
    return float(acov[lag] / acov[0])


def bartlett_bandwidth(n: int) -> int:
    """Truncation lag for the Bartlett-tapered spectral estimates, about n^0.4."""
    return max(1, int(math.floor(n**0.4)))


def _spectral_zero(x: np.ndarray, bandwidth: int | None = None) -> float:
    """Bartlett-window estimate of 2 pi f(0), i.e. the long-run variance."""
    bw = bartlett_bandwidth(x.size) if bandwidth is None else bandwidth
    bw = min(bw, x.size - 1)
    acov = _autocovariance(x, bw)
    k = np.arange(1, bw + 1)
    w = 1.0 - k / (bw + 1.0)
    return float(acov[0] + 2.0 * np.sum(w * acov[1:]))


def inefficiency_factor(series, bandwidth: int | None = None) -> float:
    """1 + 2 sum_k w_k rho_k with Bartlett weights w_k = 1 - k/(B+1)."""
    x = _as_series(series, 100)
    acov0 = _autocovariance(x, 0)[0]
    if acov0 <= 0:
        raise ValueError("inefficiency factor undefined for a constant series")
    return _spectral_zero(x, bandwidth) / acov0


def _segments(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = x.size
    return x[: int(EARLY_FRACTION * n)], x[n - int(LATE_FRACTION * n) :]


def geweke_cd(series) -> float:
    """Difference of early (10%) and late (50%) means over its spectral standard error."""
    x = _as_series(series, 200)
    a, b = _segments(x)
    var = _spectral_zero(a) / a.size + _spectral_zero(b) / b.size
    if not var > 0:
        raise ValueError("Geweke statistic undefined: zero spectral variance")
    return float((a.mean() - b.mean()) / math.sqrt(var))


def ks_two_segment(series) -> float:
    """Two-sample Kolmogorov-Smirnov p-value between the early 10% and late 50%."""
    x = _as_series(series, 200)
    a, b = _segments(x)
    return float(stats.ks_2samp(a, b).pvalue)


def thin(draws, k: int):
    """Every k-th element starting with the first."""
    if k < 1:
        raise ValueError("thinning interval must be >= 1")
    return draws[::k]


def report(series, thin_by: int = 5, acf_lag: int = 10) -> dict:
    """Table-style summary of a monitored functional before and after thinning."""
    x = _as_series(series, 200)
    t = np.asarray(thin(x, thin_by))
    return {
        "n": int(x.size),
        "n_thinned": int(t.size),
        "geweke_cd": geweke_cd(x),
        "ks_pvalue": ks_two_segment(x),
        "ineff_before": inefficiency_factor(x),
        "ineff_after": inefficiency_factor(t),
        "acf10_before": acf(x, acf_lag),
        "acf10_after": acf(t, acf_lag),
    }


def write_report(path, rep: dict, label: str = "lambda_l2_norm") -> None:
    """key=value text report; the header records the segment convention."""
    lines = [
        f"# series={label}",
        f"# geweke/ks segments: first {EARLY_FRACTION:.0%} vs last {LATE_FRACTION:.0%}",
        "# spectral window: Bartlett, bandwidth floor(n^0.4)",
    ]
    for key, value in rep.items():
        lines.append(f"{key}={value:.10g}" if isinstance(value, float) else f"{key}={value}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
