"""PNG figures for the diagnose, network and forecast reports (Agg backend)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .diagnostics import _autocovariance, thin  # noqa: E402
from .network import WeightedLagNetwork, cluster_color_names, degree_decomposition  # noqa: E402

_RC = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 110,
}
# stripping the metadata keeps reruns byte-identical
_META = {"Software": None}


def _save(fig, path) -> None:
    fig.savefig(path, metadata=_META, bbox_inches="tight")
    plt.close(fig)


def trace_figure(path, series, thin_by: int = 5, max_lag: int = 40, label: str = "lambda L2 norm") -> None:
    """Trace plus autocorrelations before and after thinning."""
    x = np.asarray(series, dtype=float)
    t = np.asarray(thin(x, thin_by))
    with plt.rc_context(_RC):
        fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(7, 5.5))
        ax0.plot(np.arange(x.size), x, lw=0.6, color="0.25")
        ax0.set_xlabel("sweep after burn-in")
        ax0.set_ylabel(label)
        for s, name, style in ((x, "all draws", "o-"), (t, f"every {thin_by}th", "s--")):
            lags = min(max_lag, s.size - 1)
            acov = _autocovariance(s, lags)
            rho = acov / acov[0] if acov[0] > 0 else np.zeros_like(acov)
            ax1.plot(np.arange(lags + 1), rho, style, ms=2.5, lw=0.9, label=name)
        ax1.axhline(0.0, color="k", lw=0.5)
        ax1.set_xlabel("lag")
        ax1.set_ylabel("autocorrelation")
        ax1.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)


def network_figure(path, net: WeightedLagNetwork, centrality=None) -> None:
    """Circular drawing; edge colours follow clusters, node size follows centrality."""
    q = net.adjacency.shape[0]
    angle = 2 * math.pi * np.arange(q) / max(q, 1)
    pos = np.column_stack([np.cos(angle), np.sin(angle)])
    names = cluster_color_names(net)
    size = 60 if centrality is None else 30 + 220 * np.asarray(centrality, dtype=float)
    with plt.rc_context({**_RC, "axes.grid": False}):
        fig, ax = plt.subplots(figsize=(6, 6))
        rows, cols = np.nonzero(net.adjacency)
        for i, j in zip(rows.tolist(), cols.tolist()):
            if i == j:
                continue
            k = int(net.labels[i, j])
            ax.annotate(
                "",
                xy=pos[j],
                xytext=pos[i],
                arrowprops=dict(arrowstyle="-|>", color=names.get(k, "0.5"), lw=0.8, alpha=0.8,
                                shrinkA=6, shrinkB=6),
            )
        ax.scatter(pos[:, 0], pos[:, 1], s=size, color="0.85", edgecolor="k", zorder=3)
        for k, (x, y) in enumerate(pos):
            ax.text(1.12 * x, 1.12 * y, net.node_labels[k], ha="center", va="center", fontsize=7)
        handles = [
            plt.Line2D([], [], color=names[c], lw=2, label=f"cluster {c}: {net.cluster_weights[c - 1]:.3g}")
            for c in range(1, net.cluster_count + 1)
        ]
        if handles:
            ax.legend(handles=handles, frameon=False, loc="upper left", bbox_to_anchor=(1.0, 1.0))
        ax.set_title(f"lag {net.lag}: {int(net.adjacency.sum())} links")
        ax.set_xlim(-1.3, 1.3)
        ax.set_ylim(-1.3, 1.3)
        ax.set_aspect("equal")
        ax.axis("off")
        _save(fig, path)


def degree_figure(path, net: WeightedLagNetwork) -> None:
    """Stacked out- and in-degree bars split by cluster."""
    q = net.adjacency.shape[0]
    names = cluster_color_names(net)
    k = net.cluster_count
    outs = np.zeros((q, k))
    ins = np.zeros((q, k))
    for node in range(q):
        (_, ok), (_, ik) = degree_decomposition(net, node)
        outs[node], ins[node] = ok, ik
    x = np.arange(q)
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(2, 1, figsize=(max(6, 0.35 * q), 5), sharex=True)
        for ax, mat, title in ((axes[0], outs, "out-degree"), (axes[1], ins, "in-degree")):
            bottom = np.zeros(q)
            for c in range(k):
                ax.bar(x, mat[:, c], bottom=bottom, color=names[c + 1], label=f"cluster {c + 1}")
                bottom += mat[:, c]
            ax.set_ylabel(title)
        axes[1].set_xticks(x)
        axes[1].set_xticklabels(net.node_labels, rotation=90, fontsize=7)
        if k:
            axes[0].legend(frameon=False, fontsize=7)
        fig.tight_layout()
        _save(fig, path)


def inclusion_figure(path, prob: np.ndarray, labels: list[str], lag: int) -> None:
    with plt.rc_context({**_RC, "axes.grid": False}):
        fig, ax = plt.subplots(figsize=(5.5, 4.8))
        im = ax.imshow(prob, vmin=0.0, vmax=1.0, cmap="Greys")
        ax.set_xticks(range(len(labels)))
        ax.set_yticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=90, fontsize=6)
        ax.set_yticklabels(labels, fontsize=6)
        ax.set_xlabel("regressor series")
        ax.set_ylabel("equation")
        ax.set_title(f"inclusion probability, lag {lag}")
        fig.colorbar(im, ax=ax, shrink=0.8)
        _save(fig, path)


def forecast_figure(path, labels: list[str], rmse, lps, baseline_rmse=None, baseline_lps=None,
                    names: tuple[str, str] = ("model", "baseline")) -> None:
    """Per-series RMSE and average log predictive score."""
    x = np.arange(len(labels))
    width = 0.4 if baseline_rmse is not None else 0.8
    with plt.rc_context(_RC):
        fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(max(6, 0.4 * len(labels)), 5), sharex=True)
        ax0.bar(x - (width / 2 if baseline_rmse is not None else 0), rmse, width, label=names[0])
        ax1.bar(x - (width / 2 if baseline_lps is not None else 0), lps, width, label=names[0])
        if baseline_rmse is not None:
            ax0.bar(x + width / 2, baseline_rmse, width, label=names[1])
        if baseline_lps is not None:
            ax1.bar(x + width / 2, baseline_lps, width, label=names[1])
        ax0.set_ylabel("RMSE")
        ax1.set_ylabel("avg log score")
        ax1.set_xticks(x)
        ax1.set_xticklabels(labels, rotation=90, fontsize=7)
        ax0.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)
