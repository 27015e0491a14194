"""Weighted Granger-causality networks from posterior draws.

Adjacency at lag l follows the coefficient matrix B_l: a[i, j] = 1 when the
coefficient of series j in equation i is in the non-sparse component with
posterior probability above the threshold. Degrees follow that indexing:
out-degree is a row sum and in-degree a column sum, and exported edges run
from node i to node j.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .var import CoefficientLayout


@dataclass
class DrawArchive:
    """Retained draws stacked as (H, n) arrays.

    ``coef_mu`` holds the location of the allocated atom for coefficients with
    xi = 1 and NaN otherwise.
    """

    xi: np.ndarray
    d: np.ndarray
    coef_mu: np.ndarray
    beta: np.ndarray | None = None

    def __post_init__(self):
        self.xi = np.atleast_2d(np.asarray(self.xi, dtype=np.int8))
        self.d = np.atleast_2d(np.asarray(self.d, dtype=np.int64))
        self.coef_mu = np.atleast_2d(np.asarray(self.coef_mu, dtype=float))
        if not (self.xi.shape == self.d.shape == self.coef_mu.shape):
            raise ValueError("xi, d and coef_mu must share one (draws, coefficients) shape")
        if self.xi.shape[0] < 1:
            raise ValueError("need at least one draw")

    @property
    def n_draws(self) -> int:
        return self.xi.shape[0]

    @classmethod
    def from_records(cls, records, layout: CoefficientLayout) -> "DrawArchive":
        if not records:
            raise ValueError("need at least one draw")
        xi = np.array([r.xi for r in records])
        d = np.array([r.d for r in records])
        mu = np.full(xi.shape, np.nan)
        for h, r in enumerate(records):
            for b, idx in enumerate(layout.blocks):
                atoms = r.atoms[b]
                if atoms.size == 0:
                    continue
                lookup = dict(zip(atoms[:, 0].astype(int).tolist(), atoms[:, 1].tolist()))
                sel = idx[r.xi[idx] == 1]
                mu[h, sel] = [lookup[int(k)] for k in r.d[sel]]
        beta = np.array([r.beta for r in records])
        return cls(xi, d, mu, beta)


def inclusion_probability(xi, index=None):
    """Posterior frequency of xi = 1; all coefficients when ``index`` is None."""
    xi = np.atleast_2d(np.asarray(xi))
    if xi.shape[0] < 1:
        raise ValueError("need at least one draw")
    freq = xi.mean(axis=0)
    return freq if index is None else float(freq[index])


def map_adjacency(archive: DrawArchive, layout: CoefficientLayout, lag: int, threshold: float = 0.5) -> np.ndarray:
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    prob = inclusion_probability(archive.xi)
    return (prob[layout.lag_index(lag)] > threshold).astype(np.int8)


def co_clustering(d, xi, included) -> np.ndarray:
    """p[a, b] = share of draws with both coefficients included in which they share a label."""
    included = np.asarray(included, dtype=int)
    if included.size == 0:
        raise ValueError("included set is empty")
    dd = np.atleast_2d(d)[:, included]
    inc = np.atleast_2d(xi)[:, included].astype(bool)
    both = inc[:, :, None] & inc[:, None, :]
    same = (dd[:, :, None] == dd[:, None, :]) & both
    denom = both.sum(axis=0)
    never = np.diag(denom) == 0
    if np.any(never):
        warnings.warn(f"{int(never.sum())} coefficient(s) never included; co-clustering set to 0", stacklevel=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(denom > 0, same.sum(axis=0) / np.maximum(denom, 1), 0.0)
    if np.any((denom == 0) & ~np.eye(included.size, dtype=bool)):
        warnings.warn("some pairs are never jointly included; their co-clustering is set to 0", stacklevel=2)
    return p


def canonical_labels(labels) -> np.ndarray:
    """Relabel by order of first appearance, starting at 1."""
    labels = np.asarray(labels)
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first)] = np.arange(1, first.size + 1)
    return rank[inv.ravel()]


def partition_loss(labels, coclust) -> float:
    labels = np.asarray(labels)
    delta = (labels[:, None] == labels[None, :]).astype(float)
    return float(np.sum((delta - coclust) ** 2))


def dahl_clustering(d, xi, coclust, included):
    """Least-squares choice among the sampled partitions of ``included``.

    A draw's partition uses labels d * xi, so coefficients in the sparse
    component form their own group. Ties go to the earliest draw. Returns
    (canonical labels, number of clusters, loss, draw index).
    """
    included = np.asarray(included, dtype=int)
    if included.size == 0:
        raise ValueError("included set is empty")
    lab = (np.atleast_2d(d) * np.atleast_2d(xi))[:, included]
    if lab.shape[0] < 1:
        raise ValueError("need at least one candidate draw")
    delta = (lab[:, :, None] == lab[:, None, :]).astype(float)
    losses = np.sum((delta - coclust[None]) ** 2, axis=(1, 2))
    # losses equal up to summation roundoff count as ties
    tol = 1e-9 * max(1.0, float(losses.min()))
    best = int(np.flatnonzero(losses <= losses.min() + tol)[0])
    chosen = canonical_labels(lab[best])
    return chosen, int(chosen.max()), float(losses[best]), best


@dataclass
class WeightedLagNetwork:
    lag: int
    adjacency: np.ndarray
    labels: np.ndarray  # cluster id per edge, 0 where no edge
    cluster_weights: np.ndarray  # mu-tilde for clusters 1..K
    node_labels: list[str]

    @property
    def cluster_count(self) -> int:
        return int(self.cluster_weights.size)

    @property
    def colors(self) -> np.ndarray:
        c = np.zeros(self.adjacency.shape)
        edge = self.labels > 0
        c[edge] = self.cluster_weights[self.labels[edge] - 1]
        return c


def color_network(
    archive: DrawArchive,
    layout: CoefficientLayout,
    lag: int,
    adjacency: np.ndarray,
    node_labels: list[str] | None = None,
    chosen=None,
    weights=None,
) -> WeightedLagNetwork:
    """Colour edges by Dahl clusters; the weight of a cluster is the mean atom
    location over its members' draws with xi = 1.

    ``chosen`` (labels for the edges in row-major order) and ``weights`` can be
    supplied from a clustering shared across lags.
    """
    adjacency = np.asarray(adjacency, dtype=np.int8)
    q = adjacency.shape[0]
    node_labels = node_labels or [f"y{k + 1}" for k in range(q)]
    idx = layout.lag_index(lag)
    rows, cols = np.nonzero(adjacency)
    labels = np.zeros((q, q), dtype=np.int64)
    if rows.size == 0:
        return WeightedLagNetwork(lag, adjacency, labels, np.empty(0), node_labels)
    included = idx[rows, cols]
    if chosen is None:
        p = co_clustering(archive.d, archive.xi, included)
        chosen, _, _, _ = dahl_clustering(archive.d, archive.xi, p, included)
    chosen = np.asarray(chosen)
    if weights is None:
        weights = _cluster_weights(archive, included, chosen)
    labels[rows, cols] = chosen
    return WeightedLagNetwork(lag, adjacency, labels, weights, node_labels)


def _cluster_weights(archive: DrawArchive, included: np.ndarray, chosen: np.ndarray) -> np.ndarray:
    k_tot = int(chosen.max())
    weights = np.empty(k_tot)
    for k in range(1, k_tot + 1):
        vals = archive.coef_mu[:, included[chosen == k]]
        weights[k - 1] = np.nanmean(vals) if np.any(np.isfinite(vals)) else 0.0
    return weights


def pooled_clustering(archive: DrawArchive, layout: CoefficientLayout, adjacencies: dict[int, np.ndarray]):
    """One Dahl clustering over the included coefficients of all lags.

    Returns {lag: (labels for that lag's edges in row-major order, weights)};
    the weight vector is shared, so a cluster keeps one colour across lags.
    Sampled labels are keyed by block, so coefficients in different blocks
    never share a cluster; pooling merges clusters only under a block
    partition that spans several lags.
    """
    parts = []
    for lag, adj in adjacencies.items():
        rows, cols = np.nonzero(adj)
        parts.append((lag, layout.lag_index(lag)[rows, cols]))
    included = np.concatenate([p for _, p in parts]) if parts else np.empty(0, dtype=int)
    if included.size == 0:
        return {lag: (np.empty(0, dtype=np.int64), np.empty(0)) for lag in adjacencies}
    keyed = archive.d + layout.block_of[None, :] * (int(archive.d.max()) + 1)
    p = co_clustering(keyed, archive.xi, included)
    chosen, _, _, _ = dahl_clustering(keyed, archive.xi, p, included)
    weights = _cluster_weights(archive, included, chosen)
    out, start = {}, 0
    for lag, idx in parts:
        out[lag] = (chosen[start : start + idx.size], weights)
        start += idx.size
    return out


def degree_decomposition(net: WeightedLagNetwork, node: int):
    """((out total, per-cluster out), (in total, per-cluster in)) for ``node``."""
    a = net.adjacency.astype(np.int64)
    k = net.cluster_count
    row_lab, col_lab = net.labels[node], net.labels[:, node]
    out_k = np.array([int(np.sum(a[node] * (row_lab == c))) for c in range(1, k + 1)], dtype=np.int64)
    in_k = np.array([int(np.sum(a[:, node] * (col_lab == c))) for c in range(1, k + 1)], dtype=np.int64)
    return (int(a[node].sum()), out_k), (int(a[:, node].sum()), in_k)


def _layer(adjacency, labels=None, color: int | None = None) -> np.ndarray:
    a = np.asarray(adjacency).astype(bool).copy()
    if color is not None:
        if labels is None:
            raise ValueError("colour filter needs edge labels")
        a &= np.asarray(labels) == color
    np.fill_diagonal(a, False)
    return a


@dataclass(frozen=True)
class NetworkStats:
    links: int
    avg_degree: float
    density: float
    avg_path_length: float


def network_stats(adjacency, labels=None, color: int | None = None) -> NetworkStats:
    """Links, average degree, density and mean finite shortest-path length of a
    directed graph (self-loops ignored), optionally restricted to one colour."""
    a = _layer(adjacency, labels, color)
    n = a.shape[0]
    links = int(a.sum())
    density = links / (n * (n - 1)) if n > 1 else 0.0
    if links:
        dist = shortest_path(a.astype(float), directed=True, unweighted=True)
        off = ~np.eye(n, dtype=bool) & np.isfinite(dist)
        apl = float(dist[off].mean()) if np.any(off) else math.nan
    else:
        apl = math.nan
    return NetworkStats(links, links / n if n else 0.0, density, apl)


def edge_list_stats(n_nodes: int, edges, colors=None, color=None) -> NetworkStats:
    """network_stats from (source, target) pairs on ``n_nodes`` vertices."""
    a = np.zeros((n_nodes, n_nodes), dtype=bool)
    lab = np.zeros((n_nodes, n_nodes), dtype=np.int64)
    for k, (i, j) in enumerate(edges):
        a[i, j] = True
        if colors is not None:
            lab[i, j] = colors[k]
    return network_stats(a, lab if colors is not None else None, color)


def eigenvector_centrality(adjacency, labels=None, color: int | None = None, tol: float = 1e-13,
                           max_iter: int = 100_000) -> np.ndarray:
    """Principal eigenvector of A' by power iteration on A' + I, scaled to unit max.

    A node scores high when central nodes point to it. Self-loops are dropped.
    """
    a = _layer(adjacency, labels, color).astype(float)
    n = a.shape[0]
    if not a.any():
        warnings.warn("network has no edges; centrality is zero", stacklevel=2)
        return np.zeros(n)
    m = a.T + np.eye(n)
    x = np.ones(n) / n
    for _ in range(max_iter):
        y = m @ x
        y /= y.max()
        if np.max(np.abs(y - x)) < tol:
            x = y
            break
        x = y
    return x / x.max()


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------


def edge_records(net: WeightedLagNetwork):
    rows, cols = np.nonzero(net.adjacency)
    colors = net.colors
    for i, j in zip(rows.tolist(), cols.tolist()):
        yield net.lag, net.node_labels[i], net.node_labels[j], int(net.labels[i, j]), float(colors[i, j])


def write_edge_csv(path, nets) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lag", "source", "target", "cluster", "weight"])
        for net in nets:
            for lag, s, t, k, wgt in edge_records(net):
                w.writerow([lag, s, t, k, repr(wgt)])


_PALETTE = ["blue", "red", "green", "orange", "purple", "brown", "cyan", "magenta", "gray", "olive"]


def cluster_color_names(net: WeightedLagNetwork) -> dict[int, str]:
    """Palette assignment by ascending cluster weight."""
    order = np.argsort(net.cluster_weights, kind="stable")
    return {int(k) + 1: _PALETTE[r % len(_PALETTE)] for r, k in enumerate(order)}


def write_dot(path, net: WeightedLagNetwork) -> None:
    names = cluster_color_names(net)
    lines = [f'digraph lag{net.lag} {{']
    for label in net.node_labels:
        lines.append(f'  "{label}";')
    for _, s, t, k, wgt in edge_records(net):
        lines.append(f'  "{s}" -> "{t}" [color="{names[k]}", cluster={k}, weight="{wgt:.6g}"];')
    lines.append("}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def to_networkx(net: WeightedLagNetwork):
    import networkx as nx

    names = cluster_color_names(net)
    g = nx.DiGraph(lag=net.lag)
    g.add_nodes_from(net.node_labels)
    for _, s, t, k, wgt in edge_records(net):
        g.add_edge(s, t, cluster=k, weight=wgt, color=names[k])
    return g


def write_graphml(path, net: WeightedLagNetwork) -> None:
    import networkx as nx

    nx.write_graphml(to_networkx(net), path)


def write_stats_csv(path, net: WeightedLagNetwork) -> list[tuple[str, NetworkStats]]:
    """One row for the full network and one per colour layer."""
    rows = [("all", network_stats(net.adjacency))]
    for k in range(1, net.cluster_count + 1):
        rows.append((f"cluster{k}", network_stats(net.adjacency, net.labels, k)))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lag", "layer", "weight", "links", "avg_degree", "density", "avg_path_length"])
        for k, (name, st) in enumerate(rows):
            weight = "" if k == 0 else f"{net.cluster_weights[k - 1]:.6g}"
            w.writerow([net.lag, name, weight, st.links, f"{st.avg_degree:.6g}", f"{st.density:.6g}",
                        f"{st.avg_path_length:.6g}"])
    return rows
