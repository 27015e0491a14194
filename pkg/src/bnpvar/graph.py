"""Decomposable (chordal) graphs for covariance selection.

A graph is stored as a symmetric boolean adjacency matrix. Its perfect
sequence of maximal cliques (with separators) comes from maximum cardinality
search and is cached per instance; toggling an edge returns a new graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg

from .distributions import log_multigamma


class DecomposableGraph:
    def __init__(self, vertex_count: int, edges=()):
        self.vertex_count = int(vertex_count)
        adj = np.zeros((self.vertex_count, self.vertex_count), dtype=bool)
        for i, j in edges:
            if i == j:
                raise ValueError("self-loops are not allowed")
            adj[i, j] = adj[j, i] = True
        self._adj = adj

    @classmethod
    def from_adjacency(cls, adj) -> "DecomposableGraph":
        adj = np.asarray(adj, dtype=bool)
        if adj.shape[0] != adj.shape[1] or np.any(adj != adj.T) or np.any(np.diag(adj)):
            raise ValueError("adjacency must be square, symmetric, without self-loops")
        g = cls(adj.shape[0])
        g._adj = adj.copy()
        return g

    @classmethod
    def complete(cls, n: int) -> "DecomposableGraph":
        return cls.from_adjacency(~np.eye(n, dtype=bool))

    @property
    def adjacency(self) -> np.ndarray:
        return self._adj.copy()

    @property
    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self._adj, 1))
        return list(zip(i.tolist(), j.tolist()))

    @property
    def edge_count(self) -> int:
        return int(np.triu(self._adj, 1).sum())

    @property
    def max_edges(self) -> int:
        return self.vertex_count * (self.vertex_count - 1) // 2

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self._adj[i, j])

    def toggled(self, i: int, j: int) -> "DecomposableGraph":
        adj = self._adj.copy()
        adj[i, j] = adj[j, i] = not adj[i, j]
        g = DecomposableGraph(self.vertex_count)
        g._adj = adj
        return g

    def __eq__(self, other):
        return isinstance(other, DecomposableGraph) and np.array_equal(self._adj, other._adj)

    def __repr__(self):
        return f"DecomposableGraph(vertex_count={self.vertex_count}, edges={self.edge_count})"

    # --- chordality and junction structure ---------------------------------

    @cached_property
    def _mcs(self):
        """Maximum cardinality search order plus, per vertex, its earlier neighbours."""
        n = self.vertex_count
        adj = self._adj
        weight = np.zeros(n, dtype=int)
        numbered = np.zeros(n, dtype=bool)
        order = []
        earlier = []
        for _ in range(n):
            cand = np.where(numbered, -1, weight)
            v = int(np.argmax(cand))
            nb = [int(u) for u in order if adj[v, u]]
            order.append(v)
            earlier.append(nb)
            numbered[v] = True
            weight[adj[v] & ~numbered] += 1
        return order, earlier

    def is_decomposable(self) -> bool:
        return self._chordal

    @cached_property
    def _chordal(self) -> bool:
        # zero fill-in test on the MCS ordering
        order, earlier = self._mcs
        position = {v: k for k, v in enumerate(order)}
        for v, nb in zip(order, earlier):
            if len(nb) < 2:
                continue
            last = max(nb, key=position.__getitem__)
            others = [u for u in nb if u != last]
            if not all(self._adj[last, u] for u in others):
                return False
        return True

    @cached_property
    def _sequence(self):
        if not self._chordal:
            raise ValueError("graph is not decomposable")
        order, earlier = self._mcs
        candidates = [frozenset(nb) | {v} for v, nb in zip(order, earlier)]
        cliques: list[frozenset] = []
        for k, c in enumerate(candidates):
            # maximal iff not contained in the candidate of a later vertex
            if any(c < other for other in candidates[k + 1 :]):
                continue
            cliques.append(c)
        seq = []
        seen: set[int] = set()
        for c in cliques:
            sep = c & seen
            seq.append((sorted(c), sorted(sep)))
            seen |= c
        return seq

    def perfect_sequence(self) -> list[tuple[list[int], list[int]]]:
        """Maximal cliques in a perfect order, each with its separator
        (intersection with the union of earlier cliques; empty for the
        first clique of every connected component)."""
        return list(self._sequence)

    def cliques(self) -> list[list[int]]:
        return [c for c, _ in self._sequence]

    def separators(self) -> list[list[int]]:
        """Separators with multiplicity; empty separators are omitted."""
        return [s for _, s in self._sequence[1:] if s]

    def check_junction(self) -> bool:
        """Running intersection plus clique/separator inclusion-exclusion."""
        seq = self._sequence
        for k, (c, s) in enumerate(seq[1:], start=1):
            if s and not any(set(s) <= set(prev) for prev, _ in seq[:k]):
                return False
        cover = np.zeros(self.vertex_count, dtype=int)
        for c, s in seq:
            cover[c] += 1
            cover[s] -= 1
        if not np.all(cover == 1):
            return False
        for c in self.cliques():
            sub = self._adj[np.ix_(c, c)]
            if not np.all(sub | np.eye(len(c), dtype=bool)):
                return False
        return True

    def to_edge_list(self) -> str:
        return "".join(f"{i} {j}\n" for i, j in self.edges)

    @classmethod
    def from_edge_list(cls, text: str, vertex_count: int) -> "DecomposableGraph":
        edges = [tuple(int(t) for t in line.split()) for line in text.splitlines() if line.strip()]
        return cls(vertex_count, edges)


def is_decomposable(g: DecomposableGraph) -> bool:
    return g.is_decomposable()


@dataclass(frozen=True)
class GraphPrior:
    psi: float

    def __post_init__(self):
        if not 0.0 < self.psi < 1.0:
            raise ValueError("edge probability psi must lie in (0, 1)")

    @classmethod
    def default(cls, vertex_count: int) -> "GraphPrior":
        """psi = 2 / (q - 1), a prior mode at q edges; clipped into (0, 1) for tiny graphs."""
        if vertex_count <= 3:
            return cls(0.5)
        return cls(2.0 / (vertex_count - 1))


def graph_log_prior(g: DecomposableGraph, prior: GraphPrior) -> float:
    e = g.edge_count
    return e * math.log(prior.psi) + (g.max_edges - e) * math.log1p(-prior.psi)


def propose_toggle(g: DecomposableGraph, rng: np.random.Generator):
    """Uniform vertex pair, toggled. Returns (candidate, log proposal ratio, valid)."""
    n = g.vertex_count
    if n < 2:
        return g, 0.0, False
    k = int(rng.integers(g.max_edges))
    # unrank k into the upper-triangular pair (i, j), i < j
    i = 0
    while k >= n - 1 - i:
        k -= n - 1 - i
        i += 1
    j = i + 1 + k
    cand = g.toggled(i, j)
    return cand, 0.0, cand.is_decomposable()


def _iw_log_const(df: float, block: np.ndarray) -> float:
    p = block.shape[0]
    if p == 0:
        return 0.0
    nu = df + p - 1.0
    if p == 1:
        return 0.5 * nu * math.log(float(block[0, 0]) / 2.0) - math.lgamma(0.5 * nu)
    try:
        c = linalg.cholesky(block / 2.0, lower=True)
    except linalg.LinAlgError as exc:
        raise ValueError("scale block is not positive definite") from exc
    logdet = 2.0 * np.sum(np.log(np.diag(c)))
    return 0.5 * nu * logdet - log_multigamma(0.5 * nu, p)


def hiw_log_normalizer(g: DecomposableGraph, df: float, scale: np.ndarray) -> float:
    """Log normalizing constant of HIW_G(df, scale): cliques minus separators,
    each an inverse-Wishart constant (df + |C| - 1)/2 log|scale_C / 2| - log Gamma_|C|."""
    scale = np.asarray(scale, dtype=float)
    total = 0.0
    for c, s in g.perfect_sequence():
        total += _iw_log_const(df, scale[np.ix_(c, c)])
        if s:
            total -= _iw_log_const(df, scale[np.ix_(s, s)])
    return total


def graph_log_marginal_likelihood(g: DecomposableGraph, df: float, scale, scatter, n_obs: int) -> float:
    """log p(residuals | G) with Sigma integrated out under HIW_G(df, scale)."""
    q = g.vertex_count
    return (
        -0.5 * n_obs * q * math.log(2.0 * math.pi)
        + hiw_log_normalizer(g, df, scale)
        - hiw_log_normalizer(g, df + n_obs, np.asarray(scale) + np.asarray(scatter))
    )
