"""DG communication topology, averaging weights and the Laplacian potential."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

ROW_SUM_ATOL = 1e-12


class ConnectivityError(ValueError):
    pass


@dataclass(frozen=True)
class CommGraph:
    """Undirected simple graph over DG identifiers.

    Edges are stored as sorted ``(a, b)`` tuples in node order.
    """

    nodes: tuple
    edges: frozenset

    def __init__(self, nodes: Sequence[Hashable], edges: Iterable[Sequence[Hashable]] = ()):
        nodes = tuple(nodes)
        if len(set(nodes)) != len(nodes):
            raise ValueError("duplicate node identifiers")
        pos = {n: i for i, n in enumerate(nodes)}
        norm = set()
        for e in edges:
            a, b = e
            if a not in pos or b not in pos:
                raise ValueError(f"edge {a!r}-{b!r} references an unknown node")
            if a == b:
                raise ValueError(f"self-loop on node {a!r}")
            key = (a, b) if pos[a] < pos[b] else (b, a)
            if key in norm:
                raise ValueError(f"duplicate edge {a!r}-{b!r}")
            norm.add(key)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def ring(cls, nodes: Sequence[Hashable]) -> "CommGraph":
        nodes = tuple(nodes)
        n = len(nodes)
        if n < 2:
            return cls(nodes)
        if n == 2:
            return cls(nodes, [(nodes[0], nodes[1])])
        return cls(nodes, [(nodes[i], nodes[(i + 1) % n]) for i in range(n)])

    @classmethod
    def complete(cls, nodes: Sequence[Hashable]) -> "CommGraph":
        nodes = tuple(nodes)
        return cls(nodes, [(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1:]])

    def index(self) -> dict:
        return {n: i for i, n in enumerate(self.nodes)}

    def neighbors(self) -> list[list[int]]:
        """Neighbour index lists, each sorted ascending."""
        pos = self.index()
        adj = [[] for _ in self.nodes]
        for a, b in self.edges:
            adj[pos[a]].append(pos[b])
            adj[pos[b]].append(pos[a])
        for lst in adj:
            lst.sort()
        return adj

    def sorted_edges(self) -> list[tuple]:
        pos = self.index()
        return sorted(self.edges, key=lambda e: (pos[e[0]], pos[e[1]]))


def is_connected(g: CommGraph) -> bool:
    n = len(g.nodes)
    if n <= 1:
        return True
    adj = g.neighbors()
    seen = {0}
    queue = deque([0])
    while queue:
        for j in adj[queue.popleft()]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == n


class WeightMatrix:
    """Row-stochastic averaging weights aligned to a graph's node order.

    Also keeps a CSR copy (row pointers, column indices, values, diagonal
    included) that the averaging kernels iterate over.
    """

    def __init__(self, entries: np.ndarray, nodes: Sequence[Hashable] = None):
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("weight matrix must be square")
        if (a < 0).any():
            raise ValueError("weights must be non-negative")
        if not np.allclose(a.sum(axis=1), 1.0, rtol=0, atol=ROW_SUM_ATOL):
            raise ValueError("weight matrix is not row-stochastic")
        a.setflags(write=False)
        self.entries = a
        self.nodes = tuple(nodes) if nodes is not None else tuple(range(a.shape[0]))
        mask = a != 0
        np.fill_diagonal(mask, True)
        rows, cols = np.nonzero(mask)
        self.indptr = np.concatenate(([0], np.cumsum(mask.sum(axis=1)))).astype(np.intp)
        self.indices = cols.astype(np.intp)
        self.data = a[rows, cols].copy()

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.entries, self.entries.T))

    def __repr__(self):
        return f"WeightMatrix(n={self.n})"


def build_weights(g: CommGraph, scheme: str = "metropolis") -> WeightMatrix:
    """Symmetric row-stochastic weights for a connected graph.

    ``metropolis``: a_ij = 1 / (1 + max(deg_i, deg_j)) on edges, the self
    weight takes the remainder. ``uniform``: 1/n everywhere, complete
    graphs only.
    """
    n = len(g.nodes)
    if n == 0:
        raise ValueError("graph has no nodes")
    if not is_connected(g):
        raise ConnectivityError("communication graph is not connected")
    adj = g.neighbors()
    a = np.zeros((n, n))
    if scheme == "metropolis":
        deg = [len(x) for x in adj]
        for i, nbrs in enumerate(adj):
            for j in nbrs:
                a[i, j] = 1.0 / (1.0 + max(deg[i], deg[j]))
        # remainder computed per row so every row sums to one
        for i in range(n):
            a[i, i] = 1.0 - sum(a[i, j] for j in adj[i])
    elif scheme == "uniform":
        if len(g.edges) != n * (n - 1) // 2:
            raise ValueError("uniform weights require a complete graph")
        a[:] = 1.0 / n
    else:
        raise ValueError(f"unknown weighting scheme {scheme!r}")
    return WeightMatrix(a, g.nodes)


def laplacian(w: WeightMatrix) -> np.ndarray:
    """L with off-diagonal -a_ij and diagonal equal to the off-diagonal row sum."""
    off = w.entries.copy()
    np.fill_diagonal(off, 0.0)
    return np.diag(off.sum(axis=1)) - off


def laplacian_potential(w: WeightMatrix, x) -> float:
    """Disagreement ``sum_ij a_ij (x_j - x_i)^2``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (w.n,):
        raise ValueError(f"expected a vector of length {w.n}, got shape {x.shape}")
    diff = x[None, :] - x[:, None]
    return float((w.entries * diff * diff).sum())
