"""Louvain community detection and cluster-overlap statistics.

Modularity is evaluated on the undirected projection of a directed graph:
the weight of pair ``{i, j}`` is the number of directed edges between them
(1 or 2). Self-loops are dropped from the projection.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import IO

import numpy as np

from .graph import DirectedGraph


class ClusteringError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Clustering:
    assignment: np.ndarray

    def __post_init__(self) -> None:
        a = np.ascontiguousarray(self.assignment, dtype=np.int64)
        if a.ndim != 1:
            raise ClusteringError("assignment must be 1-d")
        if a.size:
            ids = np.unique(a)
            if ids[0] != 0 or ids[-1] != ids.size - 1:
                raise ClusteringError("cluster ids must be dense in [0, k)")
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    @property
    def k(self) -> int:
        return int(self.assignment.max()) + 1 if self.assignment.size else 0

    @property
    def n(self) -> int:
        return int(self.assignment.size)

    @classmethod
    def from_labels(cls, labels) -> "Clustering":
        """Renumber arbitrary labels densely in order of first appearance."""
        labels = np.asarray(labels)
        _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
        rank = np.empty(first.size, dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(first.size)
        return cls(rank[inv.reshape(-1)])

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)


@dataclass(frozen=True)
class OverlapStats:
    sigma_bar_node: float
    sigma_edge: float
    sigma_edge_zeta: float | None = None


def _projection(g: DirectedGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unordered pairs ``(u, v)`` with projected weight 1 or 2."""
    keep = g.src != g.dst
    u = np.minimum(g.src[keep], g.dst[keep])
    v = np.maximum(g.src[keep], g.dst[keep])
    keys, w = np.unique(u * max(g.n, 1) + v, return_counts=True)
    return keys // max(g.n, 1), keys % max(g.n, 1), w.astype(np.float64)


def modularity(g: DirectedGraph, clustering: Clustering, resolution: float = 1.0) -> float:
    """Q = (1/2m) Σ_ij [A_ij − resolution·k_i k_j / 2m]·1{c_i = c_j} on the projection."""
    if clustering.n != g.n:
        raise ClusteringError("clustering does not cover the graph")
    u, v, w = _projection(g)
    m = float(w.sum())
    if m == 0:
        raise ClusteringError("modularity is undefined on an edgeless graph")
    c = clustering.assignment
    deg = np.bincount(u, w, g.n) + np.bincount(v, w, g.n)
    internal = float(w[c[u] == c[v]].sum())
    tot = np.bincount(c, deg, clustering.k)
    return internal / m - resolution * float(np.dot(tot, tot)) / (4.0 * m * m)


def louvain(
    g: DirectedGraph,
    resolution: float = 1.0,
    seed: int = 0,
    tol: float = 1e-12,
) -> Clustering:
    """Louvain modularity maximisation.

    Nodes are visited in a seed-shuffled order at every level. A node moves
    only for a strictly positive gain over staying; among improving moves the
    largest gain wins, ties going to the lowest community id.
    """
    if g.n == 0:
        raise ClusteringError("graph has no nodes")
    if resolution <= 0:
        raise ClusteringError("resolution must be positive")
    rng = np.random.default_rng(seed)
    u, v, w = _projection(g)
    m = float(w.sum())
    membership = np.arange(g.n)
    if m == 0:
        return Clustering(membership)

    # level graph: adjacency dicts without self weight; loops tracked apart
    n_lvl = g.n
    adj: list[dict[int, float]] = [dict() for _ in range(n_lvl)]
    for a, b, x in zip(u.tolist(), v.tolist(), w.tolist()):
        adj[a][b] = x
        adj[b][a] = x
    loops = [0.0] * n_lvl

    while True:
        comm, moved = _one_level(adj, loops, m, resolution, rng, tol)
        if not moved:
            break
        renum = {}
        for c in comm:
            if c not in renum:
                renum[c] = len(renum)
        comm = [renum[c] for c in comm]
        membership = np.asarray(comm, dtype=np.int64)[membership]
        k = len(renum)
        new_adj: list[dict[int, float]] = [dict() for _ in range(k)]
        new_loops = [0.0] * k
        for i in range(n_lvl):
            ci = comm[i]
            new_loops[ci] += loops[i]
            row = new_adj[ci]
            for j, x in adj[i].items():
                cj = comm[j]
                if cj == ci:
                    # each internal pair is seen from both ends
                    new_loops[ci] += x / 2.0
                else:
                    row[cj] = row.get(cj, 0.0) + x
        adj, loops, n_lvl = new_adj, new_loops, k
        if k == 1:
            break
    return Clustering.from_labels(membership)


def _one_level(adj, loops, m, resolution, rng, tol):
    n = len(adj)
    # degree counts a loop of weight x twice
    deg = [sum(row.values()) + 2.0 * loops[i] for i, row in enumerate(adj)]
    comm = list(range(n))
    tot = list(deg)
    two_m = 2.0 * m
    moved_any = False
    order = rng.permutation(n).tolist()
    improved = True
    while improved:
        improved = False
        for i in order:
            ci = comm[i]
            ki = deg[i]
            links: dict[int, float] = {}
            for j, x in adj[i].items():
                cj = comm[j]
                links[cj] = links.get(cj, 0.0) + x
            tot[ci] -= ki
            scale = resolution * ki / two_m
            stay = links.get(ci, 0.0) - scale * tot[ci]
            best_c, best_gain = ci, stay
            # ascending ids, so an equal later gain never displaces an earlier one
            for c in sorted(links):
                if c == ci:
                    continue
                gain = links[c] - scale * tot[c]
                if gain > best_gain + tol:
                    best_c, best_gain = c, gain
            tot[best_c] += ki
            if best_c != ci:
                comm[i] = best_c
                improved = True
                moved_any = True
    return comm, moved_any


def overlap_stats(g: DirectedGraph, clustering: Clustering, zeta: np.ndarray | None = None) -> OverlapStats:
    """Same-cluster overlap at node level (σ̄) and edge level.

    ``sigma_bar_node`` averages, over nodes with at least one neighbour, the
    share of ``N_u(i) ∪ N_d(i)`` in ``i``'s cluster. ``sigma_edge`` is the
    fraction of non-loop directed edges inside a cluster; with ``zeta`` the
    same fraction is also reported weighted by the interaction coefficients.
    """
    if clustering.n != g.n:
        raise ClusteringError("clustering does not cover the graph")
    c = clustering.assignment
    u, v = g.undirected_pairs()
    deg = np.bincount(u, minlength=g.n) + np.bincount(v, minlength=g.n)
    if not np.any(deg > 0):
        raise ClusteringError("overlap is undefined when every node is isolated")
    same_pair = (c[u] == c[v]).astype(np.float64)
    same_nb = np.bincount(u, same_pair, g.n) + np.bincount(v, same_pair, g.n)
    has = deg > 0
    sigma_node = float(np.mean(same_nb[has] / deg[has]))

    keep = g.src != g.dst
    s = c[g.src[keep]] == c[g.dst[keep]]
    sigma_edge = float(s.mean()) if s.size else 0.0
    sigma_zeta = None
    if zeta is not None:
        z = np.asarray(zeta, dtype=np.float64)[keep]
        total = float(z.sum())
        sigma_zeta = float(z[s].sum() / total) if total != 0 else None
    return OverlapStats(sigma_node, sigma_edge, sigma_zeta)


def same_cluster(g: DirectedGraph, clustering: Clustering) -> np.ndarray:
    """Per-edge indicator ``s_ij = 1{c_i = c_j}`` in canonical edge order."""
    c = clustering.assignment
    return c[g.src] == c[g.dst]


def read_clustering(stream: IO[str], n: int | None = None) -> Clustering:
    """Read ``node cluster`` lines (``#`` comments). Every node 0..n-1 must appear once."""
    pairs = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line[0] in "#%":
            continue
        toks = line.replace(",", " ").split()
        try:
            pairs.append((int(toks[0]), int(toks[1])))
        except (ValueError, IndexError):
            raise ClusteringError(f"line {lineno}: expected 'node cluster', got {line!r}") from None
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    size = n if n is not None else (int(arr[:, 0].max()) + 1 if arr.size else 0)
    if arr.shape[0] != size or not np.array_equal(np.sort(arr[:, 0]), np.arange(size)):
        raise ClusteringError(f"clustering file must list each of the {size} nodes exactly once")
    labels = np.empty(size, dtype=np.int64)
    labels[arr[:, 0]] = arr[:, 1]
    return Clustering.from_labels(labels)


def write_clustering(clustering: Clustering, stream: IO[str]) -> None:
    stream.write(f"# node cluster (k={clustering.k})\n")
    for i, c in enumerate(clustering.assignment.tolist()):
        stream.write(f"{i} {c}\n")
