"""Directed interference graphs: storage, edge-list ingestion and neighborhood queries.

Nodes are dense zero-based integers. Edges are kept in canonical order,
sorted lexicographically by ``(src, dst)``; every per-edge array in the
package (coefficients, same-cluster indicators, ...) is aligned with it.
"""
from __future__ import annotations

import hashlib
import io
import logging
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np

log = logging.getLogger(__name__)


class GraphFormatError(ValueError):
    """Raised when an edge list cannot be turned into a valid graph."""


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    """Immutable directed graph in CSR form.

    ``src``/``dst`` hold the edges in canonical order. ``labels[i]`` is the
    label node ``i`` carried in the input file (identity for generated graphs).
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    labels: np.ndarray
    allow_self_loops: bool = False
    meta: dict = field(default_factory=dict)
    _out_ptr: np.ndarray = field(init=False, repr=False)
    _in_ptr: np.ndarray = field(init=False, repr=False)
    _in_src: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        src = np.ascontiguousarray(self.src, dtype=np.int64)
        dst = np.ascontiguousarray(self.dst, dtype=np.int64)
        if src.shape != dst.shape or src.ndim != 1:
            raise GraphFormatError("src and dst must be 1-d arrays of equal length")
        if self.n < 0:
            raise GraphFormatError("node count must be non-negative")
        if src.size and (src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= self.n):
            raise GraphFormatError(f"edge endpoint outside [0, {self.n})")
        if not self.allow_self_loops and np.any(src == dst):
            raise GraphFormatError(f"{int(np.sum(src == dst))} self-loop(s) present but allow_self_loops is unset")
        keys = src * max(self.n, 1) + dst
        if keys.size > 1:
            order = np.argsort(keys, kind="stable")
            if not np.array_equal(order, np.arange(keys.size)):
                src, dst, keys = src[order], dst[order], keys[order]
            if np.any(np.diff(keys) == 0):
                raise GraphFormatError("duplicate directed edges")
        labels = np.asarray(self.labels)
        if labels.shape != (self.n,):
            raise GraphFormatError("labels must have one entry per node")
        for arr in (src, dst, labels):
            arr.setflags(write=False)
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        object.__setattr__(self, "labels", labels)

        out_ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.n), out=out_ptr[1:])
        in_order = np.lexsort((src, dst))
        in_ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(dst, minlength=self.n), out=in_ptr[1:])
        in_src = src[in_order]
        for arr in (out_ptr, in_ptr, in_src):
            arr.setflags(write=False)
        object.__setattr__(self, "_out_ptr", out_ptr)
        object.__setattr__(self, "_in_ptr", in_ptr)
        object.__setattr__(self, "_in_src", in_src)

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[tuple[int, int]],
        allow_self_loops: bool = False,
    ) -> "DirectedGraph":
        arr = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        return cls(n, arr[:, 0], arr[:, 1], np.arange(n), allow_self_loops)

    @property
    def n_edges(self) -> int:
        return int(self.src.size)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist()))

    @property
    def self_loop_mask(self) -> np.ndarray:
        return self.src == self.dst

    def _check(self, j: int) -> None:
        if not 0 <= j < self.n:
            raise IndexError(f"node {j} outside [0, {self.n})")

    def upstream(self, j: int) -> np.ndarray:
        """Sorted ids ``i`` with an edge ``i -> j``."""
        self._check(j)
        return self._in_src[self._in_ptr[j]:self._in_ptr[j + 1]]

    def downstream(self, j: int) -> np.ndarray:
        """Sorted ids ``i`` with an edge ``j -> i``."""
        self._check(j)
        return self.dst[self._out_ptr[j]:self._out_ptr[j + 1]]

    def in_degree(self) -> np.ndarray:
        return np.diff(self._in_ptr)

    def out_degree(self) -> np.ndarray:
        return np.diff(self._out_ptr)

    def edge_index(self, i: int, j: int) -> int:
        """Position of edge ``(i, j)`` in canonical order; ``KeyError`` if absent."""
        self._check(i)
        self._check(j)
        lo, hi = self._out_ptr[i], self._out_ptr[i + 1]
        k = lo + int(np.searchsorted(self.dst[lo:hi], j))
        if k >= hi or self.dst[k] != j:
            raise KeyError(f"({i}, {j}) is not an edge")
        return int(k)

    def undirected_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Unordered non-loop pairs ``(u < v)`` joined by at least one edge."""
        keep = self.src != self.dst
        u = np.minimum(self.src[keep], self.dst[keep])
        v = np.maximum(self.src[keep], self.dst[keep])
        keys = np.unique(u * max(self.n, 1) + v)
        return keys // max(self.n, 1), keys % max(self.n, 1)

    def neighbor_sets(self) -> list[np.ndarray]:
        """Per node, the sorted union of upstream and downstream neighbours (self excluded)."""
        u, v = self.undirected_pairs()
        a = np.concatenate([u, v])
        b = np.concatenate([v, u])
        order = np.lexsort((b, a))
        a, b = a[order], b[order]
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(a, minlength=self.n), out=ptr[1:])
        return [b[ptr[i]:ptr[i + 1]] for i in range(self.n)]

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.int64(self.n).tobytes())
        h.update(self.src.tobytes())
        h.update(self.dst.tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class GraphStats:
    n: int
    n_edges: int
    n_undirected_edges: int
    avg_total_degree: float
    avg_in_degree: float
    avg_out_degree: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def stats(g: DirectedGraph) -> GraphStats:
    """Summary degree statistics. Total degree of ``i`` is ``|N_u(i) ∪ N_d(i)|``."""
    u, _ = g.undirected_pairs()
    n_pairs = int(u.size)
    if g.n == 0:
        return GraphStats(0, 0, 0, 0.0, 0.0, 0.0)
    avg_out = g.n_edges / g.n
    return GraphStats(
        n=g.n,
        n_edges=g.n_edges,
        n_undirected_edges=n_pairs,
        avg_total_degree=2.0 * n_pairs / g.n,
        avg_in_degree=avg_out,
        avg_out_degree=avg_out,
    )


def parse_edge_list(
    stream: IO[str] | str,
    one_based: bool | None = None,
    symmetrize: bool | None = None,
    skip_header: bool = False,
    allow_self_loops: bool = False,
) -> DirectedGraph:
    """Parse a whitespace-separated edge list.

    Lines starting with ``%`` or ``#`` are comments; tokens past the second
    (e.g. Matrix Market weights) are ignored. A ``%%MatrixMarket`` banner
    turns on ``skip_header`` automatically, and when ``one_based`` or
    ``symmetrize`` are left as ``None`` they follow the banner (Matrix Market
    is one-based; a ``symmetric`` matrix is symmetrized). Without a banner
    both default to off. Labels are remapped to dense ids in sorted label
    order, so ``n`` counts distinct labels only.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    pairs: list[tuple[int, int]] = []
    header_pending = skip_header
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("%%MatrixMarket"):
            header_pending = True
            if one_based is None:
                one_based = True
            if symmetrize is None:
                symmetrize = "symmetric" in line.lower()
            continue
        if line[0] in "%#":
            continue
        if header_pending:
            header_pending = False
            continue
        toks = line.split()
        if len(toks) < 2:
            raise GraphFormatError(f"line {lineno}: expected two node labels, got {line!r}")
        try:
            pairs.append((int(toks[0]), int(toks[1])))
        except ValueError:
            raise GraphFormatError(f"line {lineno}: non-integer node label in {line!r}") from None

    one_based = bool(one_based)
    symmetrize = bool(symmetrize)
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    n_loops = int(np.sum(arr[:, 0] == arr[:, 1]))
    if n_loops and not allow_self_loops:
        raise GraphFormatError(f"{n_loops} self-loop(s) in input and allow_self_loops is unset")

    labels, dense = np.unique(arr, return_inverse=True)
    dense = dense.reshape(-1, 2)
    if one_based:
        if labels.size and labels.min() < 1:
            raise GraphFormatError("one_based set but a label < 1 is present")
        labels = labels - 1
    if symmetrize:
        dense = np.concatenate([dense, dense[:, ::-1]])
    n = int(labels.size)
    keys = dense[:, 0] * max(n, 1) + dense[:, 1]
    uniq = np.unique(keys)
    n_dup = int(keys.size - uniq.size)
    if symmetrize:
        # a loop is mirrored onto itself; only genuine repeats count
        n_dup -= int(np.sum(dense[: len(arr), 0] == dense[: len(arr), 1]))
    if n_dup > 0:
        log.warning("dropped %d duplicate edge(s)", n_dup)
    src, dst = uniq // max(n, 1), uniq % max(n, 1)
    meta = {"symmetrized": symmetrize, "one_based": one_based, "duplicates_dropped": max(n_dup, 0)}
    return DirectedGraph(n, src, dst, labels, allow_self_loops, meta)


def read_edge_list(path, **options) -> DirectedGraph:
    with open(path) as fh:
        return parse_edge_list(fh, **options)


def write_edge_list(g: DirectedGraph, stream: IO[str]) -> None:
    """Write dense ids, one directed edge per line."""
    stream.write(f"# n={g.n} edges={g.n_edges}\n")
    for s, d in zip(g.src.tolist(), g.dst.tolist()):
        stream.write(f"{s} {d}\n")


def with_self_loops(g: DirectedGraph) -> DirectedGraph:
    """Copy of ``g`` with a loop ``(i, i)`` on every node."""
    keep = g.src != g.dst
    idx = np.arange(g.n)
    return DirectedGraph(
        g.n,
        np.concatenate([g.src[keep], idx]),
        np.concatenate([g.dst[keep], idx]),
        g.labels,
        True,
        dict(g.meta),
    )
