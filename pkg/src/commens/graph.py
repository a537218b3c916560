"""Immutable undirected graph with dense internal ids and an external-label map.

Edges carry non-negative weights (default 1.0). Duplicate edges are merged by
summing weights; self-loops are rejected. Internal ids are dense ``0..n-1``
and map to arbitrary string labels preserved from the input.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class GraphDataError(ValueError):
    """Malformed edge-list input or invalid graph construction."""


class Graph:
    """Undirected weighted graph, immutable after construction.

    Parameters
    ----------
    n : number of vertices (internal ids 0..n-1)
    edges : iterable of (u, v) or (u, v, w) with internal ids
    labels : optional external labels, one per vertex (default: str(id))
    """

    __slots__ = ("n", "labels", "_label_to_id", "_indptr", "_nbrs", "_wts",
                 "_eu", "_ev", "_ew", "m", "total_weight", "wdeg", "deg")

    def __init__(self, n, edges, labels=None):
        if n < 1:
            raise GraphDataError("graph must have at least one vertex")
        if labels is None:
            labels = tuple(str(i) for i in range(n))
        else:
            labels = tuple(str(x) for x in labels)
            if len(labels) != n:
                raise GraphDataError(f"expected {n} labels, got {len(labels)}")
            if len(set(labels)) != n:
                raise GraphDataError("vertex labels must be unique")
        self.n = int(n)
        self.labels = labels
        self._label_to_id = {lab: i for i, lab in enumerate(labels)}

        merged: dict[tuple[int, int], float] = {}
        for e in edges:
            if len(e) == 2:
                u, v = e
                w = 1.0
            else:
                u, v, w = e
            u = int(u)
            v = int(v)
            if u == v:
                raise GraphDataError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise GraphDataError(f"edge ({u},{v}) outside vertex range 0..{n - 1}")
            w = float(w)
            if w < 0:
                raise GraphDataError(f"negative weight on edge ({u},{v})")
            key = (u, v) if u < v else (v, u)
            merged[key] = merged.get(key, 0.0) + w

        if merged:
            keys = sorted(merged)
            self._eu = np.fromiter((k[0] for k in keys), dtype=np.int64, count=len(keys))
            self._ev = np.fromiter((k[1] for k in keys), dtype=np.int64, count=len(keys))
            self._ew = np.fromiter((merged[k] for k in keys), dtype=np.float64, count=len(keys))
        else:
            self._eu = np.empty(0, dtype=np.int64)
            self._ev = np.empty(0, dtype=np.int64)
            self._ew = np.empty(0, dtype=np.float64)
        self.m = len(self._eu)
        self.total_weight = float(self._ew.sum())

        deg = np.zeros(n, dtype=np.int64)
        np.add.at(deg, self._eu, 1)
        np.add.at(deg, self._ev, 1)
        wdeg = np.zeros(n, dtype=np.float64)
        np.add.at(wdeg, self._eu, self._ew)
        np.add.at(wdeg, self._ev, self._ew)
        self.deg = deg
        self.wdeg = wdeg

        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(deg, out=indptr[1:])
        nbrs = np.empty(2 * self.m, dtype=np.int64)
        wts = np.empty(2 * self.m, dtype=np.float64)
        fill = indptr[:-1].copy()
        for u, v, w in zip(self._eu, self._ev, self._ew):
            nbrs[fill[u]] = v
            wts[fill[u]] = w
            fill[u] += 1
            nbrs[fill[v]] = u
            wts[fill[v]] = w
            fill[v] += 1
        self._indptr = indptr
        self._nbrs = nbrs
        self._wts = wts
        for arr in (self._eu, self._ev, self._ew, self.deg, self.wdeg,
                    self._indptr, self._nbrs, self._wts):
            arr.setflags(write=False)

    def neighbors(self, v: int) -> np.ndarray:
        return self._nbrs[self._indptr[v]:self._indptr[v + 1]]

    def neighbor_weights(self, v: int) -> np.ndarray:
        return self._wts[self._indptr[v]:self._indptr[v + 1]]

    def edges(self):
        """Iterate unique edges as (u, v, w) with u < v."""
        return zip(self._eu.tolist(), self._ev.tolist(), self._ew.tolist())

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._eu, self._ev, self._ew

    def id_of(self, label: str) -> int:
        return self._label_to_id[str(label)]

    def has_label(self, label: str) -> bool:
        return str(label) in self._label_to_id

    def adjacency_csr(self):
        """Scipy CSR adjacency (weights, symmetric)."""
        import scipy.sparse as sp

        return sp.csr_matrix(
            (self._wts, self._nbrs, self._indptr), shape=(self.n, self.n)
        )

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"


@dataclass(frozen=True)
class VertexOrdering:
    """A permutation of internal vertex ids, tagged with the seed that made it."""

    perm: np.ndarray
    seed: int

    def __post_init__(self):
        self.perm.setflags(write=False)

    @cached_property
    def rank(self) -> np.ndarray:
        """rank[v] = position of vertex v in the ordering."""
        inv = np.empty(len(self.perm), dtype=np.int64)
        inv[self.perm] = np.arange(len(self.perm))
        inv.setflags(write=False)
        return inv

    def __len__(self):
        return len(self.perm)


def random_ordering(n: int, seed: int) -> VertexOrdering:
    """Uniformly random permutation of 0..n-1, deterministic per seed."""
    if n < 1:
        raise GraphDataError("ordering needs n >= 1")
    perm = np.random.default_rng(seed).permutation(n)
    return VertexOrdering(perm=perm, seed=int(seed))


def identity_ordering(n: int) -> VertexOrdering:
    return VertexOrdering(perm=np.arange(n, dtype=np.int64), seed=-1)


def load_edge_list(path, weighted: bool = False) -> Graph:
    """Parse a whitespace-separated edge list ``u v [w]``; ``#`` starts a comment.

    Labels are arbitrary strings, mapped to dense internal ids in order of
    first appearance. Duplicate edges merge by summing weights.
    """
    labels: dict[str, int] = {}
    edges = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) == 2:
                a, b = parts
                w = 1.0
            elif len(parts) == 3 and weighted:
                a, b = parts[:2]
                try:
                    w = float(parts[2])
                except ValueError:
                    raise GraphDataError(f"{path}:{lineno}: bad weight {parts[2]!r}") from None
            else:
                raise GraphDataError(f"{path}:{lineno}: expected 'u v"
                                     f"{' [w]' if weighted else ''}', got {line!r}")
            if a == b:
                raise GraphDataError(f"{path}:{lineno}: self-loop on {a!r}")
            for lab in (a, b):
                if lab not in labels:
                    labels[lab] = len(labels)
            edges.append((labels[a], labels[b], w))
    if not edges:
        raise GraphDataError(f"{path}: empty graph")
    return Graph(len(labels), edges, labels=list(labels))


def write_edge_list(g: Graph, path, weighted: bool = False) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u, v, w in g.edges():
            if weighted:
                fh.write(f"{g.labels[u]} {g.labels[v]} {w:.12g}\n")
            else:
                fh.write(f"{g.labels[u]} {g.labels[v]}\n")


def bfs_distances(g: Graph, source: int, within=None) -> np.ndarray:
    """Hop counts from ``source``; unreachable vertices get the sentinel ``g.n``.

    With ``within``, traversal is restricted to the induced subgraph on
    ``within | {source}``.
    """
    n = g.n
    if not (0 <= source < n):
        raise GraphDataError(f"invalid vertex id {source}")
    dist = np.full(n, n, dtype=np.int64)
    if within is not None:
        allowed = np.zeros(n, dtype=bool)
        idx = np.fromiter((int(v) for v in within), dtype=np.int64)
        if len(idx) and (idx.min() < 0 or idx.max() >= n):
            raise GraphDataError("vertex set outside graph")
        allowed[idx] = True
        allowed[source] = True
    else:
        allowed = None
    dist[source] = 0
    q = deque([source])
    nbrs, indptr = g._nbrs, g._indptr
    while q:
        u = q.popleft()
        du = dist[u]
        for v in nbrs[indptr[u]:indptr[u + 1]]:
            if dist[v] == n and (allowed is None or allowed[v]):
                dist[v] = du + 1
                q.append(v)
    return dist


def all_pairs_distances(g: Graph, dtype=np.float32) -> np.ndarray:
    """Full hop-count matrix with unreachable entries set to the sentinel ``g.n``.

    Uses scipy's C implementation; equivalent to stacking ``bfs_distances``
    over every source.
    """
    from scipy.sparse.csgraph import shortest_path

    d = shortest_path(g.adjacency_csr(), method="D", unweighted=True)
    d[np.isinf(d)] = g.n
    return d.astype(dtype)


def induced_subgraph(g: Graph, vertices) -> Graph:
    """Subgraph on ``vertices`` keeping exactly the edges with both endpoints inside.

    Vertex labels are preserved; new internal ids follow ascending old ids.
    """
    vs = sorted({int(v) for v in vertices})
    if not vs:
        raise GraphDataError("induced subgraph of empty vertex set")
    if vs[0] < 0 or vs[-1] >= g.n:
        raise GraphDataError("vertex set outside graph")
    remap = {v: i for i, v in enumerate(vs)}
    keep = np.zeros(g.n, dtype=bool)
    keep[vs] = True
    eu, ev, ew = g.edge_arrays()
    mask = keep[eu] & keep[ev]
    edges = [(remap[int(u)], remap[int(v)], float(w))
             for u, v, w in zip(eu[mask], ev[mask], ew[mask])]
    return Graph(len(vs), edges, labels=[g.labels[v] for v in vs])
