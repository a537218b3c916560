"""Ensemble-based disjoint community detection.

Base partitions become per-vertex features (distance to every base
community), features become membership posteriors, posteriors become a
pairwise vertex-similarity matrix, and a re-clustering algorithm on the
(sparsified) similarity graph yields the final partition.
"""

from __future__ import annotations

import random
import time

import numpy as np

from .algorithms import AlgorithmSpec, run_ensemble
from .graph import Graph, all_pairs_distances, bfs_distances, random_ordering
from .model import EnsembleSet, Partition

INVOLVEMENT_FUNCTIONS = ("rcc", "idc")
SIMILARITY_FUNCTIONS = ("cos", "che")


def involvement_rcc(g: Graph, v: int, community) -> float:
    """Inverse mean shortest-path distance from v to the community, clamped to [0,1].

    Distances are measured on the full graph; if v belongs to the community
    its zero self-distance is included. Unreachable members contribute the
    sentinel distance ``g.n``.
    """
    members = sorted(int(u) for u in community)
    if not members:
        raise ValueError("community must be nonempty")
    dist = bfs_distances(g, v)
    total = int(dist[members].sum())
    if total == 0:
        return 1.0
    return min(1.0, len(members) / total)


def community_centroid(g: Graph, community) -> int:
    """Most central member: highest closeness in the induced subgraph,
    ties going to the lowest internal id."""
    members = sorted(int(u) for u in community)
    if not members:
        raise ValueError("community must be nonempty")
    if len(members) == 1:
        return members[0]
    best = None
    best_total = None
    mset = set(members)
    for u in members:
        dist = bfs_distances(g, u, within=mset)
        total = int(dist[members].sum())
        if best_total is None or total < best_total:
            best, best_total = u, total
    return best


def involvement_idc(g: Graph, v: int, community) -> float:
    """Inverse shortest-path distance from v to the community centroid;
    1.0 when v is the centroid itself."""
    u_c = community_centroid(g, community)
    if v == u_c:
        return 1.0
    d = int(bfs_distances(g, v)[u_c])
    return 1.0 / d


def _community_slots(ens: EnsembleSet):
    """Global feature ordering: runs in grid order, communities by label."""
    slots = []
    for row in ens.runs:
        for part in row:
            slots.append(part.communities())
    return slots


def build_features(g: Graph, ens: EnsembleSet, inv: str = "rcc") -> np.ndarray:
    """Distance features d = 1 - involvement, one column per base community.

    Returns an (n, Clu) array in [0, 1]; columns follow the ensemble grid in
    (algorithm, ordering) order with communities ordered by label.
    """
    if inv not in INVOLVEMENT_FUNCTIONS:
        raise ValueError(f"unknown involvement function {inv!r}")
    n = g.n
    dtype = np.float64 if n <= 3000 else np.float32
    dist = all_pairs_distances(g, dtype=dtype)
    per_run = _community_slots(ens)
    clu = sum(len(comms) for comms in per_run)
    feats = np.empty((n, clu), dtype=np.float64)
    col = 0
    if inv == "rcc":
        for comms in per_run:
            indicator = np.zeros((n, len(comms)), dtype=dtype)
            for j, members in enumerate(comms):
                indicator[members, j] = 1.0
            sums = dist @ indicator
            sizes = np.array([len(c) for c in comms], dtype=np.float64)
            with np.errstate(divide="ignore"):
                invol = np.where(sums > 0, sizes / np.maximum(sums, 1e-300), 1.0)
            feats[:, col:col + len(comms)] = 1.0 - np.clip(invol, 0.0, 1.0)
            col += len(comms)
    else:
        for comms in per_run:
            for members in comms:
                u_c = community_centroid(g, members)
                d = dist[:, u_c].astype(np.float64)
                invol = np.where(d > 0, 1.0 / np.maximum(d, 1.0), 1.0)
                feats[:, col] = 1.0 - np.clip(invol, 0.0, 1.0)
                col += 1
    return feats


def posterior(dists) -> np.ndarray:
    """Membership posteriors from distance features with add-one smoothing.

    ``P_i = (D - F_i + 1) / sum_k (D - F_k + 1)`` with ``D = max_k F_k``;
    every entry is positive and each row sums to 1. Accepts a single feature
    vector or a stacked (n, Clu) array.
    """
    f = np.asarray(dists, dtype=np.float64)
    single = f.ndim == 1
    if single:
        f = f[None, :]
    if f.shape[1] == 0:
        raise ValueError("need at least one feature")
    num = f.max(axis=1, keepdims=True) - f + 1.0
    probs = num / num.sum(axis=1, keepdims=True)
    return probs[0] if single else probs


def sim_cos(p, q) -> float:
    """Cosine similarity; exactly 1.0 for identical vectors."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("vectors must have equal length")
    if np.array_equal(p, q):
        return 1.0
    denom = float(np.linalg.norm(p) * np.linalg.norm(q))
    if denom == 0.0:
        return 0.0
    return float(np.clip(float(p @ q) / denom, 0.0, 1.0))


def sim_che(p, q) -> float:
    """Chebyshev similarity: 1 - max absolute coordinate difference."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("vectors must have equal length")
    return float(np.clip(1.0 - np.abs(p - q).max(), 0.0, 1.0))


def build_ensemble_matrix(posteriors: np.ndarray, sim: str = "cos") -> np.ndarray:
    """Pairwise vertex similarity between posterior rows.

    Exactly symmetric with unit diagonal; values within 1e-12 of 1 are
    snapped to 1 so that identical rows compare as fully similar.
    """
    if sim not in SIMILARITY_FUNCTIONS:
        raise ValueError(f"unknown similarity function {sim!r}")
    p = np.asarray(posteriors, dtype=np.float64)
    if sim == "cos":
        norms = np.linalg.norm(p, axis=1, keepdims=True)
        unit = np.divide(p, norms, out=np.zeros_like(p), where=norms > 0)
        s = unit @ unit.T
    else:
        from scipy.spatial.distance import pdist, squareform

        s = 1.0 - squareform(pdist(p, metric="chebyshev"))
    s = (s + s.T) / 2.0
    np.clip(s, 0.0, 1.0, out=s)
    s[s > 1.0 - 1e-12] = 1.0
    np.fill_diagonal(s, 1.0)
    return s


def similarity_graph(matrix: np.ndarray, sparsify: str = "mean",
                     labels=None) -> Graph:
    """Weighted graph from an ensemble matrix under a sparsification policy.

    ``full`` keeps every positive off-diagonal entry, ``mean`` keeps entries
    at or above the global off-diagonal mean, ``topk:<k>`` keeps each
    vertex's k strongest neighbors (symmetrized by union).
    """
    s = np.asarray(matrix)
    n = s.shape[0]
    iu, iv = np.triu_indices(n, k=1)
    vals = s[iu, iv]
    if sparsify == "full":
        keep = vals > 0.0
    elif sparsify == "mean":
        if len(vals) == 0:
            keep = np.zeros(0, dtype=bool)
        else:
            keep = vals >= vals.mean()
    elif sparsify.startswith("topk:"):
        k = int(sparsify.split(":", 1)[1])
        if k < 1:
            raise ValueError("topk sparsification needs k >= 1")
        masked = s - np.diag(np.full(n, np.inf))
        order = np.argsort(-masked, axis=1, kind="stable")[:, :min(k, n - 1)]
        pairmask = np.zeros((n, n), dtype=bool)
        rows = np.repeat(np.arange(n), order.shape[1])
        pairmask[rows, order.ravel()] = True
        pairmask |= pairmask.T
        keep = pairmask[iu, iv] & (vals > 0.0)
    else:
        raise ValueError(f"unknown sparsification policy {sparsify!r}")
    edges = zip(iu[keep].tolist(), iv[keep].tolist(), vals[keep].tolist())
    return Graph(n, edges, labels=labels)


def endisco(g: Graph, algos, K: int | None = None, inv: str = "rcc",
            sim: str = "cos", ralgo: AlgorithmSpec | None = None,
            sparsify: str = "mean", master_seed: int = 0,
            ens: EnsembleSet | None = None, timings=None) -> Partition:
    """Full pipeline: ensemble, features, posteriors, similarity matrix,
    sparsified re-clustering. Deterministic per master seed."""
    if ralgo is None:
        ralgo = AlgorithmSpec("louvain")
    marks = timings if timings is not None else {}
    t0 = time.perf_counter()
    if ens is None:
        ens = run_ensemble(g, algos, K=K, master_seed=master_seed)
        marks["ensemble"] = time.perf_counter() - t0
    else:
        marks["ensemble"] = 0.0

    t0 = time.perf_counter()
    feats = build_features(g, ens, inv=inv)
    marks["features"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    probs = posterior(feats)
    matrix = build_ensemble_matrix(probs, sim=sim)
    marks["matrix"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    sg = similarity_graph(matrix, sparsify=sparsify, labels=g.labels)
    marks["sparsify"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    seed = random.Random(f"endisco-recluster:{master_seed}").randrange(2 ** 62)
    part = ralgo.run(sg, random_ordering(sg.n, seed))
    marks["recluster"] = time.perf_counter() - t0
    return part
