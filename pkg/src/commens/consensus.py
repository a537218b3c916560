"""Consensus clustering baseline.

Repeatedly: run the ensemble, build the co-occurrence matrix D (fraction of
base partitions placing each vertex pair together), drop entries below a
threshold, and re-run the ensemble on D as a weighted graph — until every
base partition agrees or the iteration budget runs out.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass

import numpy as np

from .algorithms import run_ensemble
from .graph import Graph
from .model import EnsembleSet, Partition


@dataclass(frozen=True)
class ConsensusResult:
    partition: Partition
    converged: bool
    iterations: int


def consensus_matrix(ens: EnsembleSet) -> np.ndarray:
    """Symmetric co-occurrence fractions; diagonal 1, entries i/(M*K)."""
    n = ens.n
    parts = ens.flat()
    counts = np.zeros((n, n), dtype=np.float64 if n <= 3000 else np.float32)
    for part in parts:
        for members in part.communities():
            counts[np.ix_(members, members)] += 1.0
    counts /= len(parts)
    np.fill_diagonal(counts, 1.0)
    return counts


def _modal_partition(parts: list[Partition]) -> Partition:
    counts: dict[Partition, int] = {}
    for p in parts:
        counts[p] = counts.get(p, 0) + 1
    best = max(counts.values())
    for p in parts:
        if counts[p] == best:
            return p
    raise AssertionError("unreachable")


def consensus_cluster(g: Graph, algos, K: int | None = None, tau: float = 0.5,
                      max_iters: int = 10, master_seed: int = 0,
                      ens: EnsembleSet | None = None,
                      timings=None) -> ConsensusResult:
    """Iterated consensus; returns the agreed partition, or the modal one
    with ``converged=False`` when the iteration budget is exhausted."""
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must be in (0, 1)")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    marks = timings if timings is not None else {}
    rng = random.Random(f"conscl:{master_seed}")

    t0 = time.perf_counter()
    if ens is None:
        ens = run_ensemble(g, algos, K=K, master_seed=master_seed)
        marks["ensemble"] = time.perf_counter() - t0
    else:
        marks["ensemble"] = 0.0
    if K is None:
        K = ens.K

    t0 = time.perf_counter()
    current = ens
    result = None
    for it in range(1, max_iters + 1):
        parts = current.flat()
        if all(p == parts[0] for p in parts[1:]):
            result = ConsensusResult(partition=parts[0], converged=True, iterations=it)
            break
        if it == max_iters:
            result = ConsensusResult(partition=_modal_partition(parts),
                                     converged=False, iterations=it)
            break
        d = consensus_matrix(current)
        d[d < tau] = 0.0
        np.fill_diagonal(d, 0.0)
        iu, iv = np.nonzero(np.triu(d))
        edges = zip(iu.tolist(), iv.tolist(), d[iu, iv].tolist())
        weighted = Graph(g.n, edges, labels=g.labels)
        current = run_ensemble(weighted, algos, K=K,
                               master_seed=rng.randrange(2 ** 62))
    marks["consensus"] = time.perf_counter() - t0
    return result
