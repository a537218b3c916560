"""Meta-clustering based disjoint and overlapping community detection.

Base communities from every ensemble run become vertices of a multipartite
meta-graph (edges only between communities of different runs, weighted by a
set-matching function). Clustering the meta-graph groups redundant base
communities into meta-communities; a vertex-to-meta-community association
matrix then yields a disjoint partition (argmax rows) and an overlapping
cover (threshold rule or top-N assignment).
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from math import ceil, exp

import numpy as np

from .algorithms import AlgorithmSpec, run_ensemble
from .graph import Graph, random_ordering
from .model import Cover, EnsembleSet, Partition

MATCH_FUNCTIONS = ("jc", "ap")
ASSOC_FUNCTIONS = ("f", "fw")


def match_jc(ci, cj) -> float:
    """Jaccard coefficient |A & B| / |A | B|."""
    a, b = set(ci), set(cj)
    if not a or not b:
        raise ValueError("communities must be nonempty")
    inter = len(a & b)
    return inter / (len(a) + len(b) - inter)


def match_ap(ci, cj) -> float:
    """Average precision: mean of the two containment fractions."""
    a, b = set(ci), set(cj)
    if not a or not b:
        raise ValueError("communities must be nonempty")
    inter = len(a & b)
    return 0.5 * (inter / len(a) + inter / len(b))


@dataclass(frozen=True)
class MetaGraph:
    """Weighted multipartite graph over base communities.

    ``members[i]`` is the vertex set of base community i, ``run_of[i]`` the
    flat ensemble-run index it came from; edges never join two communities
    of the same run.
    """

    graph: Graph
    members: tuple[frozenset, ...]
    run_of: tuple[int, ...]
    n_runs: int


def build_meta_graph(ens: EnsembleSet, w: str = "jc") -> MetaGraph:
    """Meta-vertices are all base communities; cross-run pairs with a
    nonzero match are connected with the match value as edge weight."""
    if w not in MATCH_FUNCTIONS:
        raise ValueError(f"unknown matching function {w!r}")
    parts = ens.flat()
    members: list[frozenset] = []
    run_of: list[int] = []
    run_comms: list[list[np.ndarray]] = []
    offsets = []
    for r, part in enumerate(parts):
        offsets.append(len(members))
        comms = part.communities()
        run_comms.append(comms)
        for c in comms:
            members.append(frozenset(c.tolist()))
            run_of.append(r)

    edges = []
    for r1 in range(len(parts)):
        la = parts[r1].labels
        ka = parts[r1].k
        for r2 in range(r1 + 1, len(parts)):
            lb = parts[r2].labels
            kb = parts[r2].k
            joint = np.bincount(la * kb + lb, minlength=ka * kb).reshape(ka, kb)
            sa = joint.sum(axis=1)
            sb = joint.sum(axis=0)
            ia, ib = np.nonzero(joint)
            inter = joint[ia, ib].astype(np.float64)
            if w == "jc":
                weights = inter / (sa[ia] + sb[ib] - inter)
            else:
                weights = 0.5 * (inter / sa[ia] + inter / sb[ib])
            for a, b, wt in zip(ia.tolist(), ib.tolist(), weights.tolist()):
                edges.append((offsets[r1] + a, offsets[r2] + b, wt))

    labels = [f"r{r}c{i - offsets[r]}" for i, r in enumerate(run_of)]
    graph = Graph(len(members), edges, labels=labels)
    return MetaGraph(graph=graph, members=tuple(members),
                     run_of=tuple(run_of), n_runs=len(parts))


def cluster_meta(gp: MetaGraph, ralgo: AlgorithmSpec, seed: int = 0) -> list[list[frozenset]]:
    """Group base communities into meta-communities by re-clustering the
    meta-graph; returns, per meta-community, the list of member vertex sets."""
    part = ralgo.run(gp.graph, random_ordering(gp.graph.n, seed))
    metas = []
    for comm in part.communities():
        metas.append([gp.members[int(i)] for i in comm])
    return metas


def assoc_unweighted(v: int, meta_community) -> float:
    """Fraction of the meta-community's base communities containing v."""
    comms = list(meta_community)
    if not comms:
        raise ValueError("meta-community must be nonempty")
    return sum(1 for c in comms if v in c) / len(comms)


def assoc_weighted(v: int, meta_community) -> float:
    """Co-occurrence score: |intersection| / |union| over the base
    communities that contain v; 0.0 when none do."""
    containing = [c for c in meta_community if v in c]
    if not containing:
        return 0.0
    inter = frozenset.intersection(*[frozenset(c) for c in containing])
    union = frozenset.union(*[frozenset(c) for c in containing])
    return len(inter) / len(union)


def build_association_matrix(g: Graph, metas, assoc: str = "fw") -> np.ndarray:
    """(n x L) matrix of vertex-to-meta-community association scores."""
    if assoc not in ASSOC_FUNCTIONS:
        raise ValueError(f"unknown association function {assoc!r}")
    if not metas:
        raise ValueError("need at least one meta-community")
    n = g.n
    a = np.zeros((n, len(metas)))
    if assoc == "f":
        for l, comms in enumerate(metas):
            gamma = len(comms)
            for c in comms:
                a[sorted(c), l] += 1.0
            a[:, l] /= gamma
    else:
        for l, comms in enumerate(metas):
            containing: dict[int, list] = {}
            for c in comms:
                for v in c:
                    containing.setdefault(v, []).append(c)
            for v, cs in containing.items():
                inter = frozenset.intersection(*cs)
                union = frozenset.union(*cs)
                a[v, l] = len(inter) / len(union)
    return a


def _argmax_assign(g: Graph, a: np.ndarray) -> np.ndarray:
    """Per-vertex argmax over association columns with neighbor-vote
    tie-breaking; returns labels in meta-community column space."""
    provisional = a.argmax(axis=1)
    maxima = a.max(axis=1)
    tied = (a == maxima[:, None]).sum(axis=1) > 1
    labels = provisional.copy()
    for v in np.nonzero(tied)[0]:
        cands = np.nonzero(a[v] == maxima[v])[0]
        votes: dict[int, int] = {}
        for u in g.neighbors(v).tolist():
            lu = int(provisional[u])
            if a[v, lu] == maxima[v]:
                votes[lu] = votes.get(lu, 0) + 1
        if votes:
            best = max(votes.values())
            labels[v] = min(c for c, cnt in votes.items() if cnt == best)
        else:
            labels[v] = int(cands[0])
    return labels


def disjoint_assign(g: Graph, assoc_matrix: np.ndarray) -> Partition:
    """Argmax assignment with neighbor-vote tie-breaking.

    A tie between equally probable meta-communities goes to the candidate
    holding the plurality of the vertex's neighbors (by their own argmax
    labels); any remaining tie picks the lowest meta-community index. Empty
    meta-communities drop out and the labels are renumbered.
    """
    a = np.asarray(assoc_matrix)
    return Partition.from_labels(_argmax_assign(g, a), g.labels)


def _prob_from_similarity(avg_sim: float) -> float:
    x = exp(avg_sim * avg_sim)
    return x / (1.0 + x)


def community_prob(g: Graph, community, feature_rows: np.ndarray) -> float:
    """Connectedness probability e^{AS^2} / (1 + e^{AS^2}) where AS is the
    mean cosine similarity of feature rows over edges internal to the
    community (0 when it has no internal edges)."""
    from .endisco import sim_cos

    members = set(int(u) for u in community)
    total = 0.0
    count = 0
    for u in sorted(members):
        for nb in g.neighbors(u).tolist():
            if nb > u and nb in members:
                total += sim_cos(feature_rows[u], feature_rows[nb])
                count += 1
    avg = total / count if count else 0.0
    return _prob_from_similarity(avg)


def _edge_row_cosines(g: Graph, rows: np.ndarray) -> dict:
    """Cosine similarity of association rows for every graph edge, with
    identical rows snapping to exactly 1.0."""
    eu, ev, _ = g.edge_arrays()
    if len(eu) == 0:
        return {}
    x, y = rows[eu], rows[ev]
    dots = (x * y).sum(axis=1)
    norms = np.linalg.norm(x, axis=1) * np.linalg.norm(y, axis=1)
    sims = np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0)
    np.clip(sims, 0.0, 1.0, out=sims)
    equal = np.all(x == y, axis=1) & (norms > 0)
    sims[equal] = 1.0
    return {(int(u), int(v)): float(s) for u, v, s in zip(eu, ev, sims)}


def overlap_assign(g: Graph, assoc_matrix: np.ndarray, dp: Partition,
                   mode: str = "auto") -> Cover:
    """Grow the disjoint partition into a cover.

    ``auto``: vertex v joins a foreign community C (where it has at least one
    edge) iff adding it does not decrease the community's connectedness
    probability; all tests run against the pre-pass community contents.
    ``topn:<pct>`` (aliases top5/top10): v joins its top pct% communities by
    association row. Home memberships are always preserved.
    """
    a = np.asarray(assoc_matrix)
    n, l_meta = a.shape
    home = _argmax_assign(g, a)  # meta-column space, consistent with dp
    member_sets: dict[int, set] = {}
    for v in range(n):
        member_sets.setdefault(int(home[v]), set()).add(v)

    additions: list[tuple[int, int]] = []
    if mode == "auto":
        sims = _edge_row_cosines(g, a)
        int_sum: dict[int, float] = {}
        int_cnt: dict[int, int] = {}
        for (u, v), s in sims.items():
            c = int(home[u])
            if c == home[v]:
                int_sum[c] = int_sum.get(c, 0.0) + s
                int_cnt[c] = int_cnt.get(c, 0) + 1
        for v in range(n):
            contrib: dict[int, tuple[float, int]] = {}
            for u in g.neighbors(v).tolist():
                c = int(home[u])
                if c == home[v]:
                    continue
                key = (v, u) if v < u else (u, v)
                s = sims[key]
                tot, cnt = contrib.get(c, (0.0, 0))
                contrib[c] = (tot + s, cnt + 1)
            for c in sorted(contrib):
                tot, cnt = contrib[c]
                cnt_old = int_cnt.get(c, 0)
                as_old = int_sum.get(c, 0.0) / cnt_old if cnt_old else 0.0
                as_new = (int_sum.get(c, 0.0) + tot) / (cnt_old + cnt)
                if _prob_from_similarity(as_new) >= _prob_from_similarity(as_old):
                    additions.append((v, c))
    else:
        if mode == "top5":
            pct = 5.0
        elif mode == "top10":
            pct = 10.0
        elif mode.startswith("topn:"):
            pct = float(mode.split(":", 1)[1])
            if not 0 < pct <= 100:
                raise ValueError("topn percentage must be in (0, 100]")
        else:
            raise ValueError(f"unknown overlap mode {mode!r}")
        count = min(l_meta, max(1, ceil(pct / 100.0 * l_meta)))
        order = np.argsort(-a, axis=1, kind="stable")[:, :count]
        for v in range(n):
            for c in order[v].tolist():
                if c != home[v]:
                    additions.append((v, int(c)))

    for v, c in additions:
        member_sets.setdefault(c, set()).add(v)
    sets = [frozenset(member_sets[c]) for c in sorted(member_sets)]
    return Cover.from_sets(sets, n, dp.vertex_labels)


@dataclass(frozen=True)
class MedocResult:
    """Outputs of the meta-clustering pipeline; the association matrix and
    meta-communities are exposed for inspection."""

    partition: Partition
    cover: Cover
    association: np.ndarray
    meta_communities: list

    @property
    def n_meta(self) -> int:
        return self.association.shape[1]


def medoc(g: Graph, algos, K: int | None = None, w: str = "jc",
          assoc: str = "fw", ralgo: AlgorithmSpec | None = None,
          overlap: str = "auto", master_seed: int = 0,
          ens: EnsembleSet | None = None, timings=None) -> MedocResult:
    """Full pipeline: ensemble, meta-graph, meta-clustering, association
    matrix, disjoint argmax assignment, overlap growth."""
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
    gp = build_meta_graph(ens, w=w)
    marks["meta_graph"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    seed = random.Random(f"medoc-recluster:{master_seed}").randrange(2 ** 62)
    metas = cluster_meta(gp, ralgo, seed=seed)
    marks["meta_cluster"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    a = build_association_matrix(g, metas, assoc=assoc)
    marks["association"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    dp = disjoint_assign(g, a)
    cover = overlap_assign(g, a, dp, mode=overlap)
    marks["assign"] = time.perf_counter() - t0
    return MedocResult(partition=dp, cover=cover, association=a,
                       meta_communities=metas)
