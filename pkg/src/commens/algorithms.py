"""Disjoint base community-detection algorithms and the ensemble loop.

Every algorithm is a deterministic function of ``(graph, ordering)``: the
vertex ordering drives sweep order (louvain, labelprop) or merge tie-breaking
(greedy-modularity, walktrap), which is what makes repeated runs under
different orderings produce genuinely different solutions.
"""

from __future__ import annotations

import heapq
import random
import shlex
import subprocess
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import ceil
from pathlib import Path

import numpy as np

from .graph import Graph, VertexOrdering, random_ordering, write_edge_list
from .model import EnsembleSet, Partition, align_partition, parse_partition_text

BUILTIN_ALGORITHMS = ("louvain", "labelprop", "greedy-modularity", "walktrap")


def modularity(g: Graph, p: Partition) -> float:
    """Newman weighted modularity of a partition."""
    if g.total_weight == 0.0:
        return 0.0
    eu, ev, ew = g.edge_arrays()
    labels = p.labels
    internal = np.zeros(p.k)
    same = labels[eu] == labels[ev]
    np.add.at(internal, labels[eu[same]], ew[same])
    tot = np.bincount(labels, weights=g.wdeg, minlength=p.k)
    w = g.total_weight
    return float((internal / w).sum() - ((tot / (2.0 * w)) ** 2).sum())


def _adjacency_dicts(g: Graph) -> list[dict]:
    return [dict(zip(g.neighbors(v).tolist(), g.neighbor_weights(v).tolist()))
            for v in range(g.n)]


# ---------------------------------------------------------------------------
# Louvain

def _local_move(adj, wdeg, w2, sweep_order, node2com, com_tot):
    """One round of local moves; returns number of moves made."""
    moves = 0
    while True:
        moved = 0
        for v in sweep_order:
            cv = node2com[v]
            neigh: dict = {}
            for u, w in adj[v].items():
                if u != v:
                    cu = node2com[u]
                    neigh[cu] = neigh.get(cu, 0.0) + w
            dv = wdeg[v]
            com_tot[cv] -= dv
            best_c = cv
            best_gain = neigh.get(cv, 0.0) - dv * com_tot[cv] / w2
            for c, wvc in neigh.items():
                if c == cv:
                    continue
                gain = wvc - dv * com_tot[c] / w2
                if gain > best_gain:
                    best_gain = gain
                    best_c = c
            com_tot[best_c] += dv
            if best_c != cv:
                node2com[v] = best_c
                moved += 1
        moves += moved
        if moved == 0:
            return moves


def louvain(g: Graph, ordering: VertexOrdering) -> Partition:
    """Modularity maximization by local moves plus graph aggregation.

    The first-level sweep follows ``ordering``; aggregated levels sweep
    super-vertices by the minimum ordering rank of their members.
    """
    n = g.n
    if g.total_weight == 0.0:
        return Partition.from_labels(np.arange(n), g.labels)
    w2 = 2.0 * g.total_weight

    adj = _adjacency_dicts(g)
    selfw = [0.0] * n
    wdeg = g.wdeg.tolist()
    rank = ordering.rank.tolist()
    sweep = ordering.perm.tolist()
    final = np.arange(n)

    while True:
        size = len(adj)
        node2com = list(range(size))
        com_tot = list(wdeg)
        moves = _local_move(adj, wdeg, w2, sweep, node2com, com_tot)
        if moves == 0:
            break

        remap: dict = {}
        for c in node2com:
            if c not in remap:
                remap[c] = len(remap)
        labels = [remap[c] for c in node2com]
        final = np.array([labels[c] for c in final])
        n_next = len(remap)
        if n_next == size:
            break

        new_adj: list[dict] = [{} for _ in range(n_next)]
        new_selfw = [0.0] * n_next
        new_wdeg = [0.0] * n_next
        new_rank = [len(rank)] * n_next
        for v in range(size):
            cv = labels[v]
            new_selfw[cv] += selfw[v]
            new_wdeg[cv] += wdeg[v]
            if rank[v] < new_rank[cv]:
                new_rank[cv] = rank[v]
            for u, w in adj[v].items():
                cu = labels[u]
                if cu == cv:
                    if u != v:
                        new_selfw[cv] += w / 2.0
                else:
                    new_adj[cv][cu] = new_adj[cv].get(cu, 0.0) + w
        for c in range(n_next):
            if new_selfw[c]:
                new_adj[c][c] = 2.0 * new_selfw[c]
        adj, selfw, wdeg, rank = new_adj, new_selfw, new_wdeg, new_rank
        sweep = sorted(range(n_next), key=lambda c: rank[c])

    return Partition.from_labels(final, g.labels)


# ---------------------------------------------------------------------------
# Label propagation

def label_propagation(g: Graph, ordering: VertexOrdering,
                      max_sweeps: int = 100) -> Partition:
    """Asynchronous majority-label sweeps in ordering order.

    Ties pick uniformly among the maximal labels using an RNG seeded from the
    ordering seed; stops when a full sweep changes nothing (or after
    ``max_sweeps``, which guarantees termination).
    """
    n = g.n
    labels = list(range(n))
    rng = random.Random(ordering.seed)
    sweep = ordering.perm.tolist()
    for _ in range(max_sweeps):
        changed = 0
        for v in sweep:
            nbrs = g.neighbors(v)
            if len(nbrs) == 0:
                continue
            weight: dict = {}
            for u, w in zip(nbrs.tolist(), g.neighbor_weights(v).tolist()):
                lu = labels[u]
                weight[lu] = weight.get(lu, 0.0) + w
            top = max(weight.values())
            cands = [lab for lab, w in weight.items() if w == top]
            new = cands[0] if len(cands) == 1 else rng.choice(cands)
            if new != labels[v]:
                labels[v] = new
                changed += 1
        if changed == 0:
            break
    return Partition.from_labels(labels, g.labels)


# ---------------------------------------------------------------------------
# Greedy modularity agglomeration (CNM-style)

def greedy_modularity(g: Graph, ordering: VertexOrdering) -> Partition:
    """Merge the connected community pair with the largest modularity gain
    until no merge improves modularity; ties resolved by ordering rank."""
    n = g.n
    if g.total_weight == 0.0:
        return Partition.from_labels(np.arange(n), g.labels)
    w2 = 2.0 * g.total_weight
    a = (g.wdeg / w2).tolist()
    frac: list[dict] = [{} for _ in range(n)]  # cross-community weight / w2
    for u, v, w in g.edges():
        frac[u][v] = frac[u].get(v, 0.0) + w / w2
        frac[v][u] = frac[v].get(u, 0.0) + w / w2

    rank = ordering.rank.tolist()
    rep = list(rank)
    version = [0] * n
    alive = [True] * n
    parent = list(range(n))

    def tie(i, j):
        ri, rj = rep[i], rep[j]
        return (ri, rj) if ri < rj else (rj, ri)

    heap = []
    for u in range(n):
        for v, f in frac[u].items():
            if u < v:
                dq = 2.0 * (f - a[u] * a[v])
                t1, t2 = tie(u, v)
                heap.append((-dq, t1, t2, u, v, 0, 0))
    heapq.heapify(heap)

    while heap:
        ndq, _, _, i, j, vi, vj = heapq.heappop(heap)
        if not (alive[i] and alive[j]) or version[i] != vi or version[j] != vj:
            continue
        if -ndq <= 0.0:
            break
        # merge j into i, keeping the larger neighbor map for speed
        if len(frac[j]) > len(frac[i]):
            i, j = j, i
        alive[j] = False
        parent[j] = i
        version[i] += 1
        rep[i] = min(rep[i], rep[j])
        a[i] += a[j]
        fi, fj = frac[i], frac[j]
        fi.pop(j, None)
        fj.pop(i, None)
        for k, f in fj.items():
            fi[k] = fi.get(k, 0.0) + f
            fk = frac[k]
            fk.pop(j, None)
            fk[i] = fi[k]
        fj.clear()
        for k, f in fi.items():
            dq = 2.0 * (f - a[i] * a[k])
            t1, t2 = tie(i, k)
            heapq.heappush(heap, (-dq, t1, t2, i, k, version[i], version[k]))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    return Partition.from_labels([find(v) for v in range(n)], g.labels)


# ---------------------------------------------------------------------------
# Walktrap

def walktrap(g: Graph, ordering: VertexOrdering, t: int = 4) -> Partition:
    """Random-walk distance agglomeration (Ward-style) cut at the
    modularity-maximal level of the merge sequence.

    Communities are merged only when adjacent, so connected components are
    handled independently.
    """
    n = g.n
    if g.total_weight == 0.0:
        return Partition.from_labels(np.arange(n), g.labels)

    dense = np.zeros((n, n))
    eu, ev, ew = g.edge_arrays()
    dense[eu, ev] = ew
    dense[ev, eu] = ew
    d = g.wdeg.copy()
    isolated = d == 0.0
    trans = np.divide(dense, d[:, None], out=np.zeros_like(dense), where=d[:, None] > 0)
    trans[isolated, isolated] = 1.0
    prob = trans.copy()
    for _ in range(max(1, int(t)) - 1):
        prob = prob @ trans
    inv_d = np.divide(1.0, d, out=np.zeros_like(d), where=d > 0)

    w = g.total_weight
    rank = ordering.rank.tolist()
    vec = [prob[v] for v in range(n)]
    size = [1] * n
    rep = list(rank)
    strength = (g.wdeg / (2.0 * w)).tolist()  # community degree fraction
    internal = [0.0] * n                       # internal weight / w
    cross: list[dict] = [{} for _ in range(n)]
    for u, v, wt in g.edges():
        cross[u][v] = cross[u].get(v, 0.0) + wt / w
        cross[v][u] = cross[v].get(u, 0.0) + wt / w

    version = [0] * n
    alive = [True] * n

    def dsigma(i, j):
        r2 = float(((vec[i] - vec[j]) ** 2 * inv_d).sum())
        return size[i] * size[j] / (size[i] + size[j]) / n * r2

    def tie(i, j):
        ri, rj = rep[i], rep[j]
        return (ri, rj) if ri < rj else (rj, ri)

    heap = []
    for u in range(n):
        for v in cross[u]:
            if u < v:
                t1, t2 = tie(u, v)
                heap.append((dsigma(u, v), t1, t2, u, v, 0, 0))
    heapq.heapify(heap)

    q = -sum(s * s for s in strength)  # all-singleton modularity (no self-loops)
    best_q = q
    best_level = 0
    merges: list[tuple[int, int]] = []

    while heap:
        _, _, _, i, j, vi, vj = heapq.heappop(heap)
        if not (alive[i] and alive[j]) or version[i] != vi or version[j] != vj:
            continue
        q += cross[i][j] - 2.0 * strength[i] * strength[j]
        merges.append((i, j))
        if len(cross[j]) > len(cross[i]):
            i, j = j, i
        alive[j] = False
        version[i] += 1
        rep[i] = min(rep[i], rep[j])
        vec[i] = (size[i] * vec[i] + size[j] * vec[j]) / (size[i] + size[j])
        vec[j] = None
        size[i] += size[j]
        internal[i] += internal[j] + cross[i][j]
        strength[i] += strength[j]
        ci, cj = cross[i], cross[j]
        ci.pop(j, None)
        cj.pop(i, None)
        for k, f in cj.items():
            ci[k] = ci.get(k, 0.0) + f
            ck = cross[k]
            ck.pop(j, None)
            ck[i] = ci[k]
        cj.clear()
        if q > best_q:
            best_q = q
            best_level = len(merges)
        for k in ci:
            t1, t2 = tie(i, k)
            heapq.heappush(heap, (dsigma(i, k), t1, t2, i, k, version[i], version[k]))

    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in merges[:best_level]:
        parent[find(j)] = find(i)
    return Partition.from_labels([find(v) for v in range(n)], g.labels)


# ---------------------------------------------------------------------------
# Algorithm specs and the ensemble loop

class AlgorithmError(RuntimeError):
    """A base algorithm run failed."""


@dataclass(frozen=True)
class AlgorithmSpec:
    """A named base algorithm plus validated parameters.

    ``external`` shells out to a user-supplied binary implementing the
    edge-list-in / partition-on-stdout protocol.
    """

    name: str
    params: tuple = field(default=())

    def __post_init__(self):
        params = dict(self.params)
        if self.name == "walktrap":
            t = int(params.pop("t", 4))
            if t < 1:
                raise ValueError("walktrap walk length t must be >= 1")
            object.__setattr__(self, "params", (("t", t),))
        elif self.name == "labelprop":
            sweeps = int(params.pop("max_sweeps", 100))
            if sweeps < 1:
                raise ValueError("labelprop max_sweeps must be >= 1")
            object.__setattr__(self, "params", (("max_sweeps", sweeps),))
        elif self.name == "external":
            cmd = params.pop("cmd", None)
            if not cmd:
                raise ValueError("external algorithm needs a cmd parameter")
            object.__setattr__(self, "params", (("cmd", str(cmd)),))
        elif self.name in ("louvain", "greedy-modularity"):
            pass
        else:
            raise ValueError(f"unknown algorithm {self.name!r} "
                             f"(known: {', '.join(BUILTIN_ALGORITHMS)}, external)")
        if params:
            raise ValueError(f"unexpected parameters for {self.name}: {sorted(params)}")

    @classmethod
    def parse(cls, text: str) -> "AlgorithmSpec":
        """Parse ``name`` or ``name:key=val,key=val``."""
        name, _, rest = text.partition(":")
        params = []
        if rest:
            for item in rest.split(","):
                key, sep, val = item.partition("=")
                if not sep:
                    raise ValueError(f"bad algorithm parameter {item!r}")
                params.append((key.strip(), val.strip()))
        return cls(name=name.strip(), params=tuple(params))

    def param(self, key, default=None):
        return dict(self.params).get(key, default)

    def run(self, g: Graph, ordering: VertexOrdering) -> Partition:
        if self.name == "louvain":
            return louvain(g, ordering)
        if self.name == "labelprop":
            return label_propagation(g, ordering, max_sweeps=self.param("max_sweeps", 100))
        if self.name == "greedy-modularity":
            return greedy_modularity(g, ordering)
        if self.name == "walktrap":
            return walktrap(g, ordering, t=self.param("t", 4))
        if self.name == "external":
            return _run_external(g, ordering, self.param("cmd"))
        raise AssertionError(self.name)

    def describe(self) -> str:
        if not self.params:
            return self.name
        return self.name + ":" + ",".join(f"{k}={v}" for k, v in self.params)


def _run_external(g: Graph, ordering: VertexOrdering, cmd: str) -> Partition:
    """Invoke ``<binary> <edge-list-path> <ordering-seed>``; the binary must
    print a partition file (``vertex community`` lines) to stdout."""
    with tempfile.NamedTemporaryFile("w", suffix=".edges", delete=False) as fh:
        path = Path(fh.name)
    try:
        write_edge_list(g, path)
        proc = subprocess.run(
            shlex.split(cmd) + [str(path), str(ordering.seed)],
            capture_output=True, text=True)
        if proc.returncode != 0:
            raise AlgorithmError(
                f"external command {cmd!r} exited {proc.returncode}: "
                f"{proc.stderr.strip()[:500]}")
        parsed = parse_partition_text(proc.stdout, source=f"<stdout of {cmd}>")
        return align_partition(parsed, g.labels)
    finally:
        path.unlink(missing_ok=True)


def default_iterations(n: int) -> int:
    """Default ordering count: ceil(0.2 * n)."""
    return max(1, ceil(0.2 * n))


def _ensemble_task(args):
    g, spec, seed = args
    return spec.run(g, random_ordering(g.n, seed))


def run_ensemble(g: Graph, algos, K: int | None = None, master_seed: int = 0,
                 jobs: int = 1) -> EnsembleSet:
    """Run every algorithm over K seeded vertex orderings.

    The per-run ordering seeds derive from ``master_seed`` alone, so the
    resulting grid is identical whether runs execute sequentially or in
    parallel.
    """
    algos = list(algos)
    if not algos:
        raise ValueError("run_ensemble needs at least one algorithm")
    if K is None:
        K = default_iterations(g.n)
    K = int(K)
    if K < 1:
        raise ValueError("K must be >= 1")
    rng = random.Random(master_seed)
    seeds = [[rng.randrange(2 ** 62) for _ in range(K)] for _ in algos]

    grid: list[list[Partition]] = [[None] * K for _ in algos]
    if jobs > 1:
        tasks = [(g, spec, seeds[m][k]) for m, spec in enumerate(algos) for k in range(K)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_ensemble_task, tasks))
        for idx, part in enumerate(results):
            grid[idx // K][idx % K] = part
    else:
        for m, spec in enumerate(algos):
            for k in range(K):
                try:
                    grid[m][k] = spec.run(g, random_ordering(g.n, seeds[m][k]))
                except Exception as exc:
                    raise AlgorithmError(
                        f"base algorithm {spec.describe()} failed at (m={m}, k={k}): {exc}"
                    ) from exc

    return EnsembleSet(
        runs=tuple(tuple(row) for row in grid),
        algo_names=tuple(spec.describe() for spec in algos),
        ordering_seeds=tuple(tuple(row) for row in seeds),
    )
