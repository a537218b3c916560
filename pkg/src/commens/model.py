"""Community structures: disjoint partitions, overlapping covers, ensemble sets.

File formats (UTF-8, newline-delimited):
  partition: one ``vertex_label community_label`` pair per line
  cover:     one community per line, whitespace-separated vertex labels
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class CommunityFileError(ValueError):
    """Malformed partition/cover file or an assignment that is not total."""


def _normalize_labels(raw) -> tuple[np.ndarray, int]:
    """Densely renumber community labels 0..k-1 by first occurrence."""
    raw = np.asarray(raw)
    remap: dict = {}
    out = np.empty(len(raw), dtype=np.int64)
    for i, lab in enumerate(raw.tolist()):
        if lab not in remap:
            remap[lab] = len(remap)
        out[i] = remap[lab]
    return out, len(remap)


@dataclass(frozen=True)
class Partition:
    """Total assignment of vertices to disjoint communities.

    ``labels[v]`` is the community of vertex ``v``; labels are always dense
    0..k-1 (renumbered by first occurrence). ``vertex_labels`` carries the
    external names, index-aligned with internal ids.
    """

    labels: np.ndarray
    k: int
    vertex_labels: tuple[str, ...]

    @classmethod
    def from_labels(cls, raw, vertex_labels=None) -> "Partition":
        labels, k = _normalize_labels(raw)
        if vertex_labels is None:
            vertex_labels = tuple(str(i) for i in range(len(labels)))
        else:
            vertex_labels = tuple(str(x) for x in vertex_labels)
            if len(vertex_labels) != len(labels):
                raise CommunityFileError("vertex_labels length mismatch")
        labels.setflags(write=False)
        return cls(labels=labels, k=k, vertex_labels=vertex_labels)

    @classmethod
    def from_communities(cls, communities, n: int, vertex_labels=None) -> "Partition":
        raw = np.full(n, -1, dtype=np.int64)
        for c, members in enumerate(communities):
            for v in members:
                if raw[v] != -1:
                    raise CommunityFileError(f"vertex {v} assigned twice")
                raw[v] = c
        if (raw == -1).any():
            missing = int(np.argmax(raw == -1))
            raise CommunityFileError(f"vertex {missing} has no community")
        return cls.from_labels(raw, vertex_labels)

    @property
    def n(self) -> int:
        return len(self.labels)

    def communities(self) -> list[np.ndarray]:
        """Member ids per community, indexed by community label."""
        order = np.argsort(self.labels, kind="stable")
        bounds = np.searchsorted(self.labels[order], np.arange(self.k + 1))
        return [order[bounds[i]:bounds[i + 1]] for i in range(self.k)]

    def same_vertices(self, other: "Partition") -> bool:
        return self.vertex_labels == other.vertex_labels

    def __eq__(self, other):
        return (isinstance(other, Partition)
                and self.vertex_labels == other.vertex_labels
                and np.array_equal(self.labels, other.labels))

    def __hash__(self):
        return hash((self.vertex_labels, self.labels.tobytes()))


@dataclass(frozen=True)
class Cover:
    """Overlapping community structure: a list of vertex sets over 0..n-1."""

    communities: tuple[frozenset, ...]
    n: int
    vertex_labels: tuple[str, ...]

    @classmethod
    def from_sets(cls, sets, n: int, vertex_labels=None) -> "Cover":
        comms = []
        for members in sets:
            ms = frozenset(int(v) for v in members)
            if not ms:
                raise CommunityFileError("empty community in cover")
            if min(ms) < 0 or max(ms) >= n:
                raise CommunityFileError("cover member outside vertex range")
            comms.append(ms)
        if vertex_labels is None:
            vertex_labels = tuple(str(i) for i in range(n))
        else:
            vertex_labels = tuple(str(x) for x in vertex_labels)
            if len(vertex_labels) != n:
                raise CommunityFileError("vertex_labels length mismatch")
        return cls(communities=tuple(comms), n=n, vertex_labels=vertex_labels)

    def membership_counts(self) -> np.ndarray:
        counts = np.zeros(self.n, dtype=np.int64)
        for c in self.communities:
            for v in c:
                counts[v] += 1
        return counts

    def as_label_sets(self) -> set[frozenset]:
        """Communities as frozensets of external labels (order-free view)."""
        return {frozenset(self.vertex_labels[v] for v in c) for c in self.communities}


@dataclass(frozen=True)
class EnsembleSet:
    """The M x K grid of base partitions: one row per algorithm, one column per ordering."""

    runs: tuple[tuple[Partition, ...], ...]
    algo_names: tuple[str, ...]
    ordering_seeds: tuple[tuple[int, ...], ...] = field(default=())

    @property
    def M(self) -> int:
        return len(self.runs)

    @property
    def K(self) -> int:
        return len(self.runs[0]) if self.runs else 0

    @property
    def n(self) -> int:
        return self.runs[0][0].n

    @property
    def total_communities(self) -> int:
        """Clu: summed community count over every run in the grid."""
        return sum(p.k for row in self.runs for p in row)

    def flat(self) -> list[Partition]:
        """Partitions in row-major (m, k) order."""
        return [p for row in self.runs for p in row]


def partition_to_cover(p: Partition) -> Cover:
    """One community per label; membership preserved exactly."""
    sets = [frozenset(c.tolist()) for c in p.communities()]
    return Cover.from_sets(sets, p.n, p.vertex_labels)


def parse_partition_text(text: str, source: str = "<text>") -> Partition:
    """Parse ``vertex_label community_label`` lines; internal ids follow line order."""
    vertex_labels = []
    raw = []
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise CommunityFileError(f"{source}:{lineno}: expected 'vertex community'")
        v, c = parts
        if v in seen:
            raise CommunityFileError(f"{source}:{lineno}: duplicate vertex {v!r}")
        seen.add(v)
        vertex_labels.append(v)
        raw.append(c)
    if not raw:
        raise CommunityFileError(f"{source}: empty partition")
    return Partition.from_labels(raw, vertex_labels)


def read_partition(path) -> Partition:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_partition_text(fh.read(), source=str(path))


def write_partition(p: Partition, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in range(p.n):
            fh.write(f"{p.vertex_labels[v]} {p.labels[v]}\n")


def align_partition(p: Partition, vertex_labels) -> Partition:
    """Reindex a partition onto the given vertex-label order.

    Raises if the label sets differ (the assignment must stay total).
    """
    vertex_labels = tuple(str(x) for x in vertex_labels)
    if p.vertex_labels == vertex_labels:
        return p
    pos = {lab: i for i, lab in enumerate(p.vertex_labels)}
    if set(pos) != set(vertex_labels):
        missing = sorted(set(vertex_labels) - set(pos))[:3]
        extra = sorted(set(pos) - set(vertex_labels))[:3]
        raise CommunityFileError(
            f"vertex sets differ (missing={missing}, unexpected={extra})")
    raw = [p.labels[pos[lab]] for lab in vertex_labels]
    return Partition.from_labels(raw, vertex_labels)


def read_cover(path) -> Cover:
    """Read one community per line; the universe is the union of all members."""
    label_ids: dict[str, int] = {}
    raw_comms = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if line.startswith("#"):
                continue
            if not line.strip():
                raise CommunityFileError(f"{path}:{lineno}: empty community line")
            members = line.split()
            for lab in members:
                if lab not in label_ids:
                    label_ids[lab] = len(label_ids)
            raw_comms.append([label_ids[lab] for lab in members])
    if not raw_comms:
        raise CommunityFileError(f"{path}: empty cover file")
    labels = [None] * len(label_ids)
    for lab, i in label_ids.items():
        labels[i] = lab
    return Cover.from_sets(raw_comms, len(labels), labels)


def write_cover(c: Cover, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for comm in c.communities:
            fh.write(" ".join(c.vertex_labels[v] for v in sorted(comm)) + "\n")


def align_cover(c: Cover, vertex_labels) -> Cover:
    """Reindex a cover onto the given vertex-label order (universes must match)."""
    vertex_labels = tuple(str(x) for x in vertex_labels)
    if c.vertex_labels == vertex_labels:
        return c
    if set(c.vertex_labels) != set(vertex_labels):
        raise CommunityFileError("cover vertex universes differ")
    new_id = {lab: i for i, lab in enumerate(vertex_labels)}
    sets = [frozenset(new_id[c.vertex_labels[v]] for v in comm) for comm in c.communities]
    return Cover.from_sets(sets, len(vertex_labels), vertex_labels)
