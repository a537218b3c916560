"""Clustering-comparison measures.

Partitions are scored with NMI (confusion-matrix form, natural logarithms)
and the Adjusted Rand Index. Covers are scored with overlapping NMI in the
LFK per-community conditional-entropy form and with the Omega index over
pair co-membership multiplicities. Everywhere, ``0 * log 0 == 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log

from .model import Cover, Partition, align_cover, align_partition


class MetricInputError(ValueError):
    """Inputs do not share a vertex universe, or a cover is empty."""


@dataclass(frozen=True)
class ConfusionTable:
    """Sparse co-membership counts between two partitions plus marginals."""

    joint: dict  # (community_a, community_b) -> count
    row: list    # per-community sizes of a
    col: list    # per-community sizes of b
    n: int


def _aligned_partitions(a: Partition, b: Partition) -> tuple[Partition, Partition]:
    if a.vertex_labels == b.vertex_labels:
        return a, b
    if set(a.vertex_labels) != set(b.vertex_labels):
        raise MetricInputError("partitions are over different vertex sets")
    return a, align_partition(b, a.vertex_labels)


def confusion(a: Partition, b: Partition) -> ConfusionTable:
    a, b = _aligned_partitions(a, b)
    joint: dict = {}
    row = [0] * a.k
    col = [0] * b.k
    for ca, cb in zip(a.labels.tolist(), b.labels.tolist()):
        joint[(ca, cb)] = joint.get((ca, cb), 0) + 1
        row[ca] += 1
        col[cb] += 1
    return ConfusionTable(joint=joint, row=row, col=col, n=a.n)


def nmi(a: Partition, b: Partition) -> float:
    """Normalized mutual information, 2*I / (H(a) + H(b)), natural logs.

    Returns 1.0 when both partitions are the single-community partition;
    0.0 when exactly one marginal entropy is zero.
    """
    t = confusion(a, b)
    n = t.n
    h_a = -sum(s / n * log(s / n) for s in t.row if s)
    h_b = -sum(s / n * log(s / n) for s in t.col if s)
    if h_a == 0.0 and h_b == 0.0:
        return 1.0
    if h_a == 0.0 or h_b == 0.0:
        return 0.0
    info = 0.0
    for (ca, cb), cnt in t.joint.items():
        info += cnt / n * log(cnt * n / (t.row[ca] * t.col[cb]))
    return 2.0 * info / (h_a + h_b)


def _c2(x: int) -> int:
    return x * (x - 1) // 2


def ari(a: Partition, b: Partition) -> float:
    """Adjusted Rand Index via pair counting; 1.0 on the degenerate 0/0 case
    (both partitions then have identical pair structure)."""
    t = confusion(a, b)
    sum_joint = sum(_c2(c) for c in t.joint.values())
    sum_a = sum(_c2(s) for s in t.row)
    sum_b = sum(_c2(s) for s in t.col)
    pairs = _c2(t.n)
    if pairs == 0:
        return 1.0
    expected = sum_a * sum_b / pairs
    maximum = (sum_a + sum_b) / 2.0
    if maximum == expected:
        return 1.0
    return (sum_joint - expected) / (maximum - expected)


def _h(p: float) -> float:
    return -p * log(p) if p > 0.0 else 0.0


def _aligned_covers(a: Cover, b: Cover) -> tuple[Cover, Cover]:
    if not a.communities or not b.communities:
        raise MetricInputError("empty cover")
    if a.vertex_labels == b.vertex_labels:
        return a, b
    if set(a.vertex_labels) != set(b.vertex_labels):
        raise MetricInputError("covers are over different vertex universes")
    return a, align_cover(b, a.vertex_labels)


def _lfk_conditional(xs, ys, n: int) -> float:
    """Mean normalized conditional entropy of the communities in ``xs`` given ``ys``.

    Per community X: the best admissible match in ``ys`` under the constraint
    h(p11) + h(p00) >= h(p10) + h(p01); without one, H(X|Y) defaults to H(X).
    Communities with zero entropy (the full universe) contribute 0.
    """
    total = 0.0
    for x in xs:
        px = len(x) / n
        h_x = _h(px) + _h(1.0 - px)
        if h_x == 0.0:
            continue
        best = h_x
        for y in ys:
            inter = len(x & y)
            p11 = inter / n
            p10 = (len(x) - inter) / n
            p01 = (len(y) - inter) / n
            p00 = 1.0 - p11 - p10 - p01
            if _h(p11) + _h(p00) < _h(p10) + _h(p01):
                continue
            qy = len(y) / n
            cond = (_h(p00) + _h(p01) + _h(p10) + _h(p11)
                    - _h(qy) - _h(1.0 - qy))
            if cond < best:
                best = cond
        total += best / h_x
    return total / len(xs)


def onmi(a: Cover, b: Cover) -> float:
    """Overlapping NMI (LFK form): 1 - mean of the two normalized conditional
    entropies; 1.0 iff the covers are identical as sets of sets."""
    a, b = _aligned_covers(a, b)
    n = a.n
    h_ab = _lfk_conditional(a.communities, b.communities, n)
    h_ba = _lfk_conditional(b.communities, a.communities, n)
    return 1.0 - (h_ab + h_ba) / 2.0


def _pair_multiplicities(c: Cover) -> dict:
    mult: dict = {}
    for comm in c.communities:
        members = sorted(comm)
        for i, u in enumerate(members):
            for v in members[i + 1:]:
                key = u * c.n + v
                mult[key] = mult.get(key, 0) + 1
    return mult


def omega(a: Cover, b: Cover) -> float:
    """Omega index: agreement of pair co-membership multiplicities, corrected
    for chance. Equals ARI when both covers are disjoint partitions."""
    a, b = _aligned_covers(a, b)
    n = a.n
    pairs = _c2(n)
    if pairs == 0:
        return 1.0
    ma = _pair_multiplicities(a)
    mb = _pair_multiplicities(b)
    agree = 0
    for key in set(ma) | set(mb):
        if ma.get(key, 0) == mb.get(key, 0):
            agree += 1
    zero_both = pairs - len(set(ma) | set(mb))
    obs = (agree + zero_both) / pairs

    def _level_counts(mult: dict) -> dict:
        levels: dict = {0: pairs - len(mult)}
        for t in mult.values():
            levels[t] = levels.get(t, 0) + 1
        return levels

    la = _level_counts(ma)
    lb = _level_counts(mb)
    exp = sum(la[t] * lb.get(t, 0) for t in la) / (pairs * pairs)
    if 1.0 - exp == 0.0:
        return 1.0 if obs == exp else 0.0
    return (obs - exp) / (1.0 - exp)
