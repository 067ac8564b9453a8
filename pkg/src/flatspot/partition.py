"""Forward orbit of the flat interval, preimage arcs, and dynamical partitions.

Level n of the partition tower consists of the first q_n + q_{n+1} preimages
of the flat interval together with the gaps between them.  Gaps come in two
generations: q_{n+1} "long" gaps (the pullbacks of the gap between the arc
-q_n and the flat interval) and q_n "short" ones (pullbacks of the gap on
the other side, between the flat interval and -q_{n+1}).  The builder does
not trust these counts: it sorts the arcs around the circle and derives each
gap's label from the indices of its two flanking arcs, which must match the
combinatorial pattern exactly.  Any mismatch, overlap, tiling defect or
orbit entry into the flat interval is fatal.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

from mpmath import mpf

from .flatmap import FlatMap
from .geometry import (CircleArc, PrecisionExhausted, frac, to_real,
                       working_precision)
from .rotation import ContinuedFraction


class OrbitEntersFlatError(RuntimeError):
    """A forward image of the critical value fell into the closed flat interval."""


class PartitionStructureError(RuntimeError):
    """The arcs/gaps do not realize the expected combinatorics."""


@dataclass(frozen=True)
class ForwardOrbit:
    """Positions of the forward images of the flat interval.

    positions[i] is the point with index i+1 (the image of the flat interval
    under i+1 iterations); index 1 is the critical value itself.
    """

    map: FlatMap
    positions: tuple[mpf, ...]

    @property
    def horizon(self) -> int:
        return len(self.positions)

    def point(self, k: int) -> mpf:
        """Position of the orbit point with index k >= 1."""
        if k < 1 or k > len(self.positions):
            raise IndexError(f"orbit point {k} outside computed horizon {len(self.positions)}")
        return self.positions[k - 1]


def forward_orbit(m: FlatMap, horizon: int) -> ForwardOrbit:
    """Iterate the critical value `horizon` times, insisting it avoids the flat closure."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    with working_precision(m.precision):
        pts = []
        x = m.offset
        for i in range(horizon):
            if m.flat_length > 0 and x <= m.flat_length:
                raise OrbitEntersFlatError(
                    f"orbit point {i + 1} lies in the closed flat interval "
                    "(tuning depth or precision too low for this horizon)")
            pts.append(x)
            x = m._forward_pos(x)
        return ForwardOrbit(map=m, positions=tuple(pts))


@dataclass(frozen=True)
class PreimageSet:
    """Arcs arcs[i] = i-th preimage of the flat interval; arcs[0] is the flat interval."""

    map: FlatMap
    arcs: tuple[CircleArc, ...]

    def __len__(self) -> int:
        return len(self.arcs)

    def arc(self, i: int) -> CircleArc:
        return self.arcs[i]


def backward_arcs(m: FlatMap, i_max: int) -> PreimageSet:
    """Pull the flat interval back i_max times by the analytic inverse branch.

    Disjointness is asserted incrementally against the already-placed arcs
    (sorted by left endpoint, wraparound included).
    """
    if i_max < 0:
        raise ValueError("i_max must be nonnegative")
    with working_precision(m.precision):
        flat = m.flat_interval
        arcs = [flat]
        lefts = [flat.left]            # sorted lefts for neighbour lookups
        order = [0]                    # arc index at each sorted slot
        for i in range(1, i_max + 1):
            nxt = m.map_inverse_arc(arcs[-1])
            slot = bisect.bisect_left(lefts, nxt.left)
            prev_arc = arcs[order[slot - 1]]               # cyclic predecessor
            succ_arc = arcs[order[slot % len(order)]]
            if frac(nxt.left - prev_arc.left) < prev_arc.length:
                raise PartitionStructureError(
                    f"preimage {i} overlaps preimage {order[slot - 1]}")
            if frac(succ_arc.left - nxt.left) < nxt.length:
                raise PartitionStructureError(
                    f"preimage {i} overlaps preimage {order[slot % len(order)]}")
            lefts.insert(slot, nxt.left)
            order.insert(slot, i)
            arcs.append(nxt)
        return PreimageSet(map=m, arcs=tuple(arcs))


@dataclass(frozen=True)
class Gap:
    """A complementary interval of the partition, labelled by generation and index.

    generation n means the gap is (a pullback of) the fundamental gap born at
    level n; within partition level n the long gaps have generation n and the
    short ones generation n+1.
    """

    index: int
    generation: int
    kind: str                  # "long" | "short"
    left: mpf
    length: mpf
    left_arc: int              # preimage index of the flanking arc on the left
    right_arc: int

    @property
    def right(self) -> mpf:
        return frac(self.left + self.length)


@dataclass(frozen=True)
class DynamicalPartition:
    level: int
    cf: ContinuedFraction
    arcs: tuple[CircleArc, ...]            # arcs[i] = preimage i, i < q_{n+1} + q_n
    long_gaps: tuple[Gap, ...]             # index i = 0..q_{n+1}-1
    short_gaps: tuple[Gap, ...]            # index i = 0..q_n-1
    cycle: tuple[tuple[str, int], ...]     # circular order of ("arc"|"long"|"short", index)
    tiling_defect: mpf = field(compare=False, default=None)

    @property
    def gaps(self) -> tuple[Gap, ...]:
        return self.long_gaps + self.short_gaps

    def gap(self, kind: str, index: int) -> Gap:
        pool = self.long_gaps if kind == "long" else self.short_gaps
        return pool[index]

    def sorted_gaps(self) -> list[Gap]:
        return sorted(self.gaps, key=lambda g: (float(g.left), g.left))

    def gap_containing(self, x) -> Gap | None:
        """The gap whose closure contains the position x, if any."""
        x = frac(to_real(x))
        for g in self.gaps:
            rel = frac(x - g.left)
            if rel <= g.length:
                return g
        return None


def build_partition(m: FlatMap, cf: ContinuedFraction, n: int,
                    preimages: PreimageSet) -> DynamicalPartition:
    """Assemble partition level n from the first q_{n+1}+q_n preimages.

    The circular sequence of arcs must alternate arc/gap, and every gap's
    flanking indices must match one of the two generation patterns; the
    parity convention (arc -q_n to the left of the flat interval for n even)
    is asserted explicitly.
    """
    if n < 1:
        raise ValueError("partition level must be >= 1")
    if cf.depth < n + 1:
        raise ValueError(f"need the continued fraction to depth {n + 1}")
    qn, qn1 = cf.q(n), cf.q(n + 1)
    count = qn + qn1
    if len(preimages.arcs) < count:
        raise ValueError(f"need {count} preimage arcs, have {len(preimages.arcs)}")

    with working_precision(m.precision):
        arcs = preimages.arcs[:count]
        order = sorted(range(count), key=lambda i: (float(arcs[i].left), arcs[i].left))
        even = (n % 2 == 0)
        long_gaps: dict[int, Gap] = {}
        short_gaps: dict[int, Gap] = {}
        cycle: list[tuple[str, int]] = []
        total = mpf(0)

        for slot in range(count):
            a = order[slot]
            b = order[(slot + 1) % count]
            left_arc, right_arc = arcs[a], arcs[b]
            gap_left = left_arc.right
            gap_len = frac(right_arc.left - gap_left)
            total += left_arc.length + gap_len
            if gap_len <= 0:
                raise PrecisionExhausted(
                    f"level {n}: zero-length gap between preimages {a} and {b}; "
                    "rerun with more precision bits")
            # long pattern:  n even -> (i+q_n | i),   n odd -> (i | i+q_n)
            # short pattern: n even -> (i | i+q_{n+1}), n odd -> (i+q_{n+1} | i)
            if even and a == b + qn:
                kind, idx, gen = "long", b, n
            elif (not even) and b == a + qn:
                kind, idx, gen = "long", a, n
            elif even and b == a + qn1:
                kind, idx, gen = "short", a, n + 1
            elif (not even) and a == b + qn1:
                kind, idx, gen = "short", b, n + 1
            else:
                raise PartitionStructureError(
                    f"level {n}: gap flanked by preimages {a}, {b} matches no pattern")
            gap = Gap(index=idx, generation=gen, kind=kind, left=gap_left,
                      length=gap_len, left_arc=a, right_arc=b)
            target = long_gaps if kind == "long" else short_gaps
            if idx in target:
                raise PartitionStructureError(f"level {n}: duplicate {kind} gap index {idx}")
            target[idx] = gap
            cycle.append(("arc", a))
            cycle.append((kind, idx))

        if set(long_gaps) != set(range(qn1)) or set(short_gaps) != set(range(qn)):
            raise PartitionStructureError(
                f"level {n}: gap counts {len(long_gaps)} long / {len(short_gaps)} short, "
                f"expected {qn1} / {qn}")
        # parity convention: the fundamental long gap touches the flat interval
        # with the arc -q_n on its left for n even, on its right for n odd
        g0 = long_gaps[0]
        if even and not (g0.left_arc == qn and g0.right_arc == 0):
            raise PartitionStructureError(f"level {n}: fundamental long gap misplaced (even)")
        if not even and not (g0.left_arc == 0 and g0.right_arc == qn):
            raise PartitionStructureError(f"level {n}: fundamental long gap misplaced (odd)")

        defect = abs(total - 1)
        if defect > mpf(2) ** (-(m.precision - 32)):
            raise PrecisionExhausted(
                f"level {n}: tiling defect {defect} exceeds 2^-(P-32); "
                "rerun with more precision bits")

        return DynamicalPartition(
            level=n, cf=cf, arcs=arcs,
            long_gaps=tuple(long_gaps[i] for i in range(qn1)),
            short_gaps=tuple(short_gaps[i] for i in range(qn)),
            cycle=tuple(cycle), tiling_defect=defect)


def pullback_consistency(m: FlatMap, part: DynamicalPartition,
                         sample_indices=None) -> mpf:
    """Forward-map sampled long-gap endpoints i steps and compare with gap 0.

    Returns the worst endpoint mismatch; the caller compares it against the
    2^-(P-32) structural tolerance.
    """
    with working_precision(m.precision):
        base = part.long_gaps[0]
        qn1 = part.cf.q(part.level + 1)
        if sample_indices is None:
            sample_indices = sorted({1, qn1 // 2, qn1 - 1} - {0})
        worst = mpf(0)
        for i in sample_indices:
            gap = part.long_gaps[i]
            for attr in ("left", "right"):
                x = getattr(gap, attr)
                for _ in range(i):
                    x = m._forward_pos(x)
                target = getattr(base, attr)
                d = abs(x - target)
                worst = max(worst, min(d, 1 - d))
        return worst


@dataclass(frozen=True)
class RefinementReport:
    level: int                                 # n, for the pair (P_n, P_{n+1})
    split_counts: tuple[tuple[int, int, int], ...]  # per long gap: (#preimages, #long, #short)
    max_split: int                             # max number of child elements of any long gap
    worst_endpoint_error: mpf
    shorts_become_longs: bool


def refine_check(m: FlatMap, coarse: DynamicalPartition,
                 fine: DynamicalPartition) -> RefinementReport:
    """Verify the one-step refinement combinatorics between consecutive levels.

    Every long gap of level n must decompose exactly into a_{n+2} preimages,
    a_{n+2} long gaps and one short gap of level n+1 (abutting, in place),
    and every short gap of level n must reappear verbatim as a long gap of
    level n+1.
    """
    n = coarse.level
    if fine.level != n + 1 or fine.cf.quotients[:n + 1] != coarse.cf.quotients[:n + 1]:
        raise ValueError("refine_check needs consecutive levels of the same map")
    cf = coarse.cf
    if cf.depth < n + 2:
        raise ValueError(f"need the continued fraction to depth {n + 2}")
    a_next = cf.a(n + 2)
    qn, qn1 = cf.q(n), cf.q(n + 1)
    tol = mpf(2) ** (-(m.precision - 32))

    with working_precision(m.precision):
        worst = mpf(0)
        counts = []
        for i, gap in enumerate(coarse.long_gaps):
            children = []
            for j in range(1, a_next + 1):
                idx = i + qn + j * qn1
                arc = fine.arcs[idx]
                children.append(("arc", idx, arc.left, arc.length))
            for j in range(a_next):
                child = fine.long_gaps[i + qn + j * qn1]
                children.append(("long", child.index, child.left, child.length))
            child = fine.short_gaps[i]
            children.append(("short", child.index, child.left, child.length))
            counts.append((a_next, a_next, 1))

            children.sort(key=lambda c: (float(frac(c[2] - gap.left)), frac(c[2] - gap.left)))
            cursor = gap.left
            for _, _, left, length in children:
                d = abs(left - cursor)
                worst = max(worst, min(d, 1 - d))
                cursor = frac(cursor + length)
            d = abs(cursor - gap.right)
            worst = max(worst, min(d, 1 - d))
        if worst > tol:
            raise PartitionStructureError(
                f"levels {n}->{n + 1}: refinement endpoints off by {worst} > 2^-(P-32)")

        shorts_ok = True
        for i, gap in enumerate(coarse.short_gaps):
            new_long = fine.long_gaps[i]
            d1 = abs(gap.left - new_long.left)
            d2 = abs(gap.length - new_long.length)
            if min(d1, 1 - d1) > tol or d2 > tol:
                shorts_ok = False
        if not shorts_ok:
            raise PartitionStructureError(
                f"levels {n}->{n + 1}: short gaps do not reappear as long gaps")

        return RefinementReport(level=n, split_counts=tuple(counts),
                                max_split=2 * a_next + 1,
                                worst_endpoint_error=worst,
                                shorts_become_longs=True)


def two_level_gap_split_counts(coarse: DynamicalPartition,
                               fine: DynamicalPartition) -> list[int]:
    """Number of level-n gaps inside each level-(n-2) gap (cover refinement counts)."""
    if fine.level != coarse.level + 2:
        raise ValueError("expected levels n and n+2")
    parents = coarse.sorted_gaps()
    keys = [(float(g.left), g.left) for g in parents]
    counts = [0] * len(parents)
    for child in fine.gaps:
        slot = bisect.bisect_right(keys, (float(child.left), child.left)) - 1
        parent = parents[slot]
        rel = frac(child.left - parent.left)
        if rel > parent.length:
            raise PartitionStructureError(
                f"gap of level {fine.level} not contained in any level-{coarse.level} gap")
        counts[slot] += 1
    return counts


@dataclass(frozen=True)
class GapStatistics:
    level: int
    max_gap: mpf
    min_gap: mpf
    max_preimage: mpf
    min_preimage: mpf
    min_adjacent_arc_to_gap: mpf    # min over arcs of |arc| / |adjacent gap|


def gap_statistics(part: DynamicalPartition, precision: int = 512) -> GapStatistics:
    gaps = part.gaps
    arcs = part.arcs
    max_gap = max(g.length for g in gaps)
    min_gap = min(g.length for g in gaps)
    max_arc = max(a.length for a in arcs)
    min_arc = min(a.length for a in arcs)
    with working_precision(precision):
        ratio = None
        for g in gaps:
            for arc_idx in (g.left_arc, g.right_arc):
                r = arcs[arc_idx].length / g.length
                ratio = r if ratio is None else min(ratio, r)
    return GapStatistics(level=part.level, max_gap=max_gap, min_gap=min_gap,
                         max_preimage=max_arc, min_preimage=min_arc,
                         min_adjacent_arc_to_gap=ratio)
