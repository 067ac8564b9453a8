"""Fixed-precision arithmetic on the circle R/Z.

All lengths and positions are mpmath ``mpf`` values.  The working precision
is a context-wide parameter: callers establish it once with
:func:`working_precision` (or implicitly through the map/pipeline objects,
which carry their own bit count) and every operation below rounds at the
ambient precision.  Values are immutable, so they can be shared freely.

Distance conventions between points and arcs follow the bracket notation
used throughout the package: a round bracket measures to the nearer
endpoint of an arc, a square bracket adds that arc's own length.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal

from mpmath import mp, mpf, workprec

MIN_PRECISION_BITS = 64

ArcArcMode = Literal["open_open", "closed_open", "open_closed", "closed_closed"]


class PrecisionExhausted(ArithmeticError):
    """A structural tolerance failed; rerun the computation with more bits."""


def working_precision(bits: int):
    """Context manager pinning the ambient binary precision."""
    if bits < MIN_PRECISION_BITS:
        raise ValueError(f"precision must be at least {MIN_PRECISION_BITS} bits, got {bits}")
    return workprec(bits)


def to_real(value) -> mpf:
    """Convert a decimal string / int / mpf to an mpf at the ambient precision.

    Strings are the lossless interchange format; floats are accepted for
    test convenience only.
    """
    if isinstance(value, mpf):
        return +value
    if isinstance(value, (int, str)):
        return mpf(value)
    if isinstance(value, float):
        return mpf(value)
    raise TypeError(f"cannot interpret {type(value).__name__} as a real number")


def frac(x: mpf) -> mpf:
    """Fractional part in [0, 1)."""
    return x - mp.floor(x)


@dataclass(frozen=True)
class CirclePoint:
    """A point of R/Z, stored as a position normalized to [0, 1)."""

    position: mpf

    def __post_init__(self):
        object.__setattr__(self, "position", frac(to_real(self.position)))

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"CirclePoint({mp.nstr(self.position, 12)})"


@dataclass(frozen=True)
class CircleArc:
    """Counterclockwise arc of positive length < 1, anchored at its left endpoint.

    Storing (left, length) instead of two endpoints keeps wraparound
    unambiguous.
    """

    left: mpf
    length: mpf

    def __post_init__(self):
        left = frac(to_real(self.left))
        length = to_real(self.length)
        if not (length > 0 and length < 1):
            raise ValueError(f"arc length must lie in (0, 1), got {mp.nstr(length, 10)}")
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "length", length)

    @property
    def right(self) -> mpf:
        """Right endpoint, normalized to [0, 1)."""
        return frac(self.left + self.length)

    def contains(self, x, strict: bool = True) -> bool:
        """Whether the position x lies inside the arc (strictly, by default)."""
        rel = frac(to_real(x) - self.left)
        if strict:
            return rel > 0 and rel < self.length
        return rel <= self.length

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"CircleArc({mp.nstr(self.left, 12)}, len={mp.nstr(self.length, 12)})"


def _pos(p) -> mpf:
    return p.position if isinstance(p, CirclePoint) else frac(to_real(p))


def circle_dist(p, q) -> mpf:
    """Length of the shortest arc between two points; symmetric, in [0, 1/2]."""
    d = abs(_pos(p) - _pos(q))
    return min(d, 1 - d)


def dist_point_arc(p, arc: CircleArc, mode: Literal["near", "far"] = "near") -> mpf:
    """Distance from a point to the nearer ("near") or farther ("far") endpoint of an arc.

    The far distance is the near distance plus the arc length, i.e. it is
    measured through the arc.  The point must not lie strictly inside the arc.
    """
    x = _pos(p)
    rel = frac(x - arc.left)
    if rel > 0 and rel < arc.length:
        raise ValueError("point lies inside the arc; the point/arc distance is undefined")
    if rel == 0 or rel == arc.length:
        near = mpf(0)                      # point sits on an endpoint
    else:
        near = min(rel - arc.length, 1 - rel)
    if mode == "near":
        return near
    if mode == "far":
        return near + arc.length
    raise ValueError(f"unknown mode {mode!r}")


def _gaps_between(a: CircleArc, b: CircleArc) -> tuple[mpf, mpf]:
    """The two complementary gaps (a.right -> b.left, b.right -> a.left) for disjoint arcs."""
    gap_ab = frac(b.left - a.left) - a.length
    gap_ba = frac(a.left - b.left) - b.length
    if gap_ab < 0 or gap_ba < 0:
        raise ValueError("arcs overlap; arc/arc distance requires disjoint arcs")
    return gap_ab, gap_ba


def dist_arc_arc(a: CircleArc, b: CircleArc, mode: ArcArcMode = "open_open") -> mpf:
    """Bracketed distance between two disjoint arcs.

    "open_open" is the gap between the closest endpoints; each closed side
    adds that arc's length (measured through it).
    """
    gap_ab, gap_ba = _gaps_between(a, b)
    gap = min(gap_ab, gap_ba)
    if mode == "open_open":
        return gap
    if mode == "closed_open":
        return gap + a.length
    if mode == "open_closed":
        return gap + b.length
    if mode == "closed_closed":
        return gap + a.length + b.length
    raise ValueError(f"unknown mode {mode!r}")


def arcs_disjoint(a: CircleArc, b: CircleArc) -> bool:
    try:
        _gaps_between(a, b)
    except ValueError:
        return False
    return True


def total_length(arcs: Iterable[CircleArc]) -> mpf:
    return sum((arc.length for arc in arcs), mpf(0))
