"""Rotation numbers: certified rational comparisons, continued fractions, tuning.

The rotation number is never estimated by orbit averaging (O(1/n) and
uncertifiable).  Everything rests on one primitive: the sign of
g(x) = F^q(x) - x - p for the monotone lift F, evaluated on a mesh made of
the orbit of the critical value plus the flat-interval endpoints.  Pointwise
signs certify one-sided bounds on rho; a mixed-sign mesh certifies equality;
an envelope criterion using the monotonicity of F^q upgrades an all-positive
(all-negative) mesh to a strict inequality.  Partial quotients are then
extracted by walking semiconvergents, and parameter tuning bisects the
offset against successive convergents of the target.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from math import gcd

from mpmath import mp, mpf

from .flatmap import FlatMap
from .geometry import circle_dist, frac, to_real, working_precision

MAX_PARTIAL_QUOTIENT = 10_000


class Comparison(enum.Enum):
    LESS = "less"          # rho(f) < p/q, certified
    GREATER = "greater"    # rho(f) > p/q, certified
    STRADDLES = "straddles"  # rho(f) = p/q certified, or mesh-undecided


class RationalRotationError(RuntimeError):
    """The rotation number looks rational (outside the standing assumption)."""


class TuneSeparationError(RuntimeError):
    """The offset bracket collapsed below tolerance before certifying the target depth."""


@dataclass(frozen=True)
class ContinuedFraction:
    """Partial quotients a_1..a_N with convergents p_n/q_n.

    q_{n+1} = a_{n+1} q_n + q_{n-1}, q_0 = 1, q_1 = a_1 (and the analogous
    recurrence for p_n); every convergent is automatically in lowest terms.
    """

    quotients: tuple[int, ...]
    numerators: tuple[int, ...]    # p_0 .. p_N
    denominators: tuple[int, ...]  # q_0 .. q_N

    @classmethod
    def from_quotients(cls, quotients) -> "ContinuedFraction":
        quotients = tuple(int(a) for a in quotients)
        if any(a < 1 for a in quotients):
            raise ValueError("partial quotients must be positive integers")
        p_prev, q_prev = 1, 0
        p_cur, q_cur = 0, 1
        ps, qs = [0], [1]
        for a in quotients:
            p_prev, p_cur = p_cur, a * p_cur + p_prev
            q_prev, q_cur = q_cur, a * q_cur + q_prev
            ps.append(p_cur)
            qs.append(q_cur)
        cf = cls(quotients=quotients, numerators=tuple(ps), denominators=tuple(qs))
        for n in range(1, len(ps)):
            if abs(ps[n] * qs[n - 1] - ps[n - 1] * qs[n]) != 1:
                raise AssertionError("convergent recurrence lost coprimality")
        return cf

    @property
    def depth(self) -> int:
        return len(self.quotients)

    def a(self, n: int) -> int:
        """Partial quotient a_n (1-based)."""
        return self.quotients[n - 1]

    def q(self, n: int) -> int:
        """Convergent denominator q_n (q_0 = 1)."""
        return self.denominators[n]

    def p(self, n: int) -> int:
        return self.numerators[n]

    def convergent(self, n: int) -> Fraction:
        return Fraction(self.numerators[n], self.denominators[n])

    @property
    def sup_quotient(self) -> int:
        return max(self.quotients)

    def is_bounded_by(self, bound: int) -> bool:
        return self.sup_quotient <= bound

    def value(self) -> Fraction:
        return self.convergent(self.depth)


def cf_of_fraction(x: Fraction, depth: int) -> tuple[int, ...]:
    """Exact continued fraction of a rational in (0, 1), truncated to `depth` quotients."""
    if not (0 < x < 1):
        raise ValueError("expected a number in (0, 1)")
    quotients = []
    num, den = x.denominator, x.numerator   # start from 1/x
    while len(quotients) < depth and den:
        a, rem = divmod(num, den)
        quotients.append(a)
        num, den = den, rem
    return tuple(quotients)


def cf_of_real(x: mpf, depth: int) -> tuple[int, ...]:
    """Arithmetic continued fraction of a real in (0, 1) by the Gauss map.

    Works at the ambient precision; stops early if the remainder underflows
    (the caller asked for more quotients than the precision supports).
    """
    x = to_real(x)
    if not (0 < x < 1):
        raise ValueError("expected a number in (0, 1)")
    quotients = []
    eps = mpf(2) ** (-(mp.prec - 16))
    while len(quotients) < depth:
        inv = 1 / x
        a = int(mp.floor(inv))
        quotients.append(a)
        x = inv - a
        if x < eps:
            break
    return tuple(quotients)


@dataclass(frozen=True)
class RotationTarget:
    """A bounded-type irrational target: golden, silver, an explicit CF, or a decimal."""

    kind: str
    quotients: tuple[int, ...] = ()
    value: str = ""

    @classmethod
    def golden(cls) -> "RotationTarget":
        return cls(kind="golden")

    @classmethod
    def silver(cls) -> "RotationTarget":
        return cls(kind="silver")

    @classmethod
    def explicit_cf(cls, quotients) -> "RotationTarget":
        quotients = tuple(int(a) for a in quotients)
        if not quotients or any(a < 1 for a in quotients):
            raise ValueError("explicit CF needs a nonempty list of positive integers")
        return cls(kind="explicit_cf", quotients=quotients)

    @classmethod
    def decimal(cls, value: str) -> "RotationTarget":
        return cls(kind="decimal", value=str(value))

    @classmethod
    def parse(cls, spec: str) -> "RotationTarget":
        """Parse the CLI forms golden | silver | cf:1,2,2 | dec:0.59128..."""
        if spec == "golden":
            return cls.golden()
        if spec == "silver":
            return cls.silver()
        if spec.startswith("cf:"):
            return cls.explicit_cf(int(s) for s in spec[3:].split(","))
        if spec.startswith("dec:"):
            return cls.decimal(spec[4:])
        raise ValueError(f"unknown rotation target {spec!r}")

    def describe(self) -> str:
        if self.kind in ("golden", "silver"):
            return self.kind
        if self.kind == "explicit_cf":
            return "cf:" + ",".join(str(a) for a in self.quotients)
        return "dec:" + self.value

    def partial_quotients(self, depth: int) -> tuple[int, ...]:
        if self.kind == "golden":
            return (1,) * depth
        if self.kind == "silver":
            return (2,) * depth
        if self.kind == "explicit_cf":
            if depth > len(self.quotients):
                raise ValueError(
                    f"explicit CF target has only {len(self.quotients)} quotients, need {depth}")
            return self.quotients[:depth]
        quotients = cf_of_fraction(Fraction(self.value), depth)
        if len(quotients) < depth:
            raise ValueError(
                f"decimal target supports only {len(quotients)} quotients, need {depth}")
        return quotients

    def cf(self, depth: int) -> ContinuedFraction:
        return ContinuedFraction.from_quotients(self.partial_quotients(depth))

    def decimal_value(self) -> mpf:
        """High-precision decimal value (reference rotation for order checks)."""
        if self.kind == "golden":
            return (mp.sqrt(5) - 1) / 2
        if self.kind == "silver":
            return mp.sqrt(2) - 1
        if self.kind == "explicit_cf":
            # evaluate the finite CF bottom-up
            v = mpf(0)
            for a in reversed(self.quotients):
                v = 1 / (a + v)
            return v
        return mpf(self.value)


# -- certified comparison ----------------------------------------------------


def _lift_iterate(m: FlatMap, x: mpf, steps: int) -> mpf:
    """F^steps(x) as a lift value for x in [0, 1)."""
    w = 0
    y = x
    for _ in range(steps):
        y, wrapped = m._forward_wrapped(y)
        if wrapped:
            w += 1
    return y + w


class _LiftOrbit:
    """Lazily extended orbit of the critical value with lift bookkeeping.

    Shared between successive comparisons of the same map so the orbit is
    computed once per map rather than once per rational probe.  If the orbit
    ever lands in the closed flat interval it returns to the critical value
    one step later, so it is exactly periodic from the start and the
    rotation number is the exactly known rational winding/period.
    """

    def __init__(self, m: FlatMap):
        self.m = m
        self.positions: list[mpf] = [m.offset]
        self.lifts: list[mpf] = [m.offset]
        self._winding = 0
        self.locked: Fraction | None = None
        self._period = 0
        self._period_lift_gain = 0

    def ensure(self, upto: int) -> None:
        m = self.m
        flat = m.flat_length
        while len(self.positions) <= upto:
            if self.locked is not None:
                j = len(self.positions)
                self.positions.append(self.positions[j - self._period])
                self.lifts.append(self.lifts[j - self._period] + self._period_lift_gain)
                continue
            x = self.positions[-1]
            w = self._winding
            x, wrapped = m._forward_wrapped(x)
            if wrapped:
                w += 1
            self.positions.append(x)
            self.lifts.append(x + w)
            self._winding = w
            if flat > 0 and x <= flat:
                # landed in the closed flat interval: the next value is exactly
                # the critical value again, so the orbit is periodic from index 0
                x2, wrapped2 = m._forward_wrapped(x)
                w2 = w + (1 if wrapped2 else 0)
                assert x2 == m.offset
                period = len(self.positions)   # omega reappears at this index
                self.positions.append(x2)
                self.lifts.append(x2 + w2)
                self._winding = w2
                self._period = period
                self._period_lift_gain = w2    # lifts[period] - lifts[0]
                self.locked = Fraction(w2, period)


def _sorted_mesh(mesh: dict) -> list[tuple[mpf, mpf]]:
    # float keys order everything except sub-ulp ties, which fall back to exact mpf
    return sorted(mesh.items(), key=lambda kv: (float(kv[0]), kv[0]))


def _certify(points: list[tuple[mpf, mpf]], positive: bool) -> list[int]:
    """Indices of consecutive sorted mesh pairs where the envelope criterion fails.

    For a monotone lift, g(x) >= g(x_i) - (x_{i+1} - x_i) on [x_i, x_{i+1}]
    (and symmetrically from the right), so a one-sign mesh certifies a strict
    inequality whenever each |g| beats the local mesh gap.
    """
    bad = []
    n = len(points)
    for i in range(n):
        x0, g0 = points[i]
        x1, g1 = points[(i + 1) % n]
        gap = (x1 - x0) if i + 1 < n else (x1 + 1 - x0)
        if positive:
            if not g0 > gap:
                bad.append(i)
        else:
            if not (-g1) > gap:
                bad.append(i)
    return bad


def compare_rho_rational(m: FlatMap, p: int, q: int, max_mesh_factor: int = 8,
                         orbit: _LiftOrbit | None = None) -> Comparison:
    """Certified comparison of rho(f) with p/q via signs of F^q(x) - x - p.

    The mesh holds orbit points of the critical value plus both flat-interval
    endpoints.  Mixed strict signs (or an exact zero) certify rho = p/q.  A
    one-sign mesh is upgraded to a strict verdict by the monotone-envelope
    criterion; when that fails the mesh is densified with further orbit
    points (far cheaper than fresh iterations: one long orbit refines every
    gap at once), and the few still-failing gaps get one x4 pointwise
    refinement before STRADDLES (undecided) is returned.
    """
    if q < 1 or gcd(p, q) != 1:
        raise ValueError("need a reduced fraction with positive denominator")
    with working_precision(m.precision):
        if orbit is None:
            orbit = _LiftOrbit(m)
        factor = 2 if q > 1 else 4
        orbit.ensure((factor + 1) * q)
        if orbit.locked is not None:
            # mode-locked at an exactly known rational: pure integer arithmetic
            rho = orbit.locked
            target = Fraction(p, q)
            if rho < target:
                return Comparison.LESS
            if rho > target:
                return Comparison.GREATER
            return Comparison.STRADDLES
        positions, lifts = orbit.positions, orbit.lifts

        while True:
            mesh: dict[mpf, mpf] = {}
            for j in range(factor * q + 1):
                mesh.setdefault(positions[j], lifts[j + q] - lifts[j] - p)
            if m.flat_length > 0:
                flat_val = lifts[q - 1]    # F^q on the flat closure = F^{q-1}(omega)
                mesh.setdefault(mpf(0), flat_val - p)
                mesh.setdefault(m.flat_length, flat_val - m.flat_length - p)

            values = mesh.values()
            has_pos = any(g > 0 for g in values)
            has_neg = any(g < 0 for g in values)
            if (has_pos and has_neg) or any(g == 0 for g in mesh.values()):
                return Comparison.STRADDLES

            positive = has_pos
            points = _sorted_mesh(mesh)
            bad = _certify(points, positive)
            if not bad:
                return Comparison.GREATER if positive else Comparison.LESS
            if factor < max_mesh_factor:
                factor *= 2
                orbit.ensure((factor + 1) * q)
                if orbit.locked is not None:
                    rho = orbit.locked
                    target = Fraction(p, q)
                    if rho == target:
                        return Comparison.STRADDLES
                    return Comparison.LESS if rho < target else Comparison.GREATER
                continue

            if len(bad) > 64:
                # certification failed across the board: g is genuinely tiny on a
                # large region (plateau edge); pointwise refinement cannot turn
                # that around, so report undecided instead of burning O(q) per point
                return Comparison.STRADDLES
            extra: dict[mpf, mpf] = {}
            for i in bad:
                x0 = points[i][0]
                x1 = points[(i + 1) % len(points)][0] + (0 if i + 1 < len(points) else 1)
                for k in (1, 2, 3):
                    x = frac(x0 + (x1 - x0) * k / 4)
                    if x not in mesh:
                        extra[x] = _lift_iterate(m, x, q) - x - p
            mesh.update(extra)
            values = list(mesh.values())
            if any(g == 0 for g in values) or (any(g > 0 for g in values) and any(g < 0 for g in values)):
                return Comparison.STRADDLES
            points = _sorted_mesh(mesh)
            if _certify(points, positive):
                return Comparison.STRADDLES
            return Comparison.GREATER if positive else Comparison.LESS


def rotation_number(m: FlatMap, depth: int) -> tuple[ContinuedFraction, mpf]:
    """Partial quotients a_1..a_depth of rho(f) by semiconvergent bracketing.

    Walks the Stern-Brocot semiconvergents of the unknown rotation number;
    each quotient is pinned by certified comparisons, so the returned
    convergent bracket contains rho exactly.  Raises RationalRotationError
    when a comparison certifies (or cannot exclude) a rational value.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    quotients: list[int] = []
    orbit = _LiftOrbit(m)
    p_prev, q_prev = 1, 0     # c_{-1} = 1/0, above every rho in (0, 1)
    p_cur, q_cur = 0, 1       # c_0 = 0/1, below rho
    prev_above = True         # side of c_{k-2} while extracting a_k
    for _ in range(depth):
        j = 1
        while True:
            pj, qj = p_prev + j * p_cur, q_prev + j * q_cur
            r = compare_rho_rational(m, pj, qj, orbit=orbit)
            if r is Comparison.STRADDLES:
                raise RationalRotationError(
                    f"rotation number indistinguishable from {pj}/{qj} at {m.precision} bits")
            same_side = (r is Comparison.LESS) if prev_above else (r is Comparison.GREATER)
            if not same_side:
                break
            j += 1
            if j > MAX_PARTIAL_QUOTIENT:
                raise RationalRotationError(
                    f"partial quotient exceeds {MAX_PARTIAL_QUOTIENT}; "
                    "rotation number looks rational or of unbounded type")
        a = j - 1
        quotients.append(a)
        p_prev, p_cur = p_cur, a * p_cur + p_prev
        q_prev, q_cur = q_cur, a * q_cur + q_prev
        prev_above = not prev_above
    cf = ContinuedFraction.from_quotients(quotients)
    with working_precision(m.precision):
        estimate = mpf(p_cur) / q_cur
    return cf, estimate


def closest_return_times(m: FlatMap, horizon: int, x0=None) -> list[int]:
    """Times t <= horizon at which the orbit of x0 makes a new closest return.

    x0 defaults to the critical value (the first forward image of the flat
    interval), whose orbit underlies all partition objects.  For a tuned map
    these times coincide with the convergent denominators q_n.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    with working_precision(m.precision):
        base = frac(to_real(x0)) if x0 is not None else m.offset
        x = base
        best = None
        times = []
        for t in range(1, horizon + 1):
            x = m._forward_pos(x)
            d = circle_dist(x, base)
            if best is None or d < best:
                times.append(t)
                best = d
        return times


@dataclass(frozen=True)
class OrderIsoReport:
    count: int
    passed: bool
    first_mismatch: int | None   # index into the circular order where the orders differ
    detail: str = ""


def order_isomorphism_check(m: FlatMap, count: int, rho) -> OrderIsoReport:
    """Compare the circular order of the f-orbit of omega with a rigid rotation orbit."""
    if count < 3:
        raise ValueError("need at least three points to compare circular order")
    with working_precision(m.precision):
        rho = to_real(rho)
        pts_f = []
        x = m.offset
        for _ in range(count):
            pts_f.append(x)
            x = m._forward_pos(x)
        pts_r = [frac(i * rho) for i in range(count)]

        def circular_order(pts):
            order = sorted(range(len(pts)), key=lambda i: pts[i])
            start = order.index(0)
            return order[start:] + order[:start]

        if len(set(pts_f)) < count:
            return OrderIsoReport(count=count, passed=False, first_mismatch=0,
                                  detail="orbit points collide (rotation number rational?)")
        of, orr = circular_order(pts_f), circular_order(pts_r)
        for k, (i, j) in enumerate(zip(of, orr)):
            if i != j:
                return OrderIsoReport(
                    count=count, passed=False, first_mismatch=k,
                    detail=f"cyclic slot {k}: orbit index {i} vs rotation index {j}")
        return OrderIsoReport(count=count, passed=True, first_mismatch=None)


# -- tuning -------------------------------------------------------------------


@dataclass(frozen=True)
class TuneResult:
    map: FlatMap
    target: RotationTarget
    certified_depth: int
    cf: ContinuedFraction          # certified prefix (= target prefix)
    iterations: int
    bracket_width: mpf

    @property
    def omega(self) -> mpf:
        return self.map.offset


def _classify_against(m: FlatMap, convergents: list[tuple[int, int]]) -> tuple[str | None, int]:
    """Side of rho(m) relative to the target, or None if certified through all convergents.

    convergents[k-1] = (p_k, q_k); odd k lie above the target, even k below.
    Returns (side, depth_reached) with side in {"below", "above", None}.
    """
    orbit = _LiftOrbit(m)
    for k, (p, q) in enumerate(convergents, start=1):
        above_target = (k % 2 == 1)
        want = Comparison.LESS if above_target else Comparison.GREATER
        r = compare_rho_rational(m, p, q, orbit=orbit)
        if r is want:
            continue
        # r is STRADDLES (rho = c_k) or the strict opposite: rho sits on the
        # far side of this convergent, hence on that side of the target.
        return ("above" if above_target else "below"), k - 1
    return None, len(convergents)


def tune_offset(u, l, target: RotationTarget, tol_bits: int | None = None,
                depth: int = 12, precision: int = 512) -> TuneResult:
    """Bisect the offset until the rotation number certifies `depth` target quotients.

    The family is monotone in the offset, so a dyadic bisection bracketing
    the target rotation number converges; each midpoint is classified against
    successive target convergents.  Accepting requires agreement through
    convergent depth+1, which pins the first `depth` partial quotients.
    Raises TuneSeparationError if the bracket drops below 2^-tol_bits first.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if tol_bits is None:
        tol_bits = precision - 32
    cf = target.cf(depth + 1)
    convergents = [(cf.p(k), cf.q(k)) for k in range(1, depth + 2)]
    with working_precision(precision):
        lo, hi = mpf(0), mpf(1)
        tol = mpf(2) ** (-tol_bits)
        iterations = 0
        while True:
            mid = (lo + hi) / 2
            iterations += 1
            candidate = FlatMap.create(u, l, mid, precision)
            side, reached = _classify_against(candidate, convergents)
            if side is None:
                return TuneResult(map=candidate, target=target, certified_depth=depth,
                                  cf=target.cf(depth), iterations=iterations,
                                  bracket_width=hi - lo)
            if side == "below":
                lo = mid
            else:
                hi = mid
            if not lo < hi:
                raise TuneSeparationError("offset bracket inverted (non-monotone bracketing)")
            if hi - lo < tol:
                raise TuneSeparationError(
                    f"bracket below 2^-{tol_bits} after {iterations} steps "
                    f"with only {reached} certified quotients (of {depth} requested); "
                    "raise tol_bits/precision or lower the depth")
