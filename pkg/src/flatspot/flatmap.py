"""The canonical symmetric family of degree-one circle maps with a flat interval.

The flat interval is U = (0, u); every point of its closure maps to the
single point ``offset``.  On the complementary arc the map is

    f(x) = offset + phi((x - u)/(1 - u))   (mod 1),

with the boundary profile phi(t) = t^l / (t^l + (1-t)^l).  This profile is
a Moebius-power-Moebius composition, so it has a closed-form inverse and a
strictly negative Schwarzian derivative for l > 1, which keeps every
cross-ratio distortion constant of the analysis equal to 1.

l = 1 (an affine profile; with u = 0, a rigid rotation) is allowed as a
sanity family; l < 1 is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass

from mpmath import mp, mpf

from .geometry import CircleArc, CirclePoint, frac, to_real, working_precision

DEFAULT_PRECISION_BITS = 512


def phi_eval(t: mpf, l: mpf) -> mpf:
    """Boundary profile phi(t) = t^l / (t^l + (1-t)^l) on [0, 1]."""
    if t < 0 or t > 1:
        raise ValueError("phi argument must lie in [0, 1]")
    if l < 1:
        raise ValueError("exponent must be >= 1")
    if l == 1:
        return +t                 # affine profile; avoids two transcendental pows
    if t == 0:
        return mpf(0)
    if t == 1:
        return mpf(1)
    a = t ** l
    b = (1 - t) ** l
    return a / (a + b)


def phi_inverse(y: mpf, l: mpf) -> mpf:
    """Inverse of the boundary profile: t = s/(1+s) with s = (y/(1-y))^(1/l)."""
    if y < 0 or y > 1:
        raise ValueError("phi_inverse argument must lie in [0, 1]")
    if l < 1:
        raise ValueError("exponent must be >= 1")
    if y == 0:
        return mpf(0)
    if y == 1:
        return mpf(1)
    s = (y / (1 - y)) ** (1 / l)
    return s / (1 + s)


def phi_prime(t: mpf, l: mpf) -> mpf:
    """phi'(t) = l t^(l-1) (1-t)^(l-1) / (t^l + (1-t)^l)^2 on (0, 1)."""
    if not (0 < t < 1):
        raise ValueError("phi_prime argument must lie in (0, 1)")
    num = l * t ** (l - 1) * (1 - t) ** (l - 1)
    den = (t ** l + (1 - t) ** l) ** 2
    return num / den


def phi_schwarzian(t: mpf, l: mpf) -> mpf:
    """Schwarzian derivative of phi: (1 - l^2) / (2 t^2 (1-t)^2).

    phi is Moebius o (s -> s^l) o Moebius, and Moebius maps have zero
    Schwarzian, so only the power contributes (composition rule).
    """
    if not (0 < t < 1):
        raise ValueError("phi_schwarzian argument must lie in (0, 1)")
    return (1 - l ** 2) / (2 * t ** 2 * (1 - t) ** 2)


@dataclass(frozen=True)
class FlatMap:
    """Parameters (u, l, omega) of the canonical family plus the working precision."""

    flat_length: mpf          # u, length of the flat interval (0, u); 0 allowed as sanity case
    exponent: mpf             # l >= 1; l > 1 is the dissipative case under study
    offset: mpf               # omega = f(U), in [0, 1)
    precision: int = DEFAULT_PRECISION_BITS

    @classmethod
    def create(cls, u, l, omega, precision: int = DEFAULT_PRECISION_BITS) -> "FlatMap":
        with working_precision(precision):
            u = to_real(u)
            l = to_real(l)
            om = frac(to_real(omega))
        if not (0 <= u < 1):
            raise ValueError("flat length must lie in [0, 1)")
        if l < 1:
            raise ValueError("exponent < 1 (non-dissipative case) is out of scope")
        return cls(flat_length=u, exponent=l, offset=om, precision=precision)

    @property
    def flat_interval(self) -> CircleArc:
        if self.flat_length == 0:
            raise ValueError("the sanity family with u = 0 has no flat interval")
        return CircleArc(mpf(0), self.flat_length)

    def in_flat_closure(self, x) -> bool:
        """Whether a position lies in the closed flat interval [0, u]."""
        pos = frac(to_real(x))
        return pos <= self.flat_length

    # -- evaluation ---------------------------------------------------------

    def _forward_pos(self, x: mpf) -> mpf:
        """One step on circle positions; caller must hold the working precision."""
        u = self.flat_length
        if x <= u:
            return self.offset
        t = (x - u) / (1 - u)
        v = self.offset + phi_eval(t, self.exponent)
        return v if v < 1 else v - 1

    def forward(self, p: CirclePoint) -> CirclePoint:
        with working_precision(self.precision):
            return CirclePoint(self._forward_pos(p.position))

    def _forward_wrapped(self, x: mpf) -> tuple[mpf, bool]:
        """One step plus whether the lift crossed an integer (f(x) < omega)."""
        v = self._forward_pos(x)
        return v, v < self.offset

    def lift(self, x) -> mpf:
        """Monotone lift F with F(x+1) = F(x) + 1 and F(x) in [omega, omega+1) on [0,1)."""
        with working_precision(self.precision):
            x = to_real(x)
            k = mp.floor(x)
            r = x - k
            u = self.flat_length
            if r <= u:
                return k + self.offset
            return k + self.offset + phi_eval((r - u) / (1 - u), self.exponent)

    def orbit_lifted(self, x0, steps: int) -> tuple[list[mpf], list[int]]:
        """Circle positions and cumulative winding numbers of the first `steps` iterates.

        Returns (positions, windings) with positions[0] = x0 and the lift of
        the j-th iterate from base x0 equal to positions[j] + windings[j].
        """
        with working_precision(self.precision):
            x = frac(to_real(x0))
            positions = [x]
            windings = [0]
            w = 0
            for _ in range(steps):
                x, wrapped = self._forward_wrapped(x)
                if wrapped:
                    w += 1
                positions.append(x)
                windings.append(w)
        return positions, windings

    # -- inverse branch -----------------------------------------------------

    def _inverse_t(self, rel: mpf) -> mpf:
        return phi_inverse(rel, self.exponent)

    def map_inverse_arc(self, arc: CircleArc) -> CircleArc:
        """The unique arc B in the closure of (u, 1) with f(B) = arc.

        Requires omega outside the interior of the arc (otherwise the
        preimage would include the flat interval; the partition algorithm
        never asks for that).
        """
        with working_precision(self.precision):
            u = self.flat_length
            if u == 0:
                raise ValueError("preimage arcs are undefined for the u = 0 sanity family")
            rel_left = frac(arc.left - self.offset)
            rel_right = rel_left + arc.length
            if rel_right > 1:
                raise ValueError("offset lies inside the arc; its preimage meets the flat interval")
            t_left = self._inverse_t(rel_left)
            t_right = self._inverse_t(rel_right)
            left = frac(u + (1 - u) * t_left)
            length = (1 - u) * (t_right - t_left)
            return CircleArc(left, length)

    # -- derivatives --------------------------------------------------------

    def _branch_t(self, x) -> mpf:
        pos = frac(to_real(x))
        u = self.flat_length
        if pos <= u:
            raise ValueError("derivative undefined on the closed flat interval")
        return (pos - u) / (1 - u)

    def derivative(self, x) -> mpf:
        """f'(x) > 0 on the smooth branch; tends to 0 at the flat boundary for l > 1."""
        with working_precision(self.precision):
            t = self._branch_t(x)
            return phi_prime(t, self.exponent) / (1 - self.flat_length)

    def schwarzian(self, x) -> mpf:
        """Schwarzian derivative of the smooth branch at x (affine rescaling of S phi)."""
        with working_precision(self.precision):
            t = self._branch_t(x)
            return phi_schwarzian(t, self.exponent) / (1 - self.flat_length) ** 2


@dataclass(frozen=True)
class SchwarzianReport:
    samples: int
    min_value: mpf
    max_value: mpf
    violations: tuple[mpf, ...]   # sample positions with S f >= 0

    @property
    def all_negative(self) -> bool:
        return not self.violations


def schwarzian_sign_check(m: FlatMap, samples: int) -> SchwarzianReport:
    """Evaluate S f on an even grid of the smooth branch and collect any S f >= 0.

    For l > 1 any violation is a fatal inconsistency of the family; l = 1
    would give S f = 0 identically and is not a meaningful input here.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    with working_precision(m.precision):
        u = m.flat_length
        lo, hi = mpf(0), mpf(1)
        worst_min = None
        worst_max = None
        bad = []
        for k in range(samples):
            t = lo + (hi - lo) * (2 * k + 1) / (2 * samples)
            x = u + (1 - u) * t
            s = phi_schwarzian(t, m.exponent) / (1 - u) ** 2
            worst_min = s if worst_min is None else min(worst_min, s)
            worst_max = s if worst_max is None else max(worst_max, s)
            if s >= 0 and m.exponent > 1:
                bad.append(x)
        return SchwarzianReport(samples=samples, min_value=worst_min,
                                max_value=worst_max, violations=tuple(bad))
