import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mpf

from flatspot.geometry import (CircleArc, CirclePoint, circle_dist, dist_arc_arc,
                               dist_point_arc, frac, working_precision)

positions = st.floats(min_value=0.0, max_value=0.999999, allow_nan=False)


EPS = mpf(2) ** -110


def test_circle_dist_examples():
    with working_precision(128):
        assert abs(circle_dist(CirclePoint("0.1"), CirclePoint("0.9")) - mpf("0.2")) < EPS
        assert circle_dist(CirclePoint("0.37"), CirclePoint("0.37")) == 0
        assert circle_dist(CirclePoint("0.25"), CirclePoint("0.5")) == mpf("0.25")


def test_point_normalization():
    with working_precision(128):
        assert CirclePoint("1.25").position == mpf("0.25")
        assert CirclePoint("-0.25").position == mpf("0.75")
        assert CirclePoint("3").position == 0


@settings(max_examples=200, deadline=None)
@given(positions, positions, positions)
def test_triangle_inequality(a, b, c):
    with working_precision(96):
        pa, pb, pc = CirclePoint(a), CirclePoint(b), CirclePoint(c)
        assert circle_dist(pa, pc) <= circle_dist(pa, pb) + circle_dist(pb, pc) + mpf(2) ** -80


@settings(max_examples=200, deadline=None)
@given(positions)
def test_dist_symmetric_and_bounded(x):
    with working_precision(96):
        p, q = CirclePoint(x), CirclePoint(frac(mpf(x) + mpf("0.3")))
        d = circle_dist(p, q)
        assert d == circle_dist(q, p)
        assert 0 <= d <= mpf("0.5")


def test_point_arc_distances():
    with working_precision(128):
        arc = CircleArc("0.1", "0.1")    # [0.1, 0.2]
        assert abs(dist_point_arc("0.5", arc, "near") - mpf("0.3")) < EPS
        assert abs(dist_point_arc("0.5", arc, "far") - mpf("0.4")) < EPS
        assert abs(dist_point_arc("0.05", arc, "near") - mpf("0.05")) < EPS
        # far = near + |A| by construction (equality up to one rounding)
        assert abs(dist_point_arc("0.7", arc, "far")
                   - dist_point_arc("0.7", arc, "near") - arc.length) < EPS


def test_point_inside_arc_rejected():
    with working_precision(128):
        arc = CircleArc("0.1", "0.1")
        with pytest.raises(ValueError):
            dist_point_arc("0.15", arc)
        # endpoints are allowed (distance 0)
        assert dist_point_arc("0.1", arc, "near") == 0
        assert dist_point_arc("0.2", arc, "near") == 0


def test_arc_arc_modes():
    with working_precision(128):
        a = CircleArc("0.1", "0.1")
        b = CircleArc("0.3", "0.1")
        assert abs(dist_arc_arc(a, b, "open_open") - mpf("0.1")) < EPS
        assert abs(dist_arc_arc(a, b, "closed_open") - mpf("0.2")) < EPS
        assert abs(dist_arc_arc(a, b, "open_closed") - mpf("0.2")) < EPS
        assert abs(dist_arc_arc(a, b, "closed_closed") - mpf("0.3")) < EPS


def test_arc_arc_wraparound_takes_shorter_gap():
    with working_precision(128):
        a = CircleArc("0.9", "0.05")     # [0.9, 0.95]
        b = CircleArc("0.05", "0.1")     # [0.05, 0.15]
        assert abs(dist_arc_arc(a, b, "open_open") - mpf("0.1")) < EPS


def test_overlapping_arcs_rejected():
    with working_precision(128):
        a = CircleArc("0.125", "0.125")
        b = CircleArc("0.25", "0.25")    # touching is fine (dyadic endpoints)
        assert dist_arc_arc(a, b, "open_open") == 0
        c = CircleArc("0.15", "0.1")
        with pytest.raises(ValueError):
            dist_arc_arc(a, c)


@settings(max_examples=200, deadline=None)
@given(positions, st.floats(min_value=0.01, max_value=0.2),
       st.floats(min_value=0.25, max_value=0.45),
       st.floats(min_value=0.01, max_value=0.2))
def test_closed_closed_identity(left, len_a, gap, len_b):
    with working_precision(96):
        a = CircleArc(left, len_a)
        b = CircleArc(frac(a.right + mpf(gap)), len_b)
        assert dist_arc_arc(a, b, "closed_closed") - dist_arc_arc(a, b, "open_open") \
            == a.length + b.length


def test_arc_length_validation():
    with pytest.raises(ValueError):
        CircleArc("0.1", "0")
    with pytest.raises(ValueError):
        CircleArc("0.1", "1.0")
