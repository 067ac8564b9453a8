import pytest
from mpmath import mpf

from flatspot.flatmap import FlatMap
from flatspot.geometry import frac, working_precision
from flatspot.partition import (OrbitEntersFlatError, backward_arcs, build_partition,
                                forward_orbit, gap_statistics, pullback_consistency,
                                refine_check, two_level_gap_split_counts)
from flatspot.rotation import RotationTarget

P = 512


def test_forward_orbit_basics(golden_l3):
    m = golden_l3.map
    orbit = forward_orbit(m, 1)
    assert orbit.positions == (m.offset,)
    assert orbit.point(1) == m.offset
    with pytest.raises(IndexError):
        orbit.point(2)


def test_forward_orbit_rigid_progression():
    with working_precision(P):
        m = FlatMap.create("0", "1", "0.375", P)   # dyadic: exact arithmetic progression
        orbit = forward_orbit(m, 10)
        for i in range(10):
            assert orbit.positions[i] == frac(mpf("0.375") * (i + 1))


def test_forward_orbit_avoids_flat_for_tuned_map(golden_l3):
    orbit = forward_orbit(golden_l3.map, 1000)
    u = golden_l3.map.flat_length
    assert all(x > u for x in orbit.positions)


def test_forward_orbit_flat_entry_fatal():
    with working_precision(P):
        # omega deep inside a locking plateau: the orbit falls into the flat interval
        m = FlatMap.create("0.3", "2", "0.52", P)
        with pytest.raises(OrbitEntersFlatError):
            forward_orbit(m, 500)


def test_backward_arcs_round_trip(golden_l3):
    m = golden_l3.map
    pre = golden_l3.preimages
    assert pre.arc(0).left == 0 and pre.arc(0).length == m.flat_length
    with working_precision(P):
        tol = mpf(2) ** -(P - 16)
        arc1 = pre.arc(1)
        left_img = frac(m.lift(arc1.left))
        right_img = frac(m.lift(arc1.right))
        # f(arc 1) = flat interval [0, u]
        assert min(left_img, 1 - left_img) < tol
        assert abs(right_img - m.flat_length) < tol


def test_backward_arcs_total_mass_below_one(golden_l3):
    with working_precision(P):
        total = sum((a.length for a in golden_l3.preimages.arcs), mpf(0))
        assert total < 1


def test_partition_counts_golden(golden_l3):
    p5 = golden_l3.partitions[5]
    assert len(p5.arcs) == 21              # q_6 + q_5 = 13 + 8
    assert len(p5.long_gaps) == 13
    assert len(p5.short_gaps) == 8
    for n, part in golden_l3.partitions.items():
        assert len(part.long_gaps) == golden_l3.cf.q(n + 1)
        assert len(part.short_gaps) == golden_l3.cf.q(n)


def test_partition_counts_silver(silver_l3):
    for n, part in silver_l3.partitions.items():
        assert len(part.long_gaps) == silver_l3.cf.q(n + 1)
        assert len(part.short_gaps) == silver_l3.cf.q(n)


def test_tiling_within_tolerance(golden_l3):
    tol = mpf(2) ** -(P - 32)
    for part in golden_l3.partitions.values():
        assert part.tiling_defect <= tol


def test_alternating_cycle_structure(golden_l3):
    part = golden_l3.partitions[7]
    kinds = [kind for kind, _ in part.cycle]
    assert len(kinds) == 2 * len(part.arcs)
    assert all(kinds[i] == "arc" for i in range(0, len(kinds), 2))
    assert all(kinds[i] != "arc" for i in range(1, len(kinds), 2))


def test_refine_check_golden_splits(golden_l3):
    m = golden_l3.map
    for n in range(1, 10):
        rep = refine_check(m, golden_l3.partitions[n], golden_l3.partitions[n + 1])
        assert set(rep.split_counts) == {(1, 1, 1)}     # a_{n+2} = 1 for golden
        assert rep.shorts_become_longs
        assert rep.max_split == 3


def test_refine_check_silver_splits(silver_l3):
    m = silver_l3.map
    rep = refine_check(m, silver_l3.partitions[3], silver_l3.partitions[4])
    assert set(rep.split_counts) == {(2, 2, 1)}         # a_{n+2} = 2 for silver
    assert rep.max_split == 5


def test_two_level_split_bound(golden_l3):
    cf = golden_l3.cf
    for n in (6, 8, 10):
        counts = two_level_gap_split_counts(golden_l3.partitions[n - 2],
                                            golden_l3.partitions[n])
        bound = cf.a(n) * (cf.a(n + 1) + 1) + 1
        assert max(counts) <= bound
        assert set(counts) <= {2, 3}                    # golden: 2 or 3 sub-gaps


def test_pullback_consistency(golden_l3):
    with working_precision(P):
        worst = pullback_consistency(golden_l3.map, golden_l3.partitions[8])
        assert worst <= mpf(2) ** -(P - 32)


def test_gap_statistics_trends(golden_l3):
    stats = {n: gap_statistics(golden_l3.partitions[n], precision=P)
             for n in range(2, 11)}
    max_gaps = [float(stats[n].max_gap) for n in range(2, 11)]
    assert all(max_gaps[i + 1] < max_gaps[i] for i in range(len(max_gaps) - 1))
    assert all(float(stats[n].min_adjacent_arc_to_gap) > 0 for n in stats)
    # exponential decay: max-gap(n) fits C lambda^n with lambda < 1
    from flatspot.fitting import decay_rate_fit
    lam, fit = decay_rate_fit(range(2, 11), max_gaps)
    assert lam < 1
    assert fit.r_squared > 0.9


def test_three_distance_sanity_family():
    """Almost-rigid map (l = 1, tiny flat interval): gap lengths cluster into
    at most three values, as for rotation orbits."""
    with working_precision(P):
        u = mpf(2) ** -20
        target = RotationTarget.golden()
        from flatspot.rotation import tune_offset
        res = tune_offset(u, "1", target, depth=10, precision=P)
        cf = target.cf(8)
        pre = backward_arcs(res.map, cf.q(7) + cf.q(6) - 1)
        part = build_partition(res.map, cf, 6, pre)
        lengths = sorted(float(g.length) for g in part.gaps)
        clusters = 1
        for a, b in zip(lengths, lengths[1:]):
            if b - a > 50 * float(u):
                clusters += 1
        assert clusters <= 3
