import pytest
from mpmath import mpf

from flatspot.flatmap import FlatMap
from flatspot.geometry import working_precision
from flatspot.scalings import (SigmaTable, alpha_recursion_check,
                               comparability_report, compute_scalings,
                               cross_ratio_expansion_check, disjointness_sum_check,
                               koebe_triples_check, elementary_power_bound, poin)

P = 512


def test_poin_examples():
    with working_precision(128):
        assert poin(0, 1, 2, 3) == mpf(3) / 4
        assert poin(0, 1, 1, 3) == 0                     # b = c degenerate
        a, b, c, d = mpf("0.1"), mpf("0.4"), mpf("0.7"), mpf("0.9")
        before = poin(a, b, c, d)
        after = poin(2 * a + 5, 2 * b + 5, 2 * c + 5, 2 * d + 5)
        assert abs(before - after) < mpf(2) ** -100     # affine invariance
    with pytest.raises(ValueError):
        poin(0, 2, 1, 3)


def test_scaling_series_values(golden_l3):
    series = golden_l3.series
    # alpha_n > tau_n at every computed level for the default-u bounded run
    for n in series.tau:
        assert series.alpha_gt_tau(n)
    # tau = sigma_n sigma_{n-1} within tolerance (definition chaining)
    with working_precision(P):
        for n in series.tau:
            assert abs(series.tau[n] - series.sigma[n] * series.sigma[n - 1]) \
                < mpf(2) ** -(P - 32)
    # bounded geometry: tau stays well away from zero
    assert min(float(series.tau[n]) for n in range(4, 11)) > 0.3


def test_degenerate_tau_decay(golden_l2_recursion):
    series = golden_l2_recursion.series
    taus = {n: float(series.tau[n]) for n in series.tau}
    assert all(taus[n] / taus[n - 2] < 1 for n in range(6, 11))


def test_cross_ratio_expansion_l1_is_neutral():
    with working_precision(256):
        m = FlatMap.create("0.1", "1", "0.61", 256)
        rep = cross_ratio_expansion_check(m, 200, seed=3)
        assert rep.violations == 0
        assert abs(rep.min_factor - 1) < mpf(2) ** -200
        assert abs(rep.max_factor - 1) < mpf(2) ** -200


def test_cross_ratio_expansion_strict_for_l2(golden_l3):
    rep = cross_ratio_expansion_check(golden_l3.map, 1000, seed=5)
    assert rep.violations == 0
    assert rep.min_factor > 1


def test_cross_ratio_nested_quadruple_strict():
    with working_precision(256):
        m = FlatMap.create("0.05", "2", "0.63", 256)
        u = m.flat_length
        xs = [u + (1 - u) * mpf(t) for t in ("0.2", "0.49", "0.51", "0.8")]
        ys = [m.lift(x) for x in xs]
        assert poin(*ys) > poin(*xs)


def test_cross_ratio_deterministic_in_seed(golden_l3):
    r1 = cross_ratio_expansion_check(golden_l3.map, 100, seed=42)
    r2 = cross_ratio_expansion_check(golden_l3.map, 100, seed=42)
    assert r1.min_factor == r2.min_factor
    r3 = cross_ratio_expansion_check(golden_l3.map, 100, seed=43)
    assert r3.min_factor != r1.min_factor


def test_power_bound_boundary_case():
    with working_precision(128):
        lhs, rhs = elementary_power_bound(mpf(1), mpf(0), mpf(2))
        assert lhs == 1 and rhs == 1
        # identity at l = 2 for any pair
        lhs, rhs = elementary_power_bound(mpf("0.7"), mpf("0.2"), mpf(2))
        assert abs(lhs - rhs) < mpf(2) ** -100
        # genuinely reversed for l in (1, 2)
        lhs, rhs = elementary_power_bound(mpf(1), mpf("0.9"), mpf("1.5"))
        assert lhs < rhs


def test_recursion_check_l2(golden_l2_recursion):
    b = golden_l2_recursion
    checks = alpha_recursion_check(b.map, b.cf, b.orbit, b.preimages, b.series)
    assert [c.level for c in checks] == list(range(6, 11))
    for c in checks:
        assert c.passed, f"level {c.level}: {float(c.lhs)} vs {float(c.rhs)}"
        assert c.x_ok and float(c.x_apriori) <= 0.55
        assert c.t_factor == 1                       # C_n = 1 collapses T_n(l)
        assert c.t_ok
        assert c.power_bound_ok
        assert c.first_link_ok
        assert 0 < float(c.mu) < 1
        assert all(float(d) > 0 for d in c.delta)
        assert all(float(s) > 1 for s in c.s_k)
        assert float(c.nu) > 0


def test_recursion_with_zero_sigma_table_matches_default(golden_l2_recursion):
    b = golden_l2_recursion
    base = alpha_recursion_check(b.map, b.cf, b.orbit, b.preimages, b.series,
                                    levels=[8])
    with working_precision(P):
        table = SigmaTable(grid=((mpf(1), mpf(0)),))     # sigma identically 0
    cons = alpha_recursion_check(b.map, b.cf, b.orbit, b.preimages, b.series,
                                    levels=[8], sigma_table=table)
    assert base[0].rhs == cons[0].rhs
    assert cons[0].k_constants == (mpf(1),) * len(cons[0].k_constants)
    assert cons[0].c_constant == 1


def test_recursion_positive_sigma_table_weakens_bound(golden_l2_recursion):
    b = golden_l2_recursion
    with working_precision(P):
        table = SigmaTable(grid=((mpf("0.01"), mpf("0.5")), (mpf(1), mpf("1.0"))))
    cons = alpha_recursion_check(b.map, b.cf, b.orbit, b.preimages, b.series,
                                    levels=[8], sigma_table=table)
    base = alpha_recursion_check(b.map, b.cf, b.orbit, b.preimages, b.series,
                                    levels=[8])
    assert cons[0].c_constant > 1
    assert all(k >= 1 for k in cons[0].k_constants)
    assert cons[0].rhs > base[0].rhs                  # conservative mode only inflates


def test_disjointness_sums(golden_l2_recursion):
    b = golden_l2_recursion
    rep = disjointness_sum_check(b.map, b.cf, b.orbit, b.preimages, b.partitions)
    assert rep.overlaps == 0
    assert all(r.containment_ok for r in rep.rows)
    assert rep.lambda_hat < 1
    assert rep.fit.points >= 5


def test_disjointness_sums_l3(golden_l3):
    b = golden_l3
    rep = disjointness_sum_check(b.map, b.cf, b.orbit, b.preimages, b.partitions)
    assert rep.overlaps == 0
    assert all(r.containment_ok for r in rep.rows)


def test_comparability_bands_l3(golden_l3):
    b = golden_l3
    rep = comparability_report(b.map, b.cf, b.orbit, b.preimages, b.partitions, b.series)
    rows = [r for r in rep.rows if r.level >= 4]
    # adjacent gaps comparable: floor locked from the pilot (observed min 0.218)
    assert min(float(r.adjacent_min) for r in rows) >= 0.15
    assert max(float(r.adjacent_max) for r in rows) <= 8
    # the two gaps at the flat interval stay in a fixed band (observed 1.25..1.38)
    assert all(0.5 <= float(r.flat_sides_ratio) <= 3 for r in rows)
    # the arc-over-span ratios bounded away from zero
    assert min(float(r.arc_over_span_min) for r in rows) > 0.01
    # omega_i / alpha_{n-1} band (observed 2.6..9.3, slowly settling)
    for r in rows:
        assert all(0.5 <= float(v) <= 12 for v in r.return_gap_over_alpha)


def test_comparability_help_ratio_recorded_for_l2(golden_l2_recursion):
    rep = comparability_report(golden_l2_recursion.map, golden_l2_recursion.cf,
                               golden_l2_recursion.orbit, golden_l2_recursion.preimages,
                               golden_l2_recursion.partitions, golden_l2_recursion.series)
    ratios = [float(r.flat_sides_ratio) for r in rep.rows if r.level >= 4]
    # recorded only: the degenerate side drifts (no direction asserted)
    assert all(v > 0 for v in ratios)


def test_koebe_triples(golden_l3):
    b = golden_l3
    rep = koebe_triples_check(b.map, b.cf, b.preimages, levels=range(4, 11))
    assert rep.ok
    assert float(rep.c_hat) > 0.05          # pilot: 0.318
    assert len(rep.triples) >= 10


def test_scalings_strict_flag():
    from flatspot.rotation import RotationTarget, tune_offset
    from flatspot.partition import backward_arcs, forward_orbit
    target = RotationTarget.golden()
    res = tune_offset("0.2", "2", target, depth=12, precision=256)
    cf = target.cf(10)
    orbit = forward_orbit(res.map, cf.q(9))
    pre = backward_arcs(res.map, cf.q(9) + cf.q(8) - 1)
    with pytest.raises(AssertionError):
        compute_scalings(res.map, cf, orbit, pre, 8, strict_alpha_tau=True)
    series = compute_scalings(res.map, cf, orbit, pre, 8, strict_alpha_tau=False)
    assert not all(series.alpha_gt_tau(n) for n in series.tau)
