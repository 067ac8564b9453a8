import pytest
from fractions import Fraction
from mpmath import mp, mpf

from flatspot.dimension import (build_mass_measure, cherry_quasiminimal_dimension,
                                cover_exponent, cover_exponent_from_lengths,
                                frostman_exponent, frostman_exponent_from_pairs,
                                gap_split_check, transition_verdict)
from flatspot.geometry import working_precision

P = 512

LOG23 = float(mp.log(2) / mp.log(3))


def test_cover_exponent_closed_form():
    ce = cover_exponent_from_lengths(["0.25", "0.25"])
    assert abs(float(ce.s_star) - 0.5) < 1e-10


def test_cover_exponent_cantor_benchmark():
    with working_precision(256):
        for k in (4, 7):
            ce = cover_exponent_from_lengths([mpf(3) ** -k] * (2 ** k))
            assert abs(float(ce.s_star) - LOG23) < 0.01
            assert abs(float(ce.s_star) - LOG23) < 1e-9     # bisection is much tighter


def test_cover_probe_sums_decreasing():
    ce = cover_exponent_from_lengths(["0.1", "0.2", "0.05", "0.3"])
    sums = [v for _, v in ce.probe_sums]
    assert all(sums[i + 1] < sums[i] for i in range(len(sums) - 1))


def test_cover_exponent_decreasing_for_degenerate_run(golden_l15_cover):
    b = golden_l15_cover
    ss = {n: float(cover_exponent(b.partitions[n], precision=P).s_star)
          for n in range(4, 11)}
    assert all(ss[n] < ss[n - 1] for n in range(5, 11))
    assert ss[10] < ss[4] / 2


def test_gap_split_check(golden_l15_cover):
    b = golden_l15_cover
    ratios = []
    for n in (6, 8, 10):
        rep = gap_split_check(b.partitions[n - 2], b.partitions[n], b.series,
                               precision=P)
        assert rep.min_subgaps >= 2
        ratios.append(float(rep.ratio_over_alpha))
    # max |child|/|parent| tracks alpha_{n-1} with a level-free constant
    assert max(ratios) / min(ratios) < 3


def test_mass_measure_conservation_golden(golden_l3):
    b = golden_l3
    measure = build_mass_measure(b.partitions, b.cf, 10)
    for n in range(1, 11):
        assert measure.level_total(n) == 1               # exact rational arithmetic
    assert measure.generation_bound_ok()                 # mu <= 2^(-gen/2)
    # level 1 golden: three gaps of mass 1/3
    assert measure.longs[1] == [Fraction(1, 3)] * 2
    assert measure.shorts[1] == [Fraction(1, 3)]


def test_mass_measure_silver_quarters(silver_l3):
    b = silver_l3
    measure = build_mass_measure(b.partitions, b.cf, 6)
    # a_{n+2} = 2: each long child carries parent/4
    parent = measure.longs[3][0]
    children = [measure.longs[4][i] for i in range(len(measure.longs[4]))
                if measure.provenance[4][i] == f"split 1/(2*2) of long 0 of level 3"]
    assert children and all(c == parent / 4 for c in children)
    for n in range(1, 7):
        assert measure.level_total(n) == 1


def test_frostman_cantor_benchmark():
    pairs = [(Fraction(1, 2 ** 6), mpf(3) ** -6)] * 4
    a = frostman_exponent_from_pairs(pairs, precision=256)
    assert abs(float(a) - LOG23) < 0.01


def test_frostman_exponent_golden_l3(golden_l3):
    b = golden_l3
    measure = build_mass_measure(b.partitions, b.cf, 10)
    rep = frostman_exponent(measure, b.partitions, seed=11, precision=P)
    assert float(rep.alpha_hat) > 0
    assert rep.c_hat > 0
    # stability: same construction truncated at n_max = 8
    parts8 = {n: b.partitions[n] for n in range(1, 9)}
    measure8 = build_mass_measure(parts8, b.cf, 8)
    rep8 = frostman_exponent(measure8, parts8, seed=11, precision=P)
    a10, a8 = float(rep.alpha_hat), float(rep8.alpha_hat)
    assert abs(a10 - a8) / a10 < 0.2
    # sandwich against the cover exponent
    s_star = cover_exponent(b.partitions[10], precision=P).s_star
    assert rep.alpha_hat <= s_star + mpf("0.05")


def test_mass_measure_matches_refinement_structure(golden_l3):
    b = golden_l3
    with pytest.raises(ValueError):
        build_mass_measure({n: b.partitions[n] for n in (1, 2, 4)}, b.cf, 4)


def test_transition_verdicts(golden_l3, golden_l15_cover):
    assert transition_verdict(golden_l3.series).verdict == "bounded"
    v = transition_verdict(golden_l15_cover.series)
    assert v.verdict == "degenerate"
    assert v.slope < 0 and v.confident


def test_cherry_corollary():
    rep = cherry_quasiminimal_dimension("3", "0.61")
    assert rep.eigenvalue_condition
    assert float(rep.hd_lower_bound) == pytest.approx(1.61)
    # hypothesis boundary: accepted just above 2, rejected at 2
    assert cherry_quasiminimal_dimension("2.01", "0.1").exponent == 2.01
    with pytest.raises(ValueError):
        cherry_quasiminimal_dimension("2", "0.5")
    with pytest.raises(ValueError):
        cherry_quasiminimal_dimension("3", "0")
