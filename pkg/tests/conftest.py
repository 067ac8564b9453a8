"""Shared expensive fixtures: tuned maps with orbits, preimages and partitions.

Everything downstream of tuning is deterministic, so the bundles are built
once per session and shared read-only across test modules.
"""

from __future__ import annotations

from dataclasses import dataclass

import pytest

from flatspot.flatmap import FlatMap
from flatspot.partition import (DynamicalPartition, ForwardOrbit, PreimageSet,
                                backward_arcs, build_partition, forward_orbit)
from flatspot.rotation import ContinuedFraction, RotationTarget, tune_offset
from flatspot.scalings import ScalingSeries, compute_scalings


@dataclass(frozen=True)
class RunBundle:
    map: FlatMap
    cf: ContinuedFraction
    orbit: ForwardOrbit
    preimages: PreimageSet
    partitions: dict[int, DynamicalPartition]
    series: ScalingSeries
    n_max: int


def make_bundle(u: str, l: str, n_max: int = 10, precision: int = 512,
                depth: int = 14, target: RotationTarget | None = None,
                strict_alpha_tau: bool = False) -> RunBundle:
    target = target or RotationTarget.golden()
    result = tune_offset(u, l, target, depth=depth, precision=precision)
    m = result.map
    cf = target.cf(n_max + 2)
    orbit = forward_orbit(m, max(cf.q(n_max + 1), 200))
    pre = backward_arcs(m, cf.q(n_max + 1) + cf.q(n_max) - 1)
    parts = {n: build_partition(m, cf, n, pre) for n in range(1, n_max + 1)}
    series = compute_scalings(m, cf, orbit, pre, n_max,
                              strict_alpha_tau=strict_alpha_tau)
    return RunBundle(map=m, cf=cf, orbit=orbit, preimages=pre,
                     partitions=parts, series=series, n_max=n_max)


@pytest.fixture(scope="session")
def golden_l3() -> RunBundle:
    """The workhorse bounded-geometry run (criteria 2, 5, 6, 8)."""
    return make_bundle("0.05", "3", strict_alpha_tau=True)


@pytest.fixture(scope="session")
def golden_l15_cover() -> RunBundle:
    """Degenerate run with a large flat interval for the cover-exponent decay."""
    return make_bundle("0.3", "1.5")


@pytest.fixture(scope="session")
def golden_l2_recursion() -> RunBundle:
    """l = 2 run in the settled regime (x <= 0.55) for the recursive inequality."""
    return make_bundle("0.4", "2")


@pytest.fixture(scope="session")
def silver_l3() -> RunBundle:
    """Silver rotation number (all partial quotients 2) at modest depth."""
    return make_bundle("0.05", "3", n_max=6, depth=9,
                       target=RotationTarget.silver())


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import ACCEPT_LOG
    except ImportError:
        return
    if ACCEPT_LOG:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPT_LOG:
            terminalreporter.write_line(line)
