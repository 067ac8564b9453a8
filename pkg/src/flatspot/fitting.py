"""Tiny least-squares helper for the diagnostic trend fits (float precision)."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    stderr_slope: float
    points: int


def linear_fit(xs, ys) -> LinearFit:
    xs = [float(x) for x in xs]
    ys = [float(y) for y in ys]
    n = len(xs)
    if n < 2 or len(ys) != n:
        raise ValueError("need at least two matched points")
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    if sxx == 0:
        raise ValueError("degenerate abscissae")
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = my - slope * mx
    ss_res = sum((y - (slope * x + intercept)) ** 2 for x, y in zip(xs, ys))
    ss_tot = sum((y - my) ** 2 for y in ys)
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    if n > 2 and sxx > 0:
        stderr = math.sqrt(max(ss_res, 0.0) / (n - 2) / sxx)
    else:
        stderr = float("inf")
    return LinearFit(slope=slope, intercept=intercept, r_squared=r2,
                     stderr_slope=stderr, points=n)


def decay_rate_fit(levels, values) -> tuple[float, LinearFit]:
    """Fit values ~ C * lambda^level; returns (lambda_hat, underlying log fit)."""
    fit = linear_fit(levels, [math.log(float(v)) for v in values])
    return math.exp(fit.slope), fit
