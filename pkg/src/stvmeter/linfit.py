"""Ordinary least squares for a straight line, with standard errors.

Kept dependency-free of the other modules so both the state algebra and
the estimator layer can use it without import cycles.
"""

from __future__ import annotations

import math


def ols(x, y) -> tuple[float, float, float, float]:
    """Fit y = a + b*x; return (a, b, a_err, b_err).

    Standard errors come from the residual variance with n-2 degrees of
    freedom; for an exact line they are zero. Degenerate abscissas (all x
    equal) are rejected.
    """
    xs = [float(v) for v in x]
    ys = [float(v) for v in y]
    n = len(xs)
    if n != len(ys):
        raise ValueError("x and y must have equal length")
    if n < 3:
        raise ValueError("need at least three points")
    mean_x = math.fsum(xs) / n
    mean_y = math.fsum(ys) / n
    sxx = math.fsum((xi - mean_x) ** 2 for xi in xs)
    if sxx == 0.0:
        raise ValueError("degenerate abscissas: all x values are equal")
    sxy = math.fsum((xi - mean_x) * (yi - mean_y) for xi, yi in zip(xs, ys))
    b = sxy / sxx
    a = mean_y - b * mean_x
    ssr = math.fsum((yi - a - b * xi) ** 2 for xi, yi in zip(xs, ys))
    s2 = max(ssr, 0.0) / (n - 2)
    b_err = math.sqrt(s2 / sxx)
    a_err = math.sqrt(s2 * (1.0 / n + mean_x * mean_x / sxx))
    return a, b, a_err, b_err
