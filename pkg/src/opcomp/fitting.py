"""Least-squares fits used by the convergence and decay studies."""

import numpy as np


def rate_fit(points):
    """Fit a power law e = C * h^slope through (h, e) pairs.

    Least squares on (log h, log e). Returns (slope, intercept, r_squared)
    where intercept is log(C).
    """
    points = [(float(h), float(e)) for h, e in points]
    if len(points) < 3:
        raise ValueError("rate_fit needs at least 3 points, got %d" % len(points))
    if any(h <= 0 or e <= 0 for h, e in points):
        raise ValueError("rate_fit needs positive h and e values")
    logh = np.log([h for h, _ in points])
    loge = np.log([e for _, e in points])
    slope, intercept, r2 = linear_fit(logh, loge)
    return slope, intercept, r2


def linear_fit(x, y):
    """Ordinary least squares y = a*x + b. Returns (a, b, r_squared)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(coef[0]), float(coef[1]), r2
