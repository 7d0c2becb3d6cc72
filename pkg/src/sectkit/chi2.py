"""Chi-square tail probabilities and quantiles.

The survival function is the regularized upper incomplete gamma function
``Q(k/2, x/2)``; quantiles are found by bisection on it.
"""

from __future__ import annotations

import math

from scipy.special import gammaincc

from .errors import ValidationError


def chi2_sf(x: float, k: int) -> float:
    """``P(X > x)`` for ``X ~ chi2_k``."""
    if k < 1:
        raise ValidationError(f"degrees of freedom must be >= 1, got {k}")
    if x <= 0:
        return 1.0
    return float(gammaincc(0.5 * k, 0.5 * x))


def chi2_quantile(prob: float, k: int, rtol: float = 1e-14) -> float:
    """``x`` with ``P(X <= x) = prob`` for ``X ~ chi2_k``."""
    if not 0 < prob < 1:
        raise ValidationError(f"probability must be in (0, 1), got {prob}")
    target = 1.0 - prob
    lo, hi = 0.0, max(1.0, float(k))
    while chi2_sf(hi, k) > target:
        lo, hi = hi, 2 * hi
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if chi2_sf(mid, k) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return 0.5 * (lo + hi)
