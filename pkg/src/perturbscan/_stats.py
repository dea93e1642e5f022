"""Small shared statistics helpers."""
from __future__ import annotations

import math


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial rate (95% by default)."""
    if trials <= 0:
        return (0.0, 1.0)
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = phat + z2 / (2.0 * trials)
    rad = z * math.sqrt(max(0.0, phat * (1.0 - phat) / trials + z2 / (4.0 * trials * trials)))
    # the interval contains phat exactly; keep that true under rounding
    lo = max(0.0, min((center - rad) / denom, phat))
    hi = min(1.0, max((center + rad) / denom, phat))
    return (lo, hi)
