"""Flyvbjerg-Petersen blocking for correlated Monte Carlo series."""
import numpy as np


def blocking_levels(x, min_blocks=32):
    """Standard error of the mean at each blocking level.

    Level 0 is the raw series; each further level averages adjacent pairs.
    Levels are produced while at least ``min_blocks`` blocks remain.
    """
    x = np.asarray(x, dtype=float)
    errs = []
    while x.size >= min_blocks:
        n = x.size
        errs.append(np.sqrt(np.var(x) / (n - 1)) if n > 1 else 0.0)
        if n % 2:
            x = x[:-1]
        x = 0.5 * (x[0::2] + x[1::2])
    return np.array(errs)


def blocking_error(x, min_blocks=32):
    """Error bar of ``mean(x)`` for an autocorrelated series.

    Takes the largest estimate over all levels with ``>= min_blocks`` blocks,
    which covers the plateau without a fitted stopping rule.  Series shorter
    than ``min_blocks`` fall back to the naive standard error.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return 0.0
    levels = blocking_levels(x, min_blocks)
    if levels.size == 0:
        return float(np.sqrt(np.var(x) / (x.size - 1)))
    return float(levels.max())
