from __future__ import annotations

import numpy as np

from ..errors import DegenerateInputError


def pmad(observed, fitted) -> float:
    """Percent mean absolute deviation, sum|Z - Z'| / sum Z.

    ``observed`` must be nonnegative with positive total.
    """
    z = np.asarray(observed, dtype=float)
    zf = np.asarray(fitted, dtype=float)
    if z.shape != zf.shape:
        raise ValueError(f"length mismatch: {z.shape} vs {zf.shape}")
    if np.any(z < 0):
        raise ValueError("observed values must be nonnegative")
    total = z.sum()
    if not total > 0:
        raise DegenerateInputError("PMAD undefined: observed series sums to zero")
    return float(np.abs(z - zf).sum() / total)
