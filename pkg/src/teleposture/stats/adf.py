"""Augmented Dickey-Fuller test (intercept, no trend)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import DegenerateInputError

# MacKinnon (2010) response surfaces, constant / no trend, one variable:
# crit(T) = b0 + b1/T + b2/T^2 + b3/T^3
_MACKINNON_C = {
    "1%": (-3.43035, -6.5393, -16.786, -79.433),
    "5%": (-2.86154, -2.8903, -4.234, -40.040),
    "10%": (-2.56677, -1.5384, -2.809, 0.0),
}


def critical_values(nobs: int) -> dict[str, float]:
    return {k: b0 + b1 / nobs + b2 / nobs**2 + b3 / nobs**3 for k, (b0, b1, b2, b3) in _MACKINNON_C.items()}


def schwert_lag(n: int) -> int:
    return int(math.floor(12 * (n / 100) ** 0.25))


@dataclass
class AdfResult:
    statistic: float
    lag_order: int
    nobs: int
    critical_values: dict[str, float]
    stationary: bool

    def to_dict(self) -> dict:
        return asdict(self)


def adf_test(series, max_lag: int | None = None) -> AdfResult:
    """Regress dy_t on (y_{t-1}, dy_{t-1..t-k}, 1) and t-test the level coefficient.

    The lag order k is the Schwert rule floor(12 (n/100)^{1/4}) unless
    ``max_lag`` fixes it.  ``stationary`` means the unit root is rejected at 5%.
    """
    y = np.asarray(series, dtype=float)
    n = len(y)
    if n < 20:
        raise ValueError("ADF needs at least 20 observations")
    if np.all(y == y[0]):
        raise DegenerateInputError("ADF undefined for a constant series")
    k = schwert_lag(n) if max_lag is None else int(max_lag)
    if k < 0 or n - k - 1 < k + 3:
        raise ValueError(f"lag order {k} too large for {n} observations")

    dy = np.diff(y)
    target = dy[k:]
    cols = [y[k:-1]]
    for j in range(1, k + 1):
        cols.append(dy[k - j:-j])
    cols.append(np.ones_like(target))
    X = np.column_stack(cols)
    beta, _, rank, _ = np.linalg.lstsq(X, target, rcond=None)
    if rank < X.shape[1]:
        raise DegenerateInputError("ADF regression is rank deficient")
    resid = target - X @ beta
    nobs, p = X.shape
    s2 = resid @ resid / (nobs - p)
    cov = s2 * np.linalg.inv(X.T @ X)
    stat = float(beta[0] / math.sqrt(cov[0, 0]))
    crit = critical_values(nobs)
    return AdfResult(stat, k, nobs, crit, bool(stat < crit["5%"]))
