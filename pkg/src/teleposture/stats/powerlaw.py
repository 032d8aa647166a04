"""Continuous power-law tail fit with KS-selected cut-off and bootstrap p-value.

For every distinct sample value taken as ``x_min`` (leaving at least
``min_tail`` points) the exponent is the continuous MLE
``alpha = 1 + n_tail / sum(ln(x / x_min))``; the cut-off minimising the
Kolmogorov-Smirnov distance between the tail and the fitted CDF wins.  The
p-value is the fraction of semi-parametric bootstrap replicates whose own
best-fit KS distance is at least the observed one.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numba as nb
import numpy as np

from .._parallel import parallel_map
from ..errors import DegenerateInputError, FitFailure


@dataclass
class PowerLawFit:
    alpha: float
    x_min: float
    ks: float
    p_value: float
    tail_count: int
    n: int
    n_bootstrap: int

    def to_dict(self) -> dict:
        return asdict(self)


@nb.njit(cache=True, nogil=True)
def _scan(logx, min_tail):
    """Return (k, alpha, D) of the best cut-off index into sorted data."""
    n = logx.shape[0]
    suffix = np.empty(n + 1)
    suffix[n] = 0.0
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + logx[i]
    best_d = np.inf
    best_k = -1
    best_alpha = np.nan
    for k in range(n - min_tail + 1):
        if k > 0 and logx[k] == logx[k - 1]:
            continue
        m = n - k
        s = suffix[k] - m * logx[k]
        if s <= 0.0:
            continue
        alpha = 1.0 + m / s
        d = 0.0
        for i in range(m):
            cdf = 1.0 - np.exp((1.0 - alpha) * (logx[k + i] - logx[k]))
            lo = abs(i / m - cdf)
            hi = abs((i + 1.0) / m - cdf)
            if lo > d:
                d = lo
            if hi > d:
                d = hi
            if d >= best_d:
                break
        if d < best_d:
            best_d = d
            best_k = k
            best_alpha = alpha
    return best_k, best_alpha, best_d


def ks_statistic(samples, alpha: float, x_min: float) -> float:
    """Two-sided KS distance between the tail ``x >= x_min`` and the fitted CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    tail = x[x >= x_min]
    m = len(tail)
    cdf = 1.0 - np.exp((1.0 - alpha) * (np.log(tail) - np.log(x_min)))
    i = np.arange(m)
    return float(max(np.abs(i / m - cdf).max(), np.abs((i + 1.0) / m - cdf).max()))


def _fit_sorted(x_sorted: np.ndarray, min_tail: int):
    k, alpha, d = _scan(np.log(x_sorted), min_tail)
    if k < 0:
        return None
    return float(x_sorted[k]), float(alpha), float(d), len(x_sorted) - k


def powerlaw_fit(
    samples,
    min_tail: int = 25,
    n_bootstrap: int = 100,
    seed: int = 0,
    threads: int | None = 1,
) -> PowerLawFit:
    x = np.sort(np.asarray(samples, dtype=float))
    if len(x) < 50:
        raise ValueError("power-law fitting needs at least 50 samples")
    if np.any(x <= 0):
        raise ValueError("samples must be positive")
    if x[0] == x[-1]:
        raise DegenerateInputError("all samples are equal")
    found = _fit_sorted(x, min_tail)
    if found is None:
        raise FitFailure(f"no cut-off leaves {min_tail} distinct-tailed samples")
    x_min, alpha, d, tail_count = found

    n = len(x)
    body = x[x < x_min]
    p_tail = tail_count / n
    children = np.random.SeedSequence(seed).spawn(n_bootstrap)

    def replicate(child):
        rng = np.random.default_rng(child)
        n_tail = rng.binomial(n, p_tail) if len(body) else n
        synth_tail = x_min * rng.random(n_tail) ** (-1.0 / (alpha - 1.0))
        synth_body = rng.choice(body, size=n - n_tail, replace=True) if n_tail < n else np.empty(0)
        res = _fit_sorted(np.sort(np.concatenate([synth_body, synth_tail])), min_tail)
        return None if res is None else res[2]

    stats = [s for s in parallel_map(replicate, children, threads) if s is not None]
    p_value = float(np.mean(np.asarray(stats) >= d)) if stats else float("nan")
    return PowerLawFit(alpha, x_min, d, p_value, int(tail_count), n, len(stats))
