"""Dynamic time warping with the symmetric step pattern.

Local cost is ``|a_i - b_j|``; the recursion is::

    g(i, j) = min(g(i-1, j-1) + 2 d(i, j),
                  g(i-1, j)   +   d(i, j),
                  g(i,   j-1) +   d(i, j))

with ``g(0, 0) = d(0, 0)``.  Every admissible path carries total weight
``n + m - 1``, so ``distance / (n + m)`` is a length-normalised score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np
import pandas as pd

from .._parallel import parallel_map


@dataclass
class DtwResult:
    distance: float
    path: list[tuple[int, int]]

    @property
    def normalized_distance(self) -> float:
        n, m = self.path[-1][0] + 1, self.path[-1][1] + 1
        return self.distance / (n + m)

    def path_frame(self) -> pd.DataFrame:
        arr = np.asarray(self.path, dtype=np.int64)
        return pd.DataFrame({"i": arr[:, 0], "j": arr[:, 1]})

    def to_csv(self, path_or_buf) -> None:
        self.path_frame().to_csv(path_or_buf, index=False, lineterminator="\n")


@nb.njit(cache=True, nogil=True)
def _cost_matrix(a, b):
    n, m = a.shape[0], b.shape[0]
    g = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            d = abs(a[i] - b[j])
            if i == 0 and j == 0:
                g[i, j] = d
                continue
            best = np.inf
            if i > 0 and j > 0:
                best = g[i - 1, j - 1] + 2.0 * d
            if i > 0:
                c = g[i - 1, j] + d
                if c < best:
                    best = c
            if j > 0:
                c = g[i, j - 1] + d
                if c < best:
                    best = c
            g[i, j] = best
    return g


@nb.njit(cache=True, nogil=True)
def _distance_only(a, b):
    n, m = a.shape[0], b.shape[0]
    prev = np.empty(m)
    cur = np.empty(m)
    for i in range(n):
        for j in range(m):
            d = abs(a[i] - b[j])
            if i == 0 and j == 0:
                cur[j] = d
                continue
            best = np.inf
            if i > 0 and j > 0:
                best = prev[j - 1] + 2.0 * d
            if i > 0:
                c = prev[j] + d
                if c < best:
                    best = c
            if j > 0:
                c = cur[j - 1] + d
                if c < best:
                    best = c
            cur[j] = best
        prev, cur = cur, prev
    return prev[m - 1]


def _as_series(x) -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("DTW needs nonempty 1-d series")
    return arr


def dtw(a, b) -> DtwResult:
    """Globally optimal alignment of ``a`` and ``b`` plus the warping path."""
    a, b = _as_series(a), _as_series(b)
    g = _cost_matrix(a, b)
    i, j = len(a) - 1, len(b) - 1
    path = [(i, j)]
    while (i, j) != (0, 0):
        d = abs(a[i] - b[j])
        if i > 0 and j > 0 and g[i - 1, j - 1] + 2.0 * d == g[i, j]:
            i, j = i - 1, j - 1
        elif i > 0 and g[i - 1, j] + d == g[i, j]:
            i -= 1
        else:
            j -= 1
        path.append((i, j))
    path.reverse()
    return DtwResult(float(g[-1, -1]), path)


def dtw_distance(a, b) -> float:
    return float(_distance_only(_as_series(a), _as_series(b)))


def path_cost(a, b, path) -> float:
    """Accumulated symmetric-pattern cost of an explicit warping path."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    (i0, j0) = path[0]
    total = abs(a[i0] - b[j0])
    for (pi, pj), (i, j) in zip(path[:-1], path[1:]):
        w = 2.0 if (i - pi == 1 and j - pj == 1) else 1.0
        total += w * abs(a[i] - b[j])
    return float(total)


def dtw_distance_matrix(series: list, threads: int | None = 1) -> np.ndarray:
    """Symmetric matrix of pairwise DTW distances."""
    arrs = [_as_series(s) for s in series]
    k = len(arrs)
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    values = parallel_map(lambda ij: _distance_only(arrs[ij[0]], arrs[ij[1]]), pairs, threads)
    out = np.zeros((k, k))
    for (i, j), v in zip(pairs, values):
        out[i, j] = out[j, i] = v
    return out
