"""Sweep-time: how long from a start interval until a tau fraction of all
ever-attacked telescope addresses has been hit at least once.

:func:`sweep_time` is the direct definition (grow the union forward from the
start).  :func:`sweep_time_series` evaluates many starts at once by keeping,
for every victim, the first interval at or after the current start in which
it is hit; the sweep end is then an order statistic of that array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ._parallel import parallel_map, resolve_threads
from .posture import PostureSeries

DEFAULT_TAUS = (0.80, 0.85, 0.90, 0.95, 0.99)
UNDEFINED = -1


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    return tau


@dataclass
class SweepTimeSeries:
    tau: float
    stride: int
    denominator: int
    starts: np.ndarray
    ends: np.ndarray  # absolute end index I_i, UNDEFINED when never reached
    durations: np.ndarray  # I_i - i + 1, UNDEFINED when never reached

    @property
    def defined(self) -> np.ndarray:
        return self.ends != UNDEFINED

    def entries(self) -> list[tuple[int, int, int] | None]:
        return [
            (int(s), int(e), int(d)) if e != UNDEFINED else None
            for s, e, d in zip(self.starts, self.ends, self.durations)
        ]

    def defined_durations(self) -> np.ndarray:
        return self.durations[self.defined]

    def to_frame(self) -> pd.DataFrame:
        ends = pd.array(np.where(self.defined, self.ends, 0), dtype="Int64")
        durs = pd.array(np.where(self.defined, self.durations, 0), dtype="Int64")
        ends[~self.defined] = pd.NA
        durs[~self.defined] = pd.NA
        return pd.DataFrame({"tau": self.tau, "start": self.starts, "end": ends, "duration": durs})


def sweep_frame(series: dict[float, SweepTimeSeries] | list[SweepTimeSeries]) -> pd.DataFrame:
    items = series.values() if isinstance(series, dict) else series
    return pd.concat([s.to_frame() for s in items], ignore_index=True)


def write_sweep_csv(series, path_or_buf) -> None:
    sweep_frame(series).to_csv(path_or_buf, index=False, lineterminator="\n")


def read_sweep_csv(path_or_buf) -> dict[float, SweepTimeSeries]:
    """Inverse of :func:`write_sweep_csv` (stride and denominator are not stored)."""
    frame = pd.read_csv(path_or_buf)
    out = {}
    for tau, g in frame.groupby("tau", sort=False):
        starts = g["start"].to_numpy(dtype=np.int64)
        ends = g["end"].fillna(UNDEFINED).to_numpy(dtype=np.int64)
        durs = g["duration"].fillna(UNDEFINED).to_numpy(dtype=np.int64)
        stride = int(starts[1] - starts[0]) if len(starts) > 1 else 1
        out[float(tau)] = SweepTimeSeries(float(tau), stride, 0, starts, ends, durs)
    return out


def sweep_time(p: PostureSeries, i: int, tau: float) -> tuple[int, int] | None:
    """(I_i, I_i - i + 1) for start ``i``, or None when the window runs out first."""
    tau = _check_tau(tau)
    if not 0 <= i < p.T:
        raise ValueError(f"start {i} outside [0, {p.T})")
    denominator = p.total_victims()
    if denominator == 0:
        return None
    target = tau * denominator
    seen = np.zeros(p.size, dtype=bool)
    count = 0
    for ell in range(i, p.T):
        vs = p.victim_set(ell)
        fresh = vs[~seen[vs]]
        seen[fresh] = True
        count += len(fresh)
        if count >= target:
            return ell, ell - i + 1
    return None


class _Frontier:
    """next-hit bookkeeping shared by every start chunk."""

    def __init__(self, p: PostureSeries):
        self.T = p.T
        victim = p.victim_indices
        interval = np.repeat(np.arange(p.T, dtype=np.int64), np.diff(p.victim_indptr))
        ids, compact = np.unique(victim, return_inverse=True)
        self.n_victims = len(ids)
        self.compact = compact.astype(np.int64)  # pair -> compact victim id, interval-major order
        self.indptr = p.victim_indptr
        order = np.lexsort((interval, self.compact))  # victim-major, then interval
        v_sorted = self.compact[order]
        t_sorted = interval[order]
        nxt_sorted = np.full(len(order), self.T, dtype=np.int64)
        same = v_sorted[1:] == v_sorted[:-1]
        nxt_sorted[:-1][same] = t_sorted[1:][same]
        self.next_hit = np.empty(len(order), dtype=np.int64)
        self.next_hit[order] = nxt_sorted
        self._v_sorted, self._t_sorted = v_sorted, t_sorted

    def initial(self, start: int) -> np.ndarray:
        """First hit interval >= start for every victim (T when none)."""
        nxt = np.full(self.n_victims, self.T, dtype=np.int64)
        mask = self._t_sorted >= start
        v = self._v_sorted[mask]
        t = self._t_sorted[mask]
        if len(v):
            first = np.flatnonzero(np.r_[True, v[1:] != v[:-1]])
            nxt[v[first]] = t[first]
        return nxt

    def advance(self, nxt: np.ndarray, ell: int) -> None:
        """Move the start past interval ``ell``."""
        lo, hi = self.indptr[ell], self.indptr[ell + 1]
        nxt[self.compact[lo:hi]] = self.next_hit[lo:hi]


def sweep_time_series(
    p: PostureSeries,
    taus=DEFAULT_TAUS,
    stride: int = 10,
    threads: int | None = None,
) -> dict[float, SweepTimeSeries]:
    """Sweep-times at starts 0, stride, 2*stride, ... for every tau."""
    taus = [_check_tau(t) for t in taus]
    if not taus:
        raise ValueError("need at least one tau")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    starts = np.arange(0, p.T, stride, dtype=np.int64)
    denominator = p.total_victims() if p.T else 0
    ks = [math.ceil(t * denominator) for t in taus]

    ends = np.full((len(taus), len(starts)), UNDEFINED, dtype=np.int64)
    if denominator > 0 and len(starts):
        frontier = _Frontier(p)
        kth = np.array(sorted(set(k - 1 for k in ks)), dtype=np.int64)

        def run(chunk):
            lo, hi = chunk
            nxt = frontier.initial(int(starts[lo]))
            cur = int(starts[lo])
            out = np.full((len(taus), hi - lo), UNDEFINED, dtype=np.int64)
            for col, s in enumerate(starts[lo:hi]):
                while cur < s:
                    frontier.advance(nxt, cur)
                    cur += 1
                part = np.partition(nxt, kth)
                for row, k in enumerate(ks):
                    end = int(part[k - 1])
                    if end < p.T:
                        out[row, col] = end
            return out

        nthreads = resolve_threads(threads)
        n_chunks = 1 if nthreads == 1 else min(len(starts), nthreads * 4)
        bounds = np.linspace(0, len(starts), n_chunks + 1).astype(int)
        chunks = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        for (lo, hi), block in zip(chunks, parallel_map(run, chunks, threads)):
            ends[:, lo:hi] = block

    out = {}
    for row, tau in enumerate(taus):
        e = ends[row]
        d = np.where(e == UNDEFINED, UNDEFINED, e - starts + 1)
        out[tau] = SweepTimeSeries(tau, stride, denominator, starts.copy(), e.copy(), d)
    return out
