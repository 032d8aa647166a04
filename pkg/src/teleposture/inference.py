"""Approximate a telescope's posture series from a few of its sub-blocks.

The telescope is cut into B equal contiguous blocks of destination
addresses.  A target series of the whole telescope is regressed on the same
series of b chosen blocks (with intercept) and the in-sample PMAD measures
how well the small telescopes stand in for the large one.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from ._parallel import parallel_map, resolve_threads
from .errors import BudgetExceeded
from .flows import AttackSet
from .posture import PostureSeries, build_series, n_intervals
from .stats.dtw import dtw_distance_matrix
from .stats.pmad import pmad

TARGETS = ("victims", "attackers", "attacks")
SUMMARY_COLUMNS = ["target", "B", "b", "min", "mean", "median", "max", "sd"]


@dataclass
class BlockPartition:
    B: int
    block_size: int
    total: PostureSeries
    blocks: list[PostureSeries]

    @property
    def T(self) -> int:
        return self.total.T

    def block_of(self, dst_index) -> np.ndarray:
        return np.asarray(dst_index, dtype=np.int64) // self.block_size

    def target_matrix(self, target: str) -> np.ndarray:
        """(T, B) matrix of one series across blocks."""
        _check_target(target)
        return np.column_stack([getattr(s, target) for s in self.blocks]).astype(float)

    def target_series(self, target: str) -> np.ndarray:
        _check_target(target)
        return getattr(self.total, target).astype(float)


def _check_target(target: str) -> None:
    if target not in TARGETS:
        raise ValueError(f"target must be one of {TARGETS}, got {target!r}")


def partition_blocks(a: AttackSet, B: int, resolution: str = "H", T: int | None = None) -> BlockPartition:
    """Split the telescope into B blocks; block k holds dst_index in [k N/B, (k+1) N/B)."""
    N = a.size
    if B < 1 or N % B:
        raise ValueError(f"B={B} does not divide the telescope size {N}")
    if T is None:
        T = n_intervals(a.window_seconds, resolution)
    width = N // B
    block = a.dst_index // width
    order = np.argsort(block, kind="stable")
    bounds = np.searchsorted(block[order], np.arange(B + 1))
    blocks = [build_series(a.subset(order[bounds[k]:bounds[k + 1]]), resolution, T) for k in range(B)]
    return BlockPartition(B=B, block_size=width, total=build_series(a, resolution, T), blocks=blocks)


@dataclass
class RegressionFit:
    c: float
    phi: np.ndarray
    fitted: np.ndarray
    pmad: float
    rank_deficient: bool


def fit_block_regression(target, block_series) -> RegressionFit:
    """OLS of ``target`` on an intercept and the block series; minimum-norm if rank deficient."""
    y = np.asarray(target, dtype=float)
    X = np.atleast_2d(np.asarray(block_series, dtype=float))
    if X.shape[0] != len(y) and X.shape[1] == len(y):
        X = X.T
    if X.shape[0] != len(y):
        raise ValueError("target and block series differ in length")
    b = X.shape[1]
    if len(y) < b + 2:
        raise ValueError(f"need at least {b + 2} intervals for {b} blocks, got {len(y)}")
    design = np.column_stack([np.ones(len(y)), X])
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    fitted = design @ coef
    return RegressionFit(
        c=float(coef[0]),
        phi=coef[1:],
        fitted=fitted,
        pmad=pmad(y, fitted),
        rank_deficient=bool(rank < design.shape[1]),
    )


@dataclass
class InferenceResult:
    target: str
    B: int
    b: int
    method: str
    combinations: list[tuple[int, ...]]
    pmads: np.ndarray
    rank_deficient: np.ndarray
    best: tuple[int, ...]
    c: float
    phi: np.ndarray
    clusters: np.ndarray | None = field(default=None, repr=False)

    @property
    def pmad(self) -> float:
        return float(self.pmads.min())

    @property
    def summary(self) -> dict[str, float]:
        v = self.pmads
        return {
            "min": float(v.min()),
            "mean": float(v.mean()),
            "median": float(np.median(v)),
            "max": float(v.max()),
            "sd": float(v.std(ddof=1)) if len(v) > 1 else 0.0,
        }

    def summary_row(self) -> dict:
        return {"target": self.target, "B": self.B, "b": self.b, **self.summary}

    def combinations_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "blocks": [" ".join(map(str, c)) for c in self.combinations],
                "pmad": self.pmads,
                "rank_deficient": self.rank_deficient,
            }
        )


def summary_frame(results: list[InferenceResult]) -> pd.DataFrame:
    return pd.DataFrame([r.summary_row() for r in results], columns=SUMMARY_COLUMNS)


def write_summary_csv(results: list[InferenceResult], path) -> None:
    summary_frame(results).to_csv(path, index=False, lineterminator="\n")


def _evaluate(y, X, combos, threads):
    n_threads = resolve_threads(threads)
    chunk = max(1, math.ceil(len(combos) / (4 * n_threads)))
    chunks = [combos[i:i + chunk] for i in range(0, len(combos), chunk)]

    def run(batch):
        out = []
        for combo in batch:
            fit = fit_block_regression(y, X[:, list(combo)])
            out.append((fit.pmad, fit.rank_deficient))
        return out

    results = [r for part in parallel_map(run, chunks, threads) for r in part]
    return np.array([r[0] for r in results]), np.array([r[1] for r in results], dtype=bool)


def _result(partition, target, b, method, combos, y, X, pmads, flags, clusters=None):
    k = int(np.argmin(pmads))
    best = fit_block_regression(y, X[:, list(combos[k])])
    return InferenceResult(
        target=target,
        B=partition.B,
        b=b,
        method=method,
        combinations=combos,
        pmads=pmads,
        rank_deficient=flags,
        best=combos[k],
        c=best.c,
        phi=best.phi,
        clusters=clusters,
    )


def enumerate_combinations(
    partition: BlockPartition,
    b: int,
    target: str,
    budget: int = 20000,
    threads: int | None = 1,
) -> InferenceResult:
    """Fit every b-subset of blocks and summarise the PMADs."""
    _check_target(target)
    B = partition.B
    if not 1 <= b <= B:
        raise ValueError(f"b must be in [1, {B}], got {b}")
    count = math.comb(B, b)
    if count > budget:
        raise BudgetExceeded(
            f"C({B},{b}) = {count} combinations exceed the budget of {budget}; use cluster_sample instead"
        )
    y = partition.target_series(target)
    X = partition.target_matrix(target)
    combos = list(itertools.combinations(range(B), b))
    pmads, flags = _evaluate(y, X, combos, threads)
    return _result(partition, target, b, "enumerate", combos, y, X, pmads, flags)


def cluster_blocks(partition: BlockPartition, b: int, target: str, threads: int | None = 1) -> np.ndarray:
    """Cluster labels (1..b) per block from complete linkage on DTW distances; 0 marks excluded all-zero blocks."""
    X = partition.target_matrix(target)
    live = np.flatnonzero(X.any(axis=0))
    if len(live) < partition.B:
        warnings.warn(
            f"{partition.B - len(live)} all-zero blocks excluded from clustering", RuntimeWarning, stacklevel=2
        )
    if len(live) < b:
        raise ValueError(f"only {len(live)} non-empty blocks for {b} clusters")
    labels = np.zeros(partition.B, dtype=int)
    if len(live) == b:
        labels[live] = np.arange(1, b + 1)
        return labels
    dist = dtw_distance_matrix([X[:, k] for k in live], threads=threads)
    tree = linkage(squareform(dist, checks=False), method="complete")
    labels[live] = fcluster(tree, t=b, criterion="maxclust")
    return labels


def cluster_sample(
    partition: BlockPartition,
    b: int,
    target: str,
    samples: int = 100,
    seed: int = 0,
    threads: int | None = 1,
) -> InferenceResult:
    """Cluster blocks into b groups and draw one block per group ``samples`` times."""
    _check_target(target)
    if not 1 <= b <= partition.B:
        raise ValueError(f"b must be in [1, {partition.B}], got {b}")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    labels = cluster_blocks(partition, b, target, threads)
    groups = [np.flatnonzero(labels == k) for k in np.unique(labels[labels > 0])]
    rng = np.random.default_rng(seed)
    combos = [tuple(sorted(int(g[rng.integers(len(g))]) for g in groups)) for _ in range(samples)]
    y = partition.target_series(target)
    X = partition.target_matrix(target)
    pmads, flags = _evaluate(y, X, combos, threads)
    return _result(partition, target, b, "cluster", combos, y, X, pmads, flags, clusters=labels)
