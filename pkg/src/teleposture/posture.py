"""Posture time series: victims, attackers and attacks per interval.

Victim sets are kept per interval as sorted index arrays in CSR layout
(``victim_indptr``/``victim_indices``), which is what sweep-time needs.
Attacker identities are dropped once counted.
"""

from __future__ import annotations

import ipaddress
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .flows import AttackSet

RESOLUTION_SECONDS = {"H": 3600, "m": 60}
_SRC_SPACE = np.int64(1) << 32


def n_intervals(window_seconds: int, resolution: str) -> int:
    return int(math.ceil(window_seconds / _delta(resolution)))


def _delta(resolution: str) -> int:
    try:
        return RESOLUTION_SECONDS[resolution]
    except KeyError:
        raise ValueError(f"resolution must be 'H' or 'm', got {resolution!r}") from None


@dataclass
class PostureSeries:
    resolution: str
    T: int
    size: int
    victims: np.ndarray
    attackers: np.ndarray
    attacks: np.ndarray
    victim_indptr: np.ndarray | None = None
    victim_indices: np.ndarray | None = None

    def __post_init__(self):
        for name in ("victims", "attackers", "attacks"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            if len(arr) != self.T:
                raise ValueError(f"{name} has length {len(arr)}, expected {self.T}")
            setattr(self, name, arr)

    @property
    def has_victim_sets(self) -> bool:
        return self.victim_indptr is not None

    def victim_set(self, i: int) -> np.ndarray:
        self._need_sets()
        return self.victim_indices[self.victim_indptr[i]:self.victim_indptr[i + 1]]

    def victim_bitset(self, i: int) -> np.ndarray:
        """Interval ``i``'s victims as a packed bitset of ``size`` bits."""
        mask = np.zeros(self.size, dtype=bool)
        mask[self.victim_set(i)] = True
        return np.packbits(mask)

    def total_victims(self) -> int:
        """|V(r;0,T)|: distinct victims over the whole window."""
        if self.T == 0:
            return 0
        return cumulative_victims(self, 0, self.T)

    def _need_sets(self):
        if not self.has_victim_sets:
            raise ValueError("this series carries counts only (no per-interval victim sets)")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "interval": np.arange(self.T),
                "victims": self.victims,
                "attackers": self.attackers,
                "attacks": self.attacks,
            }
        )

    def to_csv(self, path_or_buf) -> None:
        self.to_frame().to_csv(path_or_buf, index=False, lineterminator="\n")

    @classmethod
    def from_csv(cls, path_or_buf, resolution: str = "H", size: int = 0) -> "PostureSeries":
        frame = pd.read_csv(path_or_buf)
        return cls(resolution, len(frame), size, frame["victims"], frame["attackers"], frame["attacks"])


# --------------------------------------------------------------------------- construction

@dataclass
class SeriesPartial:
    """Per-interval identity sets for one partition of an AttackSet.

    Partials built from any split of the flows merge (set union, attack sum)
    into exactly the single-pass series.
    """

    resolution: str
    T: int
    size: int
    victim_keys: np.ndarray
    attacker_keys: np.ndarray
    attacks: np.ndarray


def partial_series(a: AttackSet, resolution: str, T: int | None = None) -> SeriesPartial:
    delta = _delta(resolution)
    if T is None:
        T = n_intervals(a.window_seconds, resolution)
    interval = a.timestamp // delta
    victim_keys = np.unique(interval * a.size + a.dst_index)
    attacker_keys = np.unique(interval * _SRC_SPACE + a.src_ip.astype(np.int64))
    attacks = np.bincount(interval, minlength=T)[:T] if len(interval) else np.zeros(T, dtype=np.int64)
    return SeriesPartial(resolution, T, a.size, victim_keys, attacker_keys, attacks)


def merge_partials(parts: list[SeriesPartial]) -> PostureSeries:
    if not parts:
        raise ValueError("nothing to merge")
    first = parts[0]
    T, size = first.T, first.size
    if any((p.T, p.size, p.resolution) != (T, size, first.resolution) for p in parts):
        raise ValueError("partials disagree on T, size or resolution")
    victim_keys = np.unique(np.concatenate([p.victim_keys for p in parts]))
    attacker_keys = np.unique(np.concatenate([p.attacker_keys for p in parts]))
    attacks = np.sum([p.attacks for p in parts], axis=0)

    v_interval = victim_keys // size
    victims = np.bincount(v_interval, minlength=T).astype(np.int64)
    indptr = np.zeros(T + 1, dtype=np.int64)
    np.cumsum(victims, out=indptr[1:])
    indices = (victim_keys % size).astype(np.int64)
    attackers = np.bincount(attacker_keys // _SRC_SPACE, minlength=T).astype(np.int64)
    return PostureSeries(first.resolution, T, size, victims, attackers, attacks, indptr, indices)


def build_series(a: AttackSet, resolution: str, T: int | None = None) -> PostureSeries:
    """Victims, attackers and attacks per interval [iΔ, (i+1)Δ)."""
    return merge_partials([partial_series(a, resolution, T)])


def build_series_partitioned(parts: list[AttackSet], resolution: str) -> PostureSeries:
    window = max(p.window_seconds for p in parts)
    T = n_intervals(window, resolution)
    return merge_partials([partial_series(p, resolution, T) for p in parts])


def cumulative_victims(p: PostureSeries, i: int, j: int) -> int:
    """|V(r;i,j)|, the number of distinct victims hit in intervals [i, j)."""
    if not 0 <= i < j <= p.T:
        raise ValueError(f"need 0 <= i < j <= T, got i={i}, j={j}, T={p.T}")
    p._need_sets()
    chunk = p.victim_indices[p.victim_indptr[i]:p.victim_indptr[j]]
    if len(chunk) == 0:
        return 0
    seen = np.zeros(p.size, dtype=bool)
    seen[chunk] = True
    return int(seen.sum())


# --------------------------------------------------------------------------- origins

@dataclass
class OriginMap:
    """Offline prefix -> origin-code table with longest-prefix matching."""

    entries: list[tuple[ipaddress.IPv4Network, str]]
    default: str = "others"

    def __post_init__(self):
        nets = [ipaddress.IPv4Network(str(n)) for n, _ in self.entries]
        if len(set(nets)) != len(nets):
            raise ValueError("origin map has duplicate prefixes")
        self.entries = [(n, str(c)) for n, (_, c) in zip(nets, self.entries)]

    @classmethod
    def from_csv(cls, path_or_buf, default: str = "others") -> "OriginMap":
        frame = pd.read_csv(path_or_buf, dtype=str)
        return cls(list(zip(frame["prefix"], frame["code"])), default)

    def to_csv(self, path_or_buf) -> None:
        pd.DataFrame(
            {"prefix": [str(n) for n, _ in self.entries], "code": [c for _, c in self.entries]}
        ).to_csv(path_or_buf, index=False, lineterminator="\n")

    def lookup(self, ips: np.ndarray) -> np.ndarray:
        ips = np.asarray(ips, dtype=np.uint32).astype(np.int64)
        out = np.full(len(ips), self.default, dtype=object)
        done = np.zeros(len(ips), dtype=bool)
        by_len: dict[int, dict[int, str]] = {}
        for net, code in self.entries:
            by_len.setdefault(net.prefixlen, {})[int(net.network_address)] = code
        for plen in sorted(by_len, reverse=True):
            table = by_len[plen]
            mask = ((1 << 32) - 1) ^ ((1 << (32 - plen)) - 1)
            keys = np.array(sorted(table), dtype=np.int64)
            codes = np.array([table[k] for k in keys], dtype=object)
            net_of = ips & mask
            pos = np.searchsorted(keys, net_of)
            pos_c = np.minimum(pos, len(keys) - 1)
            hit = (~done) & (keys[pos_c] == net_of)
            out[hit] = codes[pos_c[hit]]
            done |= hit
        return out


@dataclass
class OriginAggregate:
    codes: list[str]
    series: dict[str, np.ndarray]
    shares: pd.DataFrame

    @property
    def dominant(self) -> str:
        return str(self.shares.iloc[0]["code"])

    def share_of(self, code: str) -> float:
        row = self.shares[self.shares["code"] == code]
        return float(row["share"].iloc[0]) if len(row) else 0.0


def aggregate_by_origin(a: AttackSet, origin_map: OriginMap, resolution: str, T: int | None = None) -> OriginAggregate:
    """Per-origin distinct-attacker series plus whole-window attacker shares."""
    delta = _delta(resolution)
    if T is None:
        T = n_intervals(a.window_seconds, resolution)
    src = a.src_ip
    uniq_src, inv = np.unique(src, return_inverse=True)
    src_code = origin_map.lookup(uniq_src)
    code_names, code_of_src = np.unique(src_code.astype(str), return_inverse=True) if len(uniq_src) else (np.array([], dtype=str), np.zeros(0, dtype=np.int64))

    interval = a.timestamp // delta
    pair = np.unique(interval * len(uniq_src) + inv) if len(src) else np.zeros(0, dtype=np.int64)
    pair_interval = pair // max(len(uniq_src), 1)
    pair_code = code_of_src[pair % max(len(uniq_src), 1)] if len(pair) else pair

    totals = np.bincount(code_of_src, minlength=len(code_names))
    order = sorted(range(len(code_names)), key=lambda k: (-totals[k], code_names[k]))
    series = {}
    for k in order:
        sel = pair_code == k
        series[str(code_names[k])] = np.bincount(pair_interval[sel], minlength=T)[:T].astype(np.int64)
    n_total = int(totals.sum())
    shares = pd.DataFrame(
        {
            "code": [str(code_names[k]) for k in order],
            "attackers": [int(totals[k]) for k in order],
            "share": [totals[k] / n_total for k in order] if n_total else [],
        },
        columns=["code", "attackers", "share"],
    )
    return OriginAggregate([str(code_names[k]) for k in order], series, shares)


# --------------------------------------------------------------------------- periodicity

def autocorrelation(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Sample ACF of the mean-removed series for lags 0..max_lag (biased, /n)."""
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    n = len(x)
    denom = float(np.dot(x, x))
    if denom == 0:
        return np.full(max_lag + 1, np.nan)
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(spec * np.conj(spec), nfft)[: max_lag + 1]
    return acov / denom


def detect_period(series, min_lag: int = 2, max_lag: int | None = None, threshold: float = 0.3) -> int | None:
    """Lag in [min_lag, T/3] with the highest autocorrelation, if it exceeds ``threshold``."""
    x = np.asarray(series, dtype=float)
    T = len(x)
    if max_lag is None:
        max_lag = T // 3
    if max_lag > T // 3:
        raise ValueError(f"series of length {T} is too short for candidate periods up to {max_lag}")
    if max_lag < min_lag:
        raise ValueError("no candidate lags")
    if np.all(x == x[0]):
        return None
    acf = autocorrelation(x, max_lag)
    lag = min_lag + int(np.argmax(acf[min_lag:max_lag + 1]))
    return lag if acf[lag] > threshold else None
