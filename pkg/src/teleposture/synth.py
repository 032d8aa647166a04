"""Seeded synthetic telescope traffic with a ground-truth manifest.

Each population is a set of sources from one origin.  A source emits a fixed
or Pareto-distributed number of flows over the whole window; the hour of each
flow follows the population's activity profile, a diurnal wave with a
single trough multiplied by a slowly varying AR(1) intensity, so attacker
counts are both periodic and short-term predictable.  Origins own disjoint
/8 source ranges, which makes the origin map exact.  Noise adds
misconfigured sources (1-9 flows each), backscatter and ICMP traffic.
"""

from __future__ import annotations

import ipaddress
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .flows import ABSENT, ICMP, ICMP_REQUEST_TYPES, RST, SYN, SYN_ACK, TCP, UDP, ACK, FlowTable, parse_telescope
from .posture import OriginMap

TCP_PORTS = np.array([22, 23, 80, 443, 445, 1433, 2323, 3389, 5555, 8080])
UDP_PORTS = np.array([53, 123, 161, 389, 1900, 5060, 11211])
BACKSCATTER_FLAGS = np.array([SYN_ACK, RST, RST | ACK])
ICMP_OTHER_TYPES = np.array([8, 13, 15, 17])

MISCONFIG_RANGE = ipaddress.IPv4Network("198.18.0.0/15")
NOISE_RANGE = ipaddress.IPv4Network("100.64.0.0/10")
FIRST_ORIGIN_OCTET = 30
SCENARIOS = ("mixed", "diurnal", "dominance", "uniform", "halves")


@dataclass
class FlowCount:
    kind: str = "fixed"  # fixed | pareto
    count: int = 10
    alpha: float = 2.5
    minimum: int = 10

    def __post_init__(self):
        if self.kind not in ("fixed", "pareto"):
            raise ValueError(f"unknown flow-count kind {self.kind!r}")
        if self.kind == "fixed" and self.count < 1:
            raise ValueError("fixed flow count must be >= 1")
        if self.kind == "pareto" and (self.alpha <= 1 or self.minimum < 1):
            raise ValueError("pareto flow counts need alpha > 1 and minimum >= 1")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "fixed":
            return np.full(n, self.count, dtype=np.int64)
        # continuous Pareto with density exponent alpha, floored to integers
        u = rng.random(n)
        return np.floor(self.minimum * (1.0 - u) ** (-1.0 / (self.alpha - 1.0))).astype(np.int64)


@dataclass
class Targeting:
    kind: str = "uniform"  # uniform | sweep | range
    start: float = 0.0
    stop: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "sweep", "range"):
            raise ValueError(f"unknown targeting kind {self.kind!r}")
        if not 0.0 <= self.start < self.stop <= 1.0:
            raise ValueError("targeting range must satisfy 0 <= start < stop <= 1")

    def bounds(self, N: int) -> tuple[int, int]:
        if self.kind != "range":
            return 0, N
        lo, hi = int(round(self.start * N)), int(round(self.stop * N))
        if hi <= lo:
            raise ValueError("targeting range is empty for this telescope")
        return lo, hi


@dataclass
class Intensity:
    """Latent AR(1) on log activity; ``sd`` is the innovation standard deviation."""

    phi: float = 0.0
    sd: float = 0.0

    def __post_init__(self):
        if not -1 < self.phi < 1 or self.sd < 0:
            raise ValueError("intensity needs |phi| < 1 and sd >= 0")


@dataclass
class Population:
    origin: str
    sources: int
    diurnal_amplitude: float = 0.0
    trough_hour: float = 12.5
    period_hours: int = 24
    flows: FlowCount = field(default_factory=FlowCount)
    targeting: Targeting = field(default_factory=Targeting)
    tcp_share: float = 0.8
    intensity: Intensity = field(default_factory=Intensity)

    def __post_init__(self):
        if isinstance(self.flows, dict):
            self.flows = FlowCount(**self.flows)
        if isinstance(self.targeting, dict):
            self.targeting = Targeting(**self.targeting)
        if isinstance(self.intensity, dict):
            self.intensity = Intensity(**self.intensity)
        if self.sources < 0:
            raise ValueError("source count must be >= 0")
        if not 0.0 <= self.diurnal_amplitude <= 1.0:
            raise ValueError("diurnal amplitude must lie in [0, 1]")
        if not 0.0 <= self.tcp_share <= 1.0:
            raise ValueError("tcp_share must lie in [0, 1]")
        if self.period_hours < 2:
            raise ValueError("period must be >= 2 hours")
        if not self.origin or self.origin == "others":
            raise ValueError("population origin must be a real code, not 'others'")


@dataclass
class Noise:
    misconfig_sources: int = 0
    backscatter_rate: float = 0.0
    icmp_rate: float = 0.0
    icmp_other_rate: float = 0.0

    def __post_init__(self):
        if self.misconfig_sources < 0 or min(self.backscatter_rate, self.icmp_rate, self.icmp_other_rate) < 0:
            raise ValueError("noise counts and rates must be >= 0")
        if self.misconfig_sources > MISCONFIG_RANGE.num_addresses:
            raise ValueError("too many misconfigured sources for the reserved range")


@dataclass
class ScenarioConfig:
    telescope: str
    duration_hours: int
    seed: int = 0
    populations: list[Population] = field(default_factory=list)
    noise: Noise = field(default_factory=Noise)

    def __post_init__(self):
        self.telescope = str(parse_telescope(self.telescope))
        self.populations = [Population(**p) if isinstance(p, dict) else p for p in self.populations]
        if isinstance(self.noise, dict):
            self.noise = Noise(**self.noise)
        if self.duration_hours < 1:
            raise ValueError("duration must be >= 1 hour")
        periodic = any(p.diurnal_amplitude > 0 for p in self.populations)
        if periodic and self.duration_hours < 48:
            raise ValueError("periodic scenarios need at least 48 hours")
        net = parse_telescope(self.telescope)
        for p in self.populations:
            lo, hi = p.targeting.bounds(net.num_addresses)
            if p.targeting.kind == "sweep" and p.sources > hi - lo:
                raise ValueError(f"telescope too small for {p.sources} sweeping sources of origin {p.origin}")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)

    def with_seed(self, seed: int) -> "ScenarioConfig":
        data = self.to_dict()
        data["seed"] = int(seed)
        return ScenarioConfig.from_dict(data)


def load_scenario(name: str) -> ScenarioConfig:
    """One of the bundled scenarios: mixed, diurnal, dominance, uniform, halves."""
    if name not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; choose from {SCENARIOS}")
    text = resources.files("teleposture.scenarios").joinpath(f"{name}.json").read_text()
    return ScenarioConfig.from_dict(json.loads(text))


def origin_prefixes(config: ScenarioConfig) -> dict[str, ipaddress.IPv4Network]:
    """Disjoint /8 per origin code (sorted), skipping the telescope's own /8."""
    codes = sorted({p.origin for p in config.populations})
    tel_octet = int(parse_telescope(config.telescope).network_address) >> 24
    out = {}
    octet = FIRST_ORIGIN_OCTET
    for code in codes:
        if octet == tel_octet:
            octet += 1
        if octet >= 100:
            raise ValueError("too many origins")
        out[code] = ipaddress.IPv4Network(f"{octet}.0.0.0/8")
        octet += 1
    return out


def origin_map(config: ScenarioConfig) -> OriginMap:
    return OriginMap([(net, code) for code, net in origin_prefixes(config).items()])


@dataclass
class Scenario:
    flows: FlowTable
    manifest: dict
    origin_map: OriginMap

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "flows": out / "flows.csv",
            "manifest": out / "manifest.json",
            "origin_map": out / "origin_map.csv",
        }
        self.flows.to_csv(paths["flows"])
        paths["manifest"].write_text(json.dumps(self.manifest, indent=1, sort_keys=True) + "\n")
        self.origin_map.to_csv(paths["origin_map"])
        return paths


def _profile(p: Population, T: int, rng: np.random.Generator) -> np.ndarray:
    hours = np.arange(T)
    wave = 1.0 - p.diurnal_amplitude * (1.0 + np.cos(2 * np.pi * (hours - p.trough_hour) / p.period_hours)) / 2.0
    z = np.zeros(T)
    if p.intensity.sd > 0:
        e = rng.standard_normal(T) * p.intensity.sd
        z[0] = e[0] / np.sqrt(1.0 - p.intensity.phi**2)
        for t in range(1, T):
            z[t] = p.intensity.phi * z[t - 1] + e[t]
    w = np.maximum(wave, 1e-9) * np.exp(z)
    return w / w.sum()


def _columns(n):
    return {
        "timestamp": np.zeros(n, np.int64),
        "src_ip": np.zeros(n, np.uint32),
        "dst_ip": np.zeros(n, np.uint32),
        "src_port": np.zeros(n, np.int32),
        "dst_port": np.zeros(n, np.int32),
        "protocol": np.zeros(n, np.int16),
        "ttl": np.zeros(n, np.int16),
        "tcp_flags": np.full(n, ABSENT, np.int16),
        "ip_length": np.zeros(n, np.int32),
        "icmp_type": np.full(n, ABSENT, np.int16),
    }


def _attack_flows(rng, src, n_per_source, hours_p, N, base, targeting, tcp_share):
    """Flows for one population: hours from the profile, destinations by targeting."""
    F = int(n_per_source.sum())
    cols = _columns(F)
    owner = np.repeat(np.arange(len(src)), n_per_source)
    T = len(hours_p)
    hour = rng.choice(T, size=F, p=hours_p)
    ts = hour * 3600 + rng.integers(0, 3600, F)
    lo, hi = targeting.bounds(N)
    if targeting.kind == "sweep":
        start = rng.choice(hi - lo, size=len(src), replace=False)
        order = np.lexsort((ts, owner))
        rank = np.empty(F, np.int64)
        first = np.r_[0, np.cumsum(n_per_source)[:-1]]
        rank[order] = np.arange(F) - np.repeat(first, n_per_source)
        dst = lo + (start[owner] + rank) % (hi - lo)
    else:
        dst = rng.integers(lo, hi, F)
    tcp = rng.random(F) < tcp_share
    cols["timestamp"] = ts
    cols["src_ip"] = src[owner]
    cols["dst_ip"] = (base + dst).astype(np.uint32)
    cols["src_port"] = rng.integers(1024, 65536, F)
    cols["dst_port"] = np.where(tcp, rng.choice(TCP_PORTS, F), rng.choice(UDP_PORTS, F))
    cols["protocol"] = np.where(tcp, TCP, UDP)
    cols["ttl"] = rng.integers(32, 129, F)
    cols["tcp_flags"] = np.where(tcp, SYN, ABSENT)
    cols["ip_length"] = np.where(tcp, 40, rng.integers(28, 512, F))
    return cols


def _noise_flows(rng, n, T, N, base, kind):
    cols = _columns(n)
    cols["timestamp"] = rng.integers(0, T * 3600, n)
    cols["src_ip"] = (int(NOISE_RANGE.network_address) + rng.integers(0, NOISE_RANGE.num_addresses, n)).astype(np.uint32)
    cols["dst_ip"] = (base + rng.integers(0, N, n)).astype(np.uint32)
    cols["ttl"] = rng.integers(32, 256, n)
    if kind == "backscatter":
        cols["src_port"] = rng.choice(TCP_PORTS, n)
        cols["dst_port"] = rng.integers(1024, 65536, n)
        cols["protocol"] = np.full(n, TCP)
        cols["tcp_flags"] = rng.choice(BACKSCATTER_FLAGS, n)
        cols["ip_length"] = np.full(n, 40)
    else:
        types = np.array(sorted(ICMP_REQUEST_TYPES)) if kind == "icmp_request" else ICMP_OTHER_TYPES
        cols["protocol"] = np.full(n, ICMP)
        cols["icmp_type"] = rng.choice(types, n)
        cols["ip_length"] = rng.integers(28, 100, n)
    return cols


def _share_table(codes_of_sources: list[str]) -> dict[str, float]:
    if not codes_of_sources:
        return {}
    codes, counts = np.unique(np.array(codes_of_sources, dtype=str), return_counts=True)
    total = counts.sum()
    return {str(c): float(k / total) for c, k in zip(codes, counts)}


def _dominant(shares: dict[str, float]) -> dict | None:
    if not shares:
        return None
    code = min(shares, key=lambda c: (-shares[c], c))
    return {"code": code, "share": shares[code]}


def generate(config: ScenarioConfig) -> Scenario:
    """Generate flows and manifest; identical config and seed give identical output."""
    rng = np.random.default_rng(config.seed)
    net = parse_telescope(config.telescope)
    N = net.num_addresses
    base = int(net.network_address)
    T = int(config.duration_hours)
    prefixes = origin_prefixes(config)

    # distinct source addresses per origin, handed out to populations in order
    need: dict[str, int] = {}
    for p in config.populations:
        need[p.origin] = need.get(p.origin, 0) + p.sources
    pools = {}
    for code in sorted(need):
        prefix = prefixes[code]
        if need[code] > prefix.num_addresses:
            raise ValueError(f"origin {code} cannot supply {need[code]} sources")
        pools[code] = int(prefix.network_address) + rng.choice(prefix.num_addresses, need[code], replace=False)
    taken = {code: 0 for code in need}

    parts, labels, tags = [], [], []
    pop_meta = []
    for k, p in enumerate(config.populations):
        src = pools[p.origin][taken[p.origin]:taken[p.origin] + p.sources].astype(np.uint32)
        taken[p.origin] += p.sources
        counts = p.flows.draw(rng, p.sources)
        prof = _profile(p, T, rng)
        cols = _attack_flows(rng, src, counts, prof, N, base, p.targeting, p.tcp_share)
        parts.append(cols)
        labels.append(np.full(len(cols["timestamp"]), 2, np.int8))
        tags.append(np.full(len(cols["timestamp"]), k, np.int32))
        lo, hi = p.targeting.bounds(N)
        pop_meta.append(
            {
                "origin": p.origin,
                "sources": p.sources,
                "flows": int(counts.sum()),
                "period_hours": p.period_hours if p.diurnal_amplitude > 0 else None,
                "tail_exponent": p.flows.alpha if p.flows.kind == "pareto" else None,
                "targeting": p.targeting.kind,
                "dst_index_range": [lo, hi],
                "source_prefix": str(prefixes[p.origin]),
            }
        )

    n_pop = len(config.populations)
    nz = config.noise
    if nz.misconfig_sources:
        msrc = (int(MISCONFIG_RANGE.network_address)
                + rng.choice(MISCONFIG_RANGE.num_addresses, nz.misconfig_sources, replace=False)).astype(np.uint32)
        mcounts = rng.integers(1, 10, nz.misconfig_sources)
        flat = np.full(T, 1.0 / T)
        cols = _attack_flows(rng, msrc, mcounts, flat, N, base, Targeting(), 0.5)
        parts.append(cols)
        labels.append(np.full(len(cols["timestamp"]), 2, np.int8))
        tags.append(np.full(len(cols["timestamp"]), n_pop, np.int32))
    for kind, rate, label in (
        ("backscatter", nz.backscatter_rate, 0),
        ("icmp_request", nz.icmp_rate, 1),
        ("icmp_other", nz.icmp_other_rate, 2),
    ):
        n = int(rng.poisson(rate * T)) if rate > 0 else 0
        if n:
            parts.append(_noise_flows(rng, n, T, N, base, kind))
            labels.append(np.full(n, label, np.int8))
            tags.append(np.full(n, -1, np.int32))

    if parts:
        cols = {c: np.concatenate([part[c] for part in parts]) for c in parts[0]}
        label = np.concatenate(labels)
        tag = np.concatenate(tags)
    else:
        cols, label, tag = _columns(0), np.zeros(0, np.int8), np.zeros(0, np.int32)
    order = np.lexsort(tuple(cols[c] for c in reversed(list(cols))))
    cols = {c: v[order] for c, v in cols.items()}
    label, tag = label[order], tag[order]
    flows = FlowTable(**cols, telescope=net)

    # ground truth from the emitted flows
    is_attack = tag >= 0
    hour = cols["timestamp"] // 3600
    for k, meta in enumerate(pop_meta):
        sel = tag == k
        pairs = np.unique(hour[sel] * (1 << 32) + cols["src_ip"][sel].astype(np.int64))
        meta["attackers_per_hour"] = np.bincount(pairs >> 32, minlength=T)[:T].astype(int).tolist()
    src_all = cols["src_ip"][is_attack]
    uniq, flow_counts = np.unique(src_all, return_counts=True)
    omap = OriginMap([(net_, code) for code, net_ in prefixes.items()])
    code_of = omap.lookup(uniq) if len(uniq) else np.zeros(0, dtype=object)
    shares_d1 = _share_table(list(code_of))
    shares_d2 = _share_table(list(code_of[flow_counts >= 10]))
    ips = np.array([str(ipaddress.IPv4Address(int(x))) for x in uniq[flow_counts < 10]], dtype=object)

    manifest = {
        "telescope": config.telescope,
        "duration_hours": T,
        "window_seconds": T * 3600,
        "seed": config.seed,
        "n_flows": int(len(label)),
        "populations": pop_meta,
        "noise": {
            "misconfig_sources": nz.misconfig_sources,
            "backscatter_flows": int((label == 0).sum()),
            "icmp_request_flows": int((label == 1).sum()),
            "icmp_other_flows": int(((tag == -1) & (label == 2)).sum()),
        },
        "origins": {code: str(net_) for code, net_ in prefixes.items()},
        "origin_shares": {"D1": shares_d1, "D2": shares_d2},
        "dominant_origin": {"D1": _dominant(shares_d1), "D2": _dominant(shares_d2)},
        "low_volume_sources": sorted(ips.tolist(), key=lambda s: int(ipaddress.IPv4Address(s))),
        "labels": {
            "backscatter": np.flatnonzero(label == 0).tolist(),
            "icmp_request": np.flatnonzero(label == 1).tolist(),
        },
    }
    return Scenario(flows=flows, manifest=manifest, origin_map=omap)


def flow_labels(manifest: dict, n_flows: int) -> np.ndarray:
    """Per-row class codes (0 backscatter, 1 ICMP request, 2 other) from a manifest."""
    out = np.full(n_flows, 2, dtype=np.int8)
    out[np.asarray(manifest["labels"]["backscatter"], dtype=np.int64)] = 0
    out[np.asarray(manifest["labels"]["icmp_request"], dtype=np.int64)] = 1
    return out
