"""Flow ingestion: parse telescope flow CSVs, classify flows, derive D1/D2.

Flows are held column-wise in a :class:`FlowTable` (numpy arrays) so that a
month of /16 traffic fits comfortably in memory; :class:`FlowRecord` is the
per-row view.

CSV layout (header optional)::

    timestamp,src_ip,dst_ip,src_port,dst_port,protocol,ttl,tcp_flags,ip_length,icmp_type
"""

from __future__ import annotations

import enum
import io
import ipaddress
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np
import pandas as pd

from .errors import FlowParseError, OutsideTelescopeError

COLUMNS = [
    "timestamp",
    "src_ip",
    "dst_ip",
    "src_port",
    "dst_port",
    "protocol",
    "ttl",
    "tcp_flags",
    "ip_length",
    "icmp_type",
]

TCP, UDP, ICMP = 6, 17, 1
PROTOCOL_NAMES = {TCP: "TCP", UDP: "UDP", ICMP: "ICMP"}
PROTOCOL_CODES = {v: k for k, v in PROTOCOL_NAMES.items()}

FIN, SYN, RST, PSH, ACK = 0x01, 0x02, 0x04, 0x08, 0x10
SYN_ACK = SYN | ACK
ICMP_REQUEST_TYPES = frozenset({0, 3, 4, 5, 11, 12, 14, 16, 18})

ABSENT = -1  # sentinel for tcp_flags / icmp_type in columnar storage


class FlowClass(enum.IntEnum):
    BACKSCATTER = 0
    ICMP_REQUEST = 1
    OTHER = 2


def parse_telescope(cidr) -> ipaddress.IPv4Network:
    """Parse a telescope prefix, enforcing a prefix length in [8, 24]."""
    net = cidr if isinstance(cidr, ipaddress.IPv4Network) else ipaddress.IPv4Network(str(cidr), strict=True)
    if not 8 <= net.prefixlen <= 24:
        raise ValueError(f"telescope prefix length must be in [8, 24], got /{net.prefixlen}")
    return net


def ip_to_int(values: Iterable[str]) -> np.ndarray:
    return np.array([int(ipaddress.IPv4Address(v)) for v in values], dtype=np.uint32)


def int_to_ip(values: np.ndarray) -> np.ndarray:
    """Vectorised uint32 -> dotted-quad strings (object array)."""
    values = np.asarray(values, dtype=np.uint32)
    uniq, inv = np.unique(values, return_inverse=True)
    text = np.array([str(ipaddress.IPv4Address(int(v))) for v in uniq], dtype=object)
    return text[inv.reshape(-1)] if len(values) else np.array([], dtype=object)


@dataclass(frozen=True)
class FlowRecord:
    timestamp: int
    src_ip: ipaddress.IPv4Address
    dst_ip: ipaddress.IPv4Address
    src_port: int
    dst_port: int
    protocol: int
    ttl: int
    tcp_flags: int | None
    ip_length: int
    icmp_type: int | None = None

    def __post_init__(self):
        if self.tcp_flags is not None and self.protocol != TCP:
            raise ValueError("tcp_flags only allowed for TCP")
        if self.icmp_type is not None and self.protocol != ICMP:
            raise ValueError("icmp_type only allowed for ICMP")

    @property
    def protocol_name(self) -> str:
        return PROTOCOL_NAMES.get(self.protocol, str(self.protocol))


@dataclass
class FlowTable:
    """Column-oriented collection of flows, in file order."""

    timestamp: np.ndarray
    src_ip: np.ndarray
    dst_ip: np.ndarray
    src_port: np.ndarray
    dst_port: np.ndarray
    protocol: np.ndarray
    ttl: np.ndarray
    tcp_flags: np.ndarray
    ip_length: np.ndarray
    icmp_type: np.ndarray
    telescope: ipaddress.IPv4Network | None = None

    _dtypes = {
        "timestamp": np.int64,
        "src_ip": np.uint32,
        "dst_ip": np.uint32,
        "src_port": np.int32,
        "dst_port": np.int32,
        "protocol": np.int16,
        "ttl": np.int16,
        "tcp_flags": np.int16,
        "ip_length": np.int32,
        "icmp_type": np.int16,
    }

    def __post_init__(self):
        for name, dtype in self._dtypes.items():
            setattr(self, name, np.ascontiguousarray(getattr(self, name), dtype=dtype))
        n = len(self.timestamp)
        if any(len(getattr(self, c)) != n for c in COLUMNS):
            raise ValueError("flow columns must have equal length")

    @classmethod
    def empty(cls, telescope=None) -> "FlowTable":
        return cls(*[np.zeros(0, dtype=d) for d in cls._dtypes.values()], telescope=telescope)

    @classmethod
    def from_records(cls, records: Iterable[FlowRecord], telescope=None) -> "FlowTable":
        records = list(records)
        if not records:
            return cls.empty(telescope)
        cols = {c: [] for c in COLUMNS}
        for r in records:
            cols["timestamp"].append(r.timestamp)
            cols["src_ip"].append(int(r.src_ip))
            cols["dst_ip"].append(int(r.dst_ip))
            cols["src_port"].append(r.src_port)
            cols["dst_port"].append(r.dst_port)
            cols["protocol"].append(r.protocol)
            cols["ttl"].append(r.ttl)
            cols["tcp_flags"].append(ABSENT if r.tcp_flags is None else r.tcp_flags)
            cols["ip_length"].append(r.ip_length)
            cols["icmp_type"].append(ABSENT if r.icmp_type is None else r.icmp_type)
        return cls(**{c: np.array(v) for c, v in cols.items()}, telescope=telescope)

    @classmethod
    def concat(cls, tables: list["FlowTable"]) -> "FlowTable":
        """Deterministic merge of independently parsed partitions, in list order."""
        if not tables:
            return cls.empty()
        telescopes = {t.telescope for t in tables if t.telescope is not None}
        if len(telescopes) > 1:
            raise ValueError("cannot merge tables bound to different telescopes")
        tel = telescopes.pop() if telescopes else None
        return cls(**{c: np.concatenate([getattr(t, c) for t in tables]) for c in COLUMNS}, telescope=tel)

    def __len__(self) -> int:
        return len(self.timestamp)

    def __getitem__(self, i: int) -> FlowRecord:
        flags = int(self.tcp_flags[i])
        icmp = int(self.icmp_type[i])
        return FlowRecord(
            timestamp=int(self.timestamp[i]),
            src_ip=ipaddress.IPv4Address(int(self.src_ip[i])),
            dst_ip=ipaddress.IPv4Address(int(self.dst_ip[i])),
            src_port=int(self.src_port[i]),
            dst_port=int(self.dst_port[i]),
            protocol=int(self.protocol[i]),
            ttl=int(self.ttl[i]),
            tcp_flags=None if flags == ABSENT else flags,
            ip_length=int(self.ip_length[i]),
            icmp_type=None if icmp == ABSENT else icmp,
        )

    def __iter__(self) -> Iterator[FlowRecord]:
        for i in range(len(self)):
            yield self[i]

    def take(self, index) -> "FlowTable":
        return FlowTable(**{c: getattr(self, c)[index] for c in COLUMNS}, telescope=self.telescope)

    def equals(self, other: "FlowTable") -> bool:
        return len(self) == len(other) and all(
            np.array_equal(getattr(self, c), getattr(other, c)) for c in COLUMNS
        )

    def to_frame(self) -> pd.DataFrame:
        proto = self.protocol.astype(np.int64)
        names = np.array([PROTOCOL_NAMES.get(int(p), str(int(p))) for p in np.unique(proto)], dtype=object)
        proto_text = names[np.searchsorted(np.unique(proto), proto)] if len(proto) else np.array([], dtype=object)

        def optional(col):
            out = col.astype(np.int64).astype(str).astype(object)
            out[col == ABSENT] = ""
            return out

        return pd.DataFrame(
            {
                "timestamp": self.timestamp,
                "src_ip": int_to_ip(self.src_ip),
                "dst_ip": int_to_ip(self.dst_ip),
                "src_port": self.src_port,
                "dst_port": self.dst_port,
                "protocol": proto_text,
                "ttl": self.ttl,
                "tcp_flags": optional(self.tcp_flags),
                "ip_length": self.ip_length,
                "icmp_type": optional(self.icmp_type),
            },
            columns=COLUMNS,
        )

    def to_csv(self, path_or_buf, header: bool = True) -> None:
        self.to_frame().to_csv(path_or_buf, index=False, header=header, lineterminator="\n")


# --------------------------------------------------------------------------- parsing

_PANDAS_LINE = re.compile(r"line (\d+)")


def _read_raw(source) -> pd.DataFrame:
    kwargs = dict(
        header=None,
        names=COLUMNS,
        dtype=str,
        keep_default_na=False,
        na_values=[],
        skip_blank_lines=False,
        engine="c",
    )
    if isinstance(source, (list, tuple)):
        source = io.StringIO("\n".join(line.rstrip("\n") for line in source) + "\n")
    try:
        return pd.read_csv(source, **kwargs)
    except pd.errors.EmptyDataError:
        return pd.DataFrame(columns=COLUMNS)
    except pd.errors.ParserError as exc:
        m = _PANDAS_LINE.search(str(exc))
        raise FlowParseError(int(m.group(1)) if m else 0, "wrong number of fields") from exc


def _int_column(frame, name, lines, lo, hi, required_mask=None, forbidden_mask=None):
    raw = frame[name].fillna("").astype(str).str.strip()
    empty = (raw == "").to_numpy()
    values = pd.to_numeric(raw.where(~empty, None), errors="coerce")
    arr = values.to_numpy(dtype=float, na_value=np.nan)
    bad = (~empty) & (np.isnan(arr) | (arr != np.floor(arr)) | (arr < lo) | (arr > hi))
    if required_mask is None:
        bad |= empty
    else:
        bad |= empty & required_mask
    if forbidden_mask is not None:
        bad |= (~empty) & forbidden_mask
    if bad.any():
        k = int(np.argmax(bad))
        raise FlowParseError(int(lines[k]), f"invalid {name} {raw.iloc[k]!r}")
    out = np.where(empty, ABSENT, np.nan_to_num(arr)).astype(np.int64)
    return out


def _ip_column(frame, name, lines):
    raw = frame[name].fillna("").astype(str).str.strip()
    codes, uniques = pd.factorize(raw, sort=False)
    values = np.empty(len(uniques), dtype=np.uint32)
    for k, text in enumerate(uniques):
        try:
            values[k] = int(ipaddress.IPv4Address(text))
        except ValueError:
            row = int(np.argmax(codes == k))
            raise FlowParseError(int(lines[row]), f"invalid {name} {text!r}") from None
    return values[codes] if len(codes) else np.zeros(0, dtype=np.uint32)


def parse_flows(source, telescope) -> FlowTable:
    """Parse a flow CSV (path, text stream, or list of lines) into a :class:`FlowTable`.

    Records keep file order.  Any flow whose destination lies outside
    ``telescope`` is rejected with :class:`OutsideTelescopeError`; malformed
    lines raise :class:`FlowParseError` carrying the 1-based line number.
    """
    net = parse_telescope(telescope)
    frame = _read_raw(source)
    lines = np.arange(1, len(frame) + 1)
    if len(frame) and str(frame.iloc[0, 0]).strip().lower() == "timestamp":
        frame = frame.iloc[1:]
        lines = lines[1:]
    blank = (frame.fillna("").astype(str).apply(lambda c: c.str.strip()) == "").all(axis=1).to_numpy()
    if blank.any():
        frame = frame.loc[~blank]
        lines = lines[~blank]
    if len(frame) == 0:
        return FlowTable.empty(net)

    proto_raw = frame["protocol"].fillna("").astype(str).str.strip().str.upper()
    proto = proto_raw.map(PROTOCOL_CODES)
    numeric = pd.to_numeric(proto_raw.where(proto.isna(), None), errors="coerce")
    proto = proto.fillna(numeric)
    bad = proto.isna().to_numpy() | ~proto.fillna(-1).between(0, 255).to_numpy()
    if bad.any():
        k = int(np.argmax(bad))
        raise FlowParseError(int(lines[k]), f"invalid protocol {proto_raw.iloc[k]!r}")
    protocol = proto.to_numpy(dtype=np.int64)
    is_tcp = protocol == TCP
    is_icmp = protocol == ICMP

    flags = _int_column(frame, "tcp_flags", lines, 0, 255, required_mask=is_tcp)
    nonzero_foreign = (~is_tcp) & (flags > 0)
    if nonzero_foreign.any():
        k = int(np.argmax(nonzero_foreign))
        raise FlowParseError(int(lines[k]), "tcp_flags set on a non-TCP flow")
    flags[~is_tcp] = ABSENT

    table = FlowTable(
        timestamp=_int_column(frame, "timestamp", lines, 0, 2**62),
        src_ip=_ip_column(frame, "src_ip", lines),
        dst_ip=_ip_column(frame, "dst_ip", lines),
        src_port=_int_column(frame, "src_port", lines, 0, 65535),
        dst_port=_int_column(frame, "dst_port", lines, 0, 65535),
        protocol=protocol,
        ttl=_int_column(frame, "ttl", lines, 0, 255),
        tcp_flags=flags,
        ip_length=_int_column(frame, "ip_length", lines, 0, 2**31 - 1),
        icmp_type=_int_column(frame, "icmp_type", lines, 0, 255, required_mask=is_icmp, forbidden_mask=~is_icmp),
        telescope=net,
    )
    base = int(net.network_address)
    outside = (table.dst_ip.astype(np.int64) - base < 0) | (table.dst_ip.astype(np.int64) - base >= net.num_addresses)
    if outside.any():
        idx = np.flatnonzero(outside)
        raise OutsideTelescopeError(
            [str(ipaddress.IPv4Address(int(table.dst_ip[i]))) for i in idx],
            [int(lines[i]) for i in idx],
            str(net),
        )
    return table


# --------------------------------------------------------------------------- classification

def classify_flow(f: FlowRecord) -> FlowClass:
    if f.protocol == TCP:
        flags = f.tcp_flags or 0
        if flags == SYN_ACK or flags & RST:
            return FlowClass.BACKSCATTER
        return FlowClass.OTHER
    if f.protocol == ICMP and f.icmp_type in ICMP_REQUEST_TYPES:
        return FlowClass.ICMP_REQUEST
    return FlowClass.OTHER


def classify_flows(table: FlowTable) -> np.ndarray:
    """Vectorised :func:`classify_flow`; returns an int8 array of FlowClass codes."""
    tcp = table.protocol == TCP
    flags = np.where(tcp, table.tcp_flags, 0)
    back = tcp & ((flags == SYN_ACK) | ((flags & RST) != 0))
    icmp_req = (table.protocol == ICMP) & np.isin(table.icmp_type, list(ICMP_REQUEST_TYPES))
    out = np.full(len(table), FlowClass.OTHER, dtype=np.int8)
    out[back] = FlowClass.BACKSCATTER
    out[icmp_req] = FlowClass.ICMP_REQUEST
    return out


# --------------------------------------------------------------------------- attack sets

@dataclass
class AttackSet:
    """TCP/UDP attack flows bound to a telescope, over the window [0, window_seconds)."""

    flows: FlowTable
    telescope: ipaddress.IPv4Network
    window_seconds: int
    dataset_tag: str = "D1"
    _dst_index: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.telescope = parse_telescope(self.telescope)
        if self.dataset_tag not in ("D1", "D2"):
            raise ValueError(f"dataset_tag must be D1 or D2, got {self.dataset_tag!r}")
        f = self.flows
        f.telescope = self.telescope
        if len(f):
            if not np.isin(f.protocol, (TCP, UDP)).all():
                raise ValueError("attack sets hold TCP/UDP flows only")
            if f.timestamp.min() < 0 or f.timestamp.max() >= self.window_seconds:
                raise ValueError("flow timestamps fall outside the analysis window")
            idx = self.dst_index
            if idx.min() < 0 or idx.max() >= self.size:
                raise ValueError("flow destination outside telescope")

    @property
    def size(self) -> int:
        """Number of telescope addresses, N."""
        return self.telescope.num_addresses

    @property
    def dst_index(self) -> np.ndarray:
        if self._dst_index is None:
            self._dst_index = (self.flows.dst_ip.astype(np.int64) - int(self.telescope.network_address)).astype(np.int64)
        return self._dst_index

    @property
    def timestamp(self) -> np.ndarray:
        return self.flows.timestamp

    @property
    def src_ip(self) -> np.ndarray:
        return self.flows.src_ip

    def __len__(self) -> int:
        return len(self.flows)

    def sources(self) -> np.ndarray:
        return np.unique(self.flows.src_ip)

    def subset(self, index) -> "AttackSet":
        return AttackSet(self.flows.take(index), self.telescope, self.window_seconds, self.dataset_tag)

    def equals(self, other: "AttackSet") -> bool:
        return (
            self.telescope == other.telescope
            and self.window_seconds == other.window_seconds
            and self.dataset_tag == other.dataset_tag
            and self.flows.equals(other.flows)
        )

    def to_csv(self, path_or_buf, header: bool = True) -> None:
        self.flows.to_csv(path_or_buf, header=header)

    @classmethod
    def from_csv(cls, source, telescope, window_seconds: int | None = None, dataset_tag: str = "D1") -> "AttackSet":
        """Re-read a D1/D2 file written by :meth:`to_csv`."""
        table = parse_flows(source, telescope)
        return cls(table, table.telescope, default_window(table, window_seconds), dataset_tag)

    @classmethod
    def merge(cls, parts: list["AttackSet"]) -> "AttackSet":
        if not parts:
            raise ValueError("nothing to merge")
        first = parts[0]
        if any(p.telescope != first.telescope or p.dataset_tag != first.dataset_tag for p in parts):
            raise ValueError("parts disagree on telescope or dataset tag")
        window = max(p.window_seconds for p in parts)
        return cls(FlowTable.concat([p.flows for p in parts]), first.telescope, window, first.dataset_tag)


def default_window(table: FlowTable, window_seconds: int | None = None) -> int:
    """Explicit window, else the smallest whole number of hours covering the data."""
    if window_seconds is not None:
        return int(window_seconds)
    if len(table) == 0:
        return 3600
    return int(math.ceil((int(table.timestamp.max()) + 1) / 3600) * 3600)


def extract_d1(flows: FlowTable, telescope=None, window_seconds: int | None = None) -> AttackSet:
    """Keep the TCP and UDP flows classified as Other."""
    tel = parse_telescope(telescope if telescope is not None else flows.telescope)
    cls = classify_flows(flows)
    keep = (cls == FlowClass.OTHER) & np.isin(flows.protocol, (TCP, UDP))
    return AttackSet(flows.take(keep), tel, default_window(flows, window_seconds), "D1")


def extract_d2(d1: AttackSet, min_flows: int = 10) -> AttackSet:
    """Drop every source that initiates fewer than ``min_flows`` flows over the window."""
    if min_flows < 1:
        raise ValueError("min_flows must be >= 1; a zero threshold filters nothing")
    src = d1.flows.src_ip
    if len(src) == 0:
        return AttackSet(d1.flows, d1.telescope, d1.window_seconds, "D2")
    uniq, inv, counts = np.unique(src, return_inverse=True, return_counts=True)
    keep = counts[inv] >= min_flows
    return AttackSet(d1.flows.take(keep), d1.telescope, d1.window_seconds, "D2")
