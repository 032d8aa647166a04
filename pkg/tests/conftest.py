"""Shared builders for small hand-made and randomised attack sets."""

from __future__ import annotations

import ipaddress

import numpy as np
import pytest

from teleposture.flows import TCP, UDP, AttackSet, FlowTable
from teleposture.synth import generate, load_scenario

TELESCOPE = ipaddress.IPv4Network("10.0.0.0/24")


def attack_set(timestamps, src, dst_index, telescope=TELESCOPE, window_seconds=None, protocol=UDP, tag="D1"):
    """AttackSet from parallel lists; sources are small ints mapped into 203.0.113.0/24."""
    ts = np.asarray(timestamps, dtype=np.int64)
    n = len(ts)
    src_ip = int(ipaddress.IPv4Address("203.0.113.0")) + np.asarray(src, dtype=np.int64)
    dst_ip = int(telescope.network_address) + np.asarray(dst_index, dtype=np.int64)
    proto = np.full(n, protocol)
    table = FlowTable(
        timestamp=ts,
        src_ip=src_ip,
        dst_ip=dst_ip,
        src_port=np.full(n, 40000),
        dst_port=np.full(n, 80),
        protocol=proto,
        ttl=np.full(n, 64),
        tcp_flags=np.where(proto == TCP, 2, -1),
        ip_length=np.full(n, 40),
        icmp_type=np.full(n, -1),
        telescope=telescope,
    )
    if window_seconds is None:
        window_seconds = int((ts.max() // 3600 + 1) * 3600) if n else 3600
    return AttackSet(table, telescope, window_seconds, tag)


def random_attack_set(rng, n_flows, hours=6, n_sources=30, telescope=TELESCOPE, victims=None):
    size = telescope.num_addresses if victims is None else victims
    ts = np.sort(rng.integers(0, hours * 3600, n_flows))
    return attack_set(ts, rng.integers(0, n_sources, n_flows), rng.integers(0, size, n_flows), telescope,
                      window_seconds=hours * 3600)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def scenario_cache():
    """Generated bundled scenarios, built once per session on demand."""
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = generate(load_scenario(name))
        return cache[name]

    return get


# one summary line per acceptance criterion, printed after the run
_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        detail = "; ".join(str(v) for k, v in report.user_properties if k == "detail")
        _ACCEPTANCE[name] = ("PASS" if report.outcome == "passed" else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        status, detail = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{status} {name} {detail}".rstrip())
