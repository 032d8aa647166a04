import ipaddress
import json

import numpy as np
import pytest

from teleposture.flows import ICMP, ICMP_REQUEST_TYPES, SYN_ACK, RST, FlowClass, classify_flows, extract_d1, extract_d2, parse_flows
from teleposture.posture import aggregate_by_origin
from teleposture.stats import powerlaw_fit
from teleposture.synth import SCENARIOS, ScenarioConfig, flow_labels, generate, load_scenario

SMALL = {
    "telescope": "10.1.0.0/20",
    "duration_hours": 48,
    "seed": 5,
    "populations": [
        {"origin": "A", "sources": 150, "diurnal_amplitude": 0.6, "flows": {"kind": "pareto", "alpha": 2.5, "minimum": 1}},
        {"origin": "B", "sources": 50, "flows": {"kind": "fixed", "count": 12}, "targeting": {"kind": "sweep"}},
    ],
    "noise": {"misconfig_sources": 40, "backscatter_rate": 5, "icmp_rate": 3, "icmp_other_rate": 2},
}


@pytest.fixture(scope="module")
def small():
    return generate(ScenarioConfig.from_dict(SMALL))


class TestDeterminism:
    def test_byte_identical(self, tmp_path):
        cfg = ScenarioConfig.from_dict(SMALL)
        a = generate(cfg).write(tmp_path / "a")
        b = generate(cfg).write(tmp_path / "b")
        for key in a:
            assert a[key].read_bytes() == b[key].read_bytes(), key

    def test_seed_changes_output(self, small):
        other = generate(ScenarioConfig.from_dict(SMALL).with_seed(6))
        assert not other.flows.equals(small.flows)

    def test_config_round_trip(self, tmp_path):
        cfg = ScenarioConfig.from_dict(SMALL)
        path = tmp_path / "c.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert ScenarioConfig.from_json(path) == cfg


class TestInvariants:
    def test_dst_and_time_inside(self, small):
        net = ipaddress.IPv4Network(SMALL["telescope"])
        lo = int(net.network_address)
        f = small.flows
        assert np.all((f.dst_ip >= lo) & (f.dst_ip < lo + net.num_addresses))
        assert np.all((f.timestamp >= 0) & (f.timestamp < SMALL["duration_hours"] * 3600))

    def test_csv_parses_back(self, small, tmp_path):
        path = tmp_path / "flows.csv"
        small.flows.to_csv(path)
        assert parse_flows(path, SMALL["telescope"]).equals(small.flows)

    def test_label_closure(self, small):
        got = classify_flows(small.flows)
        assert np.array_equal(got, flow_labels(small.manifest, len(small.flows)))

    def test_noise_flow_contents(self, small):
        f = small.flows
        labels = flow_labels(small.manifest, len(f))
        flags = f.tcp_flags[labels == FlowClass.BACKSCATTER]
        assert np.all((flags == SYN_ACK) | (flags & RST > 0))
        assert set(f.icmp_type[labels == FlowClass.ICMP_REQUEST].tolist()) <= set(ICMP_REQUEST_TYPES)
        assert np.any((f.protocol == ICMP) & (labels == FlowClass.OTHER))

    def test_low_volume_sources(self, small):
        d1 = extract_d1(small.flows, window_seconds=small.manifest["window_seconds"])
        src, counts = np.unique(d1.src_ip, return_counts=True)
        low = {str(ipaddress.IPv4Address(int(s))) for s in src[counts < 10]}
        assert low == set(small.manifest["low_volume_sources"])
        removed = set(src.tolist()) - set(extract_d2(d1).sources().tolist())
        assert {str(ipaddress.IPv4Address(int(s))) for s in removed} == low

    def test_attackers_per_hour(self, small):
        d1 = extract_d1(small.flows, window_seconds=small.manifest["window_seconds"])
        agg = aggregate_by_origin(d1, small.origin_map, "H")
        for pop in small.manifest["populations"]:
            assert agg.series[pop["origin"]].tolist() == pop["attackers_per_hour"]

    def test_sweep_targeting_hits_distinct_addresses(self, small):
        d1 = extract_d1(small.flows, window_seconds=small.manifest["window_seconds"])
        prefix = ipaddress.IPv4Network(small.manifest["populations"][1]["source_prefix"])
        mask = (d1.src_ip >= int(prefix.network_address)) & (d1.src_ip <= int(prefix.broadcast_address))
        for s in np.unique(d1.src_ip[mask]):
            dst = d1.dst_index[d1.src_ip == s]
            assert len(np.unique(dst)) == len(dst) == 12

    def test_shares_sum_to_one(self, small):
        for tag in ("D1", "D2"):
            assert sum(small.manifest["origin_shares"][tag].values()) == pytest.approx(1.0)


class TestEdgeConfigs:
    def test_zero_populations(self):
        sc = generate(ScenarioConfig("10.0.0.0/24", 10))
        assert len(sc.flows) == 0
        assert sc.manifest["populations"] == [] and sc.manifest["n_flows"] == 0
        assert sc.manifest["dominant_origin"] == {"D1": None, "D2": None}

    def test_only_misconfig_noise(self):
        sc = generate(ScenarioConfig("10.0.0.0/24", 10, seed=1, noise={"misconfig_sources": 300}))
        d1 = extract_d1(sc.flows, window_seconds=sc.manifest["window_seconds"])
        assert len(d1) > 0
        assert len(extract_d2(d1)) == 0

    def test_pareto_tail_recovered(self):
        cfg = ScenarioConfig("10.0.0.0/16", 24, seed=3, populations=[
            {"origin": "P", "sources": 8000, "flows": {"kind": "pareto", "alpha": 2.5, "minimum": 10}}])
        sc = generate(cfg)
        _, counts = np.unique(sc.flows.src_ip, return_counts=True)
        fit = powerlaw_fit(counts, n_bootstrap=1, seed=0)
        # three asymptotic standard errors of the tail MLE
        assert abs(fit.alpha - sc.manifest["populations"][0]["tail_exponent"]) <= 3 * (fit.alpha - 1) / np.sqrt(fit.tail_count)

    @pytest.mark.parametrize(
        "change",
        [
            {"duration_hours": 0},
            {"duration_hours": 24, "populations": [{"origin": "A", "sources": 5, "diurnal_amplitude": 0.5}]},
            {"populations": [{"origin": "A", "sources": 300, "targeting": {"kind": "sweep"}}]},
            {"populations": [{"origin": "A", "sources": -1}]},
            {"populations": [{"origin": "others", "sources": 1}]},
            {"populations": [{"origin": "A", "sources": 1, "flows": {"kind": "pareto", "alpha": 0.9}}]},
            {"populations": [{"origin": "A", "sources": 1, "targeting": {"kind": "range", "start": 0.5, "stop": 0.5}}]},
            {"noise": {"backscatter_rate": -1}},
            {"telescope": "10.0.0.0/4"},
        ],
    )
    def test_invalid(self, change):
        data = {"telescope": "10.0.0.0/24", "duration_hours": 48, **change}
        with pytest.raises(ValueError):
            generate(ScenarioConfig.from_dict(data))


@pytest.mark.parametrize("name", SCENARIOS)
def test_bundled_scenarios_load(name):
    cfg = load_scenario(name)
    assert cfg.duration_hours >= 48


def test_unknown_scenario():
    with pytest.raises(ValueError):
        load_scenario("nope")
