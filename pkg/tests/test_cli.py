import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pandas as pd
import pytest

from teleposture.cli import derive_seed, main
from teleposture.pipeline import pipeline_steps, run_pipeline

CONFIG = Path(__file__).parent / "data" / "small_config.json"
REPORT_KEYS = {"version", "artifacts", "dominant_origin", "checks", "manifest"}


def digests(run: Path) -> dict[str, str]:
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(run.iterdir()) if p.is_file()}


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    run = tmp_path_factory.mktemp("run")
    run_pipeline(run, config=str(CONFIG), seed=3, threads=2)
    return run


def test_seed_derivation():
    assert derive_seed(0, "generate") == derive_seed(0, "generate")
    assert derive_seed(0, "generate") != derive_seed(0, "infer") != derive_seed(1, "infer")
    assert 0 <= derive_seed(7, "fitpl") < 2**63


class TestExitCodes:
    def test_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2
        assert "invalid choice" in capsys.readouterr().err

    def test_module_script_usage_error(self):
        proc = subprocess.run([sys.executable, "-m", "teleposture", "frobnicate"], capture_output=True, text=True)
        assert proc.returncode == 2

    def test_module_error_has_context(self, run_dir, tmp_path, capsys):
        rc = main(["classify", "--in", str(run_dir / "flows.csv"), "--telescope", "192.0.2.0/24", "--out", str(tmp_path)])
        assert rc == 1
        err = capsys.readouterr().err
        assert err.startswith("teleposture classify: error:") and "OutsideTelescopeError" in err

    def test_missing_file(self, tmp_path):
        assert main(["build", "--in", str(tmp_path / "none.csv"), "--telescope", "10.0.0.0/24"]) == 1

    def test_generate_needs_one_source(self, tmp_path):
        assert main(["generate", "--out", str(tmp_path)]) == 1
        assert main(["generate", "--scenario", "uniform", "--config", str(CONFIG), "--out", str(tmp_path)]) == 1

    def test_difference_only_for_garch(self, run_dir, tmp_path):
        rc = main(["fitmodel", "--series", str(run_dir / "posture_D1_H.csv"), "--difference", "--out", str(tmp_path)])
        assert rc == 1

    def test_report_on_empty_dir(self, tmp_path):
        assert main(["report", "--run", str(tmp_path)]) == 1


class TestSubcommands:
    def test_generate_twice_identical(self, tmp_path):
        for d in ("a", "b"):
            assert main(["generate", "--config", str(CONFIG), "--seed", "7", "--out", str(tmp_path / d)]) == 0
        assert digests(tmp_path / "a") == digests(tmp_path / "b")

    def test_classify_containment(self, run_dir):
        meta = json.loads((run_dir / "classify.json").read_text())
        assert meta["d2_flows"] <= meta["d1_flows"] and meta["d2_sources"] <= meta["d1_sources"]
        assert meta["backscatter"] + meta["icmp_request"] + meta["other"] == meta["flows"]
        d1 = pd.read_csv(run_dir / "d1.csv")
        d2 = pd.read_csv(run_dir / "d2.csv")
        assert len(d2) == meta["d2_flows"] <= len(d1) == meta["d1_flows"]
        assert set(d2.src_ip) <= set(d1.src_ip)

    def test_threads_do_not_change_outputs(self, run_dir, tmp_path):
        common = ["--in", str(run_dir / "d1.csv"), "--telescope", "10.2.0.0/20", "--b", "1,2"]
        for t in ("1", "3"):
            assert main(["infer", *common, "--threads", t, "--out", str(tmp_path / t)]) == 0
        assert digests(tmp_path / "1") == digests(tmp_path / "3")

    def test_cluster_method(self, run_dir, tmp_path):
        rc = main(["infer", "--in", str(run_dir / "d2.csv"), "--telescope", "10.2.0.0/20", "--B", "16", "--b", "2",
                   "--method", "cluster", "--samples", "5", "--out", str(tmp_path)])
        assert rc == 0
        rows = json.loads((tmp_path / "inference_D2.json").read_text())["rows"]
        assert {r["method"] for r in rows} == {"cluster"} and all(r["evaluated"] == 5 for r in rows)

    def test_dtw_pair_of_files(self, run_dir, tmp_path):
        rc = main(["dtw", "--series", str(run_dir / "posture_D1_H.csv"), "--column", "victims",
                   "--series-b", str(run_dir / "posture_D2_H.csv"), "--out", str(tmp_path)])
        assert rc == 0
        out = json.loads((tmp_path / "dtw.json").read_text())
        assert out["a"] == out["b"] == "victims"
        assert 0 <= out["distance"] <= out["diagonal_cost"]


class TestPipeline:
    def test_report_schema(self, run_dir):
        report = json.loads((run_dir / "report.json").read_text())
        assert set(report) == REPORT_KEYS
        assert {"classify", "build_D1_H", "sweep_D1_m", "model_sarima", "model_armagarch", "forecast",
                "inference_D1", "dtw", "powerlaw_D1_m", "powerlaw_D2_sources"} <= set(report["artifacts"])
        for tag in ("D1", "D2"):
            check = report["checks"][f"dominant_origin_{tag}"]
            assert check["code_matches"] and check["share_error"] <= 0.02
        assert report["artifacts"]["build_D1_H"]["period"] == 24

    def test_rerun_is_byte_identical_and_inputs_untouched(self, run_dir):
        before = digests(run_dir)
        manifest = json.loads((run_dir / "manifest.json").read_text())
        for step in pipeline_steps(run_dir, None, str(CONFIG), 3, 2, manifest["telescope"], manifest["duration_hours"]):
            assert main(step) == 0
            assert digests(run_dir) == before, step[0]

    def test_second_run_identical(self, run_dir, tmp_path):
        run_pipeline(tmp_path, config=str(CONFIG), seed=3, threads=1)
        assert digests(tmp_path) == digests(run_dir)
