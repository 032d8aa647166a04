"""Run every CLI subcommand in order over one run directory."""

from __future__ import annotations

import json
from pathlib import Path

from .cli import main


def pipeline_steps(run: Path, scenario: str | None, config: str | None, seed: int, threads: int,
                   telescope: str, hours: int) -> list[list[str]]:
    r = str(run)
    common = ["--seed", str(seed), "--threads", str(threads)]
    attack = ["--telescope", telescope, "--hours", str(hours), "--out", r]
    return [
        ["classify", "--in", f"{r}/flows.csv", *attack, *common],
        ["build", "--in", f"{r}/d1.csv", "--resolution", "H", "--origin-map", f"{r}/origin_map.csv", *attack, *common],
        ["build", "--in", f"{r}/d2.csv", "--resolution", "H", "--origin-map", f"{r}/origin_map.csv", *attack, *common],
        ["build", "--in", f"{r}/d1.csv", "--resolution", "m", *attack, *common],
        ["sweep", "--in", f"{r}/d1.csv", "--resolution", "m", *attack, *common],
        ["fitpl", "--sweep", f"{r}/sweep_D1_m.csv", "--out", r, *common],
        ["fitpl", "--flows", f"{r}/d2.csv", "--telescope", telescope, "--hours", str(hours), "--out", r, *common],
        ["fitmodel", "--series", f"{r}/posture_D1_H.csv", "--column", "attackers", "--family", "sarima",
         "--holdout", "106", "--out", r, *common],
        ["fitmodel", "--series", f"{r}/sweep_D1_m.csv", "--tau", "0.8", "--family", "armagarch",
         "--difference",
         "--out", r, *common],
        ["forecast", "--series", f"{r}/posture_D1_H.csv", "--column", "attackers",
         "--model", f"{r}/model_sarima.json", "--out", r, *common],
        ["dtw", "--series", f"{r}/origins_D1_H.csv", "--out", r, *common],
        ["infer", "--in", f"{r}/d1.csv", "--B", "16", *attack, *common],
        ["report", "--run", r, *common],
    ]


def run_pipeline(run_dir, scenario: str | None = "dominance", config: str | None = None, seed: int = 0,
                 threads: int = 0) -> Path:
    """generate -> classify -> build -> sweep -> fitpl -> fitmodel -> forecast -> dtw -> infer -> report."""
    run = Path(run_dir)
    gen = ["generate", "--out", str(run), "--seed", str(seed), "--threads", str(threads)]
    gen += ["--config", config] if config else ["--scenario", scenario]
    if main(gen) != 0:
        raise RuntimeError("generate failed")
    manifest = json.loads((run / "manifest.json").read_text())
    for step in pipeline_steps(run, scenario, config, seed, threads, manifest["telescope"], manifest["duration_hours"]):
        if main(step) != 0:
            raise RuntimeError(f"step failed: {' '.join(step[:1])}")
    return run / "report.json"
