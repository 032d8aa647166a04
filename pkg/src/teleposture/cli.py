"""Command-line front end: generate -> classify -> build -> analyse -> report.

Every stochastic step takes its seed from one master ``--seed`` via
``derive_seed(master, subcommand)`` (SHA-256 of ``"<master>:<subcommand>"``),
so a whole run directory is reproducible from a single number.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import re
import sys
import warnings
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .errors import BudgetExceeded, DegenerateInputError, FitFailure, FlowParseError, OutsideTelescopeError
from .flows import FlowClass, AttackSet, classify_flows, default_window, extract_d1, extract_d2, parse_flows
from .inference import TARGETS, cluster_sample, enumerate_combinations, partition_blocks, summary_frame
from .posture import OriginMap, aggregate_by_origin, build_series, cumulative_victims, detect_period
from .stats import adf_test, dtw, powerlaw_fit
from .sweeptime import DEFAULT_TAUS, read_sweep_csv, sweep_time_series, write_sweep_csv
from .synth import ScenarioConfig, generate, load_scenario, SCENARIOS
from .tsmodels import ModelSpec, ArmaGarchFit, SarimaFit, rolling_forecast, select_model

SUBCOMMANDS = ("generate", "classify", "build", "sweep", "fitpl", "fitmodel", "forecast", "dtw", "infer", "report")

DEFAULT_SARIMA_GRID = ("(1,0,0)(0,1,1)", "(1,0,1)(0,1,1)", "(2,0,0)(0,1,1)", "(1,0,0)(1,1,1)")
_ORDER = re.compile(r"^\((\d+),(\d+),(\d+)\)\((\d+),(\d+),(\d+)\)$")
_MODULE_ERRORS = (
    ValueError,
    RuntimeError,
    KeyError,
    OSError,
    FlowParseError,
    OutsideTelescopeError,
    DegenerateInputError,
    FitFailure,
    BudgetExceeded,
)


class CliError(Exception):
    """A user-facing failure that is not a bug."""


def derive_seed(master: int, name: str) -> int:
    digest = hashlib.sha256(f"{master}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_clean(obj), indent=1, sort_keys=True, allow_nan=False) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _window(args, input_path: Path) -> int | None:
    """Analysis window: --hours, else classify.json beside the input, else inferred."""
    if getattr(args, "hours", None):
        return int(args.hours) * 3600
    meta = input_path.parent / "classify.json"
    if meta.exists():
        return int(json.loads(meta.read_text())["window_seconds"])
    return None


def _tag(args, input_path: Path) -> str:
    if getattr(args, "tag", None):
        return args.tag
    stem = input_path.stem.upper()
    return stem if stem in ("D1", "D2") else "D1"


def _attack_set(args) -> tuple[AttackSet, str]:
    path = Path(args.input)
    tag = _tag(args, path)
    table = parse_flows(path, args.telescope)
    window = default_window(table, _window(args, path))
    return AttackSet(table, table.telescope, window, tag), tag


def _series_column(args) -> np.ndarray:
    """One numeric series from a posture/origin CSV column or a sweep CSV tau."""
    frame = pd.read_csv(args.series)
    if getattr(args, "tau", None) is not None:
        if "tau" not in frame.columns:
            raise CliError("--tau given but the series file is not a sweep CSV")
        sel = frame[np.isclose(frame["tau"], args.tau)]
        if sel.empty:
            raise CliError(f"tau {args.tau} not present in {Path(args.series).name}")
        return sel["duration"].dropna().to_numpy(dtype=float)
    if args.column not in frame.columns:
        raise CliError(f"column {args.column!r} not in {Path(args.series).name}; have {list(frame.columns)}")
    return frame[args.column].to_numpy(dtype=float)


# --------------------------------------------------------------------------- subcommands

def cmd_generate(args) -> int:
    if bool(args.config) == bool(args.scenario):
        raise CliError("give exactly one of --config or --scenario")
    config = load_scenario(args.scenario) if args.scenario else ScenarioConfig.from_json(args.config)
    if args.seed is not None:
        config = config.with_seed(derive_seed(args.seed, "generate"))
    out = _out_dir(args)
    scenario = generate(config)
    scenario.write(out)
    write_json(out / "config.json", config.to_dict())
    return 0


def cmd_classify(args) -> int:
    path = Path(args.input)
    flows = parse_flows(path, args.telescope)
    window = default_window(flows, args.hours * 3600 if args.hours else None)
    d1 = extract_d1(flows, args.telescope, window)
    d2 = extract_d2(d1, args.d2_threshold)
    out = _out_dir(args)
    d1.to_csv(out / "d1.csv")
    d2.to_csv(out / "d2.csv")
    cls = classify_flows(flows)
    write_json(
        out / "classify.json",
        {
            "telescope": str(flows.telescope),
            "window_seconds": window,
            "d2_threshold": args.d2_threshold,
            "flows": len(flows),
            "backscatter": int((cls == FlowClass.BACKSCATTER).sum()),
            "icmp_request": int((cls == FlowClass.ICMP_REQUEST).sum()),
            "other": int((cls == FlowClass.OTHER).sum()),
            "d1_flows": len(d1),
            "d1_sources": len(d1.sources()),
            "d2_flows": len(d2),
            "d2_sources": len(d2.sources()),
        },
    )
    return 0


def cmd_build(args) -> int:
    a, tag = _attack_set(args)
    res = args.resolution
    p = build_series(a, res)
    out = _out_dir(args)
    p.to_csv(out / f"posture_{tag}_{res}.csv")
    summary = {
        "tag": tag,
        "resolution": res,
        "intervals": p.T,
        "distinct_victims": cumulative_victims(p, 0, p.T) if p.T else 0,
        "distinct_attackers": len(a.sources()),
        "attacks": int(p.attacks.sum()),
        "mean_attackers": float(p.attackers.mean()) if p.T else None,
        "period": None,
    }
    if res == "H" and p.T >= 6:
        summary["period"] = detect_period(p.attackers)
    if args.origin_map:
        agg = aggregate_by_origin(a, OriginMap.from_csv(args.origin_map), res, p.T)
        wide = pd.DataFrame({"interval": np.arange(p.T), **{c: agg.series[c] for c in agg.codes}})
        wide.to_csv(out / f"origins_{tag}_{res}.csv", index=False, lineterminator="\n")
        summary["origin_shares"] = agg.shares.to_dict(orient="records")
        summary["dominant_origin"] = (
            {"code": agg.dominant, "share": agg.share_of(agg.dominant)} if len(agg.codes) else None
        )
        if res == "H" and agg.codes and p.T >= 6:
            summary["dominant_origin_period"] = detect_period(agg.series[agg.dominant])
    write_json(out / f"build_{tag}_{res}.json", summary)
    return 0


def cmd_sweep(args) -> int:
    a, tag = _attack_set(args)
    res = args.resolution
    p = build_series(a, res)
    sweeps = sweep_time_series(p, _floats(args.taus), stride=args.stride, threads=args.threads)
    out = _out_dir(args)
    write_sweep_csv(sweeps, out / f"sweep_{tag}_{res}.csv")
    rows = []
    for tau, s in sweeps.items():
        d = s.defined_durations()
        row = {
            "tau": tau,
            "starts": len(s.starts),
            "defined": int(len(d)),
            "denominator": s.denominator,
            "mean_duration": float(d.mean()) if len(d) else None,
            "median_duration": float(np.median(d)) if len(d) else None,
            "adf": None,
        }
        if len(d) >= 20 and np.ptp(d) > 0:
            row["adf"] = adf_test(d).to_dict()
        rows.append(row)
    write_json(out / f"sweep_{tag}_{res}.json", {"tag": tag, "resolution": res, "stride": args.stride, "taus": rows})
    return 0


def cmd_fitpl(args) -> int:
    if bool(args.sweep) == bool(args.flows):
        raise CliError("give exactly one of --sweep or --flows")
    jobs = []
    if args.sweep:
        sweeps = read_sweep_csv(args.sweep)
        taus = _floats(args.taus) if args.taus else sorted(sweeps)
        for tau in taus:
            match = [t for t in sweeps if math.isclose(t, tau)]
            if not match:
                raise CliError(f"tau {tau} not present in {Path(args.sweep).name}")
            jobs.append(({"quantity": "sweep_time", "tau": tau}, sweeps[match[0]].defined_durations()))
        name = Path(args.sweep).stem.replace("sweep", "powerlaw", 1)
    else:
        if not args.telescope:
            raise CliError("--flows needs --telescope")
        args.input = args.flows
        a, tag = _attack_set(args)
        _, counts = np.unique(a.src_ip, return_counts=True)
        jobs.append(({"quantity": "flows_per_source", "tau": None}, counts))
        name = f"powerlaw_{tag}_sources"
    seed = derive_seed(args.seed, "fitpl")
    fits, failures = [], 0
    for k, (meta, samples) in enumerate(jobs):
        try:
            fit = powerlaw_fit(samples, min_tail=args.min_tail, n_bootstrap=args.bootstrap,
                               seed=seed + k, threads=args.threads)
            fits.append({**meta, **fit.to_dict()})
        except (ValueError, FitFailure) as exc:
            failures += 1
            print(f"teleposture fitpl: warning: {meta}: {exc}", file=sys.stderr)
            fits.append({**meta, "error": f"{type(exc).__name__}: {exc}"})
    write_json(_out_dir(args) / f"{name}.json", {"fits": fits})
    if failures == len(jobs):
        raise CliError("every power-law fit failed")
    return 0


def _parse_sarima(text: str):
    m = _ORDER.match(text.replace(" ", ""))
    if not m:
        raise CliError(f"bad seasonal ARIMA order {text!r}; expected like (1,0,1)(0,1,1)")
    v = tuple(int(g) for g in m.groups())
    return (v[:3], v[3:])


def cmd_fitmodel(args) -> int:
    y = _series_column(args)
    if args.difference:
        if args.family != "armagarch":
            raise CliError("--difference applies to the armagarch family; seasonal ARIMA differences itself")
        y = np.diff(y)
    if args.holdout:
        if args.holdout >= len(y):
            raise CliError("holdout leaves no data to fit")
        y = y[: len(y) - args.holdout]
    if args.family == "sarima":
        if args.grid == "full":
            spec = ModelSpec.sarima_grid(s=args.period, budget=args.budget)
        else:
            grid = tuple(_parse_sarima(m) for m in (args.model or DEFAULT_SARIMA_GRID))
            spec = ModelSpec("Sarima", grid, s=args.period, budget=args.budget)
    else:
        spec = ModelSpec("ArmaGarch", tuple(args.ar_order or [2]), budget=args.budget)
    sel = select_model(y, spec, threads=args.threads, seed=derive_seed(args.seed, "fitmodel"))
    out = _out_dir(args)
    name = args.name or f"model_{args.family}"
    sel.to_csv(out / f"{name}_ranking.csv")
    write_json(
        out / f"{name}.json",
        {
            "best": sel.best.to_dict(),
            "ranking": sel.table.to_dict(orient="records"),
            "holdout": args.holdout,
            "difference": int(args.difference),
            "n_fit": len(y),
            "series": Path(args.series).name,
            "column": None if args.tau is not None else args.column,
            "tau": args.tau,
        },
    )
    return 0


def load_fit(path):
    data = json.loads(Path(path).read_text())
    best = data.get("best", data)
    if best["family"] == "Sarima":
        return SarimaFit.from_dict(best)
    if best["family"] == "ArmaGarch":
        return ArmaGarchFit.from_dict(best)
    raise CliError(f"unknown model family {best['family']!r}")


def cmd_forecast(args) -> int:
    y = _series_column(args)
    fit = load_fit(args.model)
    integrate = bool(json.loads(Path(args.model).read_text()).get("difference", 0))
    horizons = _ints(args.horizons)
    result = rolling_forecast(y, fit, horizons=horizons, n_targets=args.targets, refit=args.refit,
                              seed=derive_seed(args.seed, "forecast"), integrate=integrate)
    out = _out_dir(args)
    name = args.name or "forecast"
    result.to_csv(out / f"{name}.csv")
    write_json(
        out / f"{name}.json",
        {"pmad": {str(h): v for h, v in result.pmad.items()}, "targets": args.targets,
         "refit": args.refit, "model": Path(args.model).name, "family": fit.family},
    )
    return 0


def cmd_dtw(args) -> int:
    frame_a = pd.read_csv(args.series)
    frame_b = pd.read_csv(args.series_b) if args.series_b else frame_a
    cols = [c for c in frame_a.columns if c != "interval"]
    col_a = args.column or (cols[0] if cols else None)
    col_b = args.column_b or (cols[1] if len(cols) > 1 and not args.series_b else col_a)
    for frame, col in ((frame_a, col_a), (frame_b, col_b)):
        if col is None or col not in frame.columns:
            raise CliError(f"column {col!r} not found")
    a = frame_a[col_a].to_numpy(dtype=float)
    b = frame_b[col_b].to_numpy(dtype=float)
    res = dtw(a, b)
    out = _out_dir(args)
    name = args.name or "dtw"
    res.to_csv(out / f"{name}.csv")
    summary = {
        "a": col_a,
        "b": col_b,
        "n": len(a),
        "m": len(b),
        "distance": res.distance,
        "normalized_distance": res.normalized_distance,
        "path_length": len(res.path),
        "diagonal_cost": float(2 * np.abs(a - b).sum() - abs(a[0] - b[0])) if len(a) == len(b) else None,
    }
    write_json(out / f"{name}.json", summary)
    return 0


def cmd_infer(args) -> int:
    a, tag = _attack_set(args)
    part = partition_blocks(a, args.B, args.resolution)
    targets = args.targets.split(",")
    for t in targets:
        if t not in TARGETS:
            raise CliError(f"unknown target {t!r}")
    seed = derive_seed(args.seed, "infer")
    results = []
    details = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for t in targets:
            for b in _ints(args.b):
                if args.method == "enumerate":
                    r = enumerate_combinations(part, b, t, budget=args.budget, threads=args.threads)
                else:
                    r = cluster_sample(part, b, t, samples=args.samples, seed=seed, threads=args.threads)
                results.append(r)
                details.append({**r.summary_row(), "method": r.method, "evaluated": len(r.pmads),
                                "best_blocks": list(r.best), "c": r.c, "phi": r.phi,
                                "rank_deficient": int(r.rank_deficient.sum())})
    for w in caught:
        print(f"teleposture infer: warning: {w.message}", file=sys.stderr)
    out = _out_dir(args)
    summary_frame(results).to_csv(out / f"inference_{tag}.csv", index=False, lineterminator="\n")
    write_json(out / f"inference_{tag}.json", {"tag": tag, "B": args.B, "method": args.method, "rows": details})
    return 0


REPORT_SKIP = {"report.json", "manifest.json", "config.json"}


def cmd_report(args) -> int:
    run = Path(args.run)
    if not run.is_dir():
        raise CliError(f"run directory {run} does not exist")
    artifacts = {}
    for path in sorted(run.glob("*.json")):
        if path.name in REPORT_SKIP:
            continue
        artifacts[path.stem] = json.loads(path.read_text())
    if not artifacts:
        raise CliError(f"no analysis outputs in {run}")
    report = {"version": __version__, "artifacts": artifacts, "dominant_origin": {}, "checks": {}}
    for stem, content in artifacts.items():
        if stem.startswith("build_") and content.get("dominant_origin"):
            report["dominant_origin"][content["tag"]] = content["dominant_origin"]
    manifest_path = run / "manifest.json"
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
        report["manifest"] = {
            "seed": manifest["seed"],
            "duration_hours": manifest["duration_hours"],
            "dominant_origin": manifest["dominant_origin"],
            "periods": [p["period_hours"] for p in manifest["populations"]],
            "tail_exponents": [p["tail_exponent"] for p in manifest["populations"]],
        }
        for tag, found in report["dominant_origin"].items():
            truth = manifest["dominant_origin"].get(tag)
            if truth:
                report["checks"][f"dominant_origin_{tag}"] = {
                    "code_matches": found["code"] == truth["code"],
                    "share_error": abs(found["share"] - truth["share"]),
                }
    write_json(Path(args.out) if args.out else run / "report.json", report)
    return 0


# --------------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=0, help="worker threads (0 = all cores)")
    common.add_argument("--seed", type=int, default=0, help="master seed")

    parser = argparse.ArgumentParser(prog="teleposture", description="Telescope attack-posture analysis.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(SUBCOMMANDS) + "}")

    p = sub.add_parser("generate", parents=[common], help="synthesise a scenario")
    p.add_argument("--config")
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_generate, seed=None)

    p = sub.add_parser("classify", parents=[common], help="classify flows and write D1/D2")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--telescope", required=True)
    p.add_argument("--d2-threshold", type=int, default=10)
    p.add_argument("--hours", type=int)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_classify)

    def attack_inputs(p):
        p.add_argument("--in", dest="input", required=True)
        p.add_argument("--telescope", required=True)
        p.add_argument("--hours", type=int)
        p.add_argument("--tag", choices=("D1", "D2"))
        p.add_argument("--out", default=".")

    p = sub.add_parser("build", parents=[common], help="posture series (and origin aggregation)")
    attack_inputs(p)
    p.add_argument("--resolution", choices=("H", "m"), default="H")
    p.add_argument("--origin-map")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("sweep", parents=[common], help="sweep-time series")
    attack_inputs(p)
    p.add_argument("--resolution", choices=("H", "m"), default="m")
    p.add_argument("--taus", default=",".join(str(t) for t in DEFAULT_TAUS))
    p.add_argument("--stride", type=int, default=10)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fitpl", parents=[common], help="power-law tail fit")
    p.add_argument("--sweep")
    p.add_argument("--taus")
    p.add_argument("--flows")
    p.add_argument("--telescope")
    p.add_argument("--hours", type=int)
    p.add_argument("--tag", choices=("D1", "D2"))
    p.add_argument("--bootstrap", type=int, default=100)
    p.add_argument("--min-tail", type=int, default=25)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_fitpl)

    def series_inputs(p):
        p.add_argument("--series", required=True)
        p.add_argument("--column", default="attackers")
        p.add_argument("--tau", type=float)
        p.add_argument("--name")
        p.add_argument("--out", default=".")

    p = sub.add_parser("fitmodel", parents=[common], help="AIC model selection")
    series_inputs(p)
    p.add_argument("--family", choices=("sarima", "armagarch"), default="sarima")
    p.add_argument("--model", action="append", help="seasonal ARIMA order like (1,0,1)(0,1,1); repeatable")
    p.add_argument("--grid", choices=("default", "full"), default="default")
    p.add_argument("--period", type=int, default=24)
    p.add_argument("--ar-order", type=int, action="append")
    p.add_argument("--budget", type=int, default=64)
    p.add_argument("--holdout", type=int, default=0)
    p.add_argument("--difference", action="store_true", help="fit ARMA+GARCH to first differences")
    p.set_defaults(func=cmd_fitmodel)

    p = sub.add_parser("forecast", parents=[common], help="rolling out-of-sample forecasts")
    series_inputs(p)
    p.add_argument("--model", required=True)
    p.add_argument("--horizons", default="1,4,7,10")
    p.add_argument("--targets", type=int, default=96)
    p.add_argument("--refit", action="store_true")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("dtw", parents=[common], help="DTW distance and warping path")
    p.add_argument("--series", required=True)
    p.add_argument("--column")
    p.add_argument("--series-b")
    p.add_argument("--column-b")
    p.add_argument("--name")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_dtw)

    p = sub.add_parser("infer", parents=[common], help="small-telescope inference")
    attack_inputs(p)
    p.add_argument("--resolution", choices=("H", "m"), default="H")
    p.add_argument("--B", type=int, default=16)
    p.add_argument("--b", default="1,2,3,4")
    p.add_argument("--targets", default=",".join(TARGETS))
    p.add_argument("--method", choices=("enumerate", "cluster"), default="enumerate")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--budget", type=int, default=20000)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("report", parents=[common], help="assemble report.json for a run directory")
    p.add_argument("--run", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 0) is not None and args.threads <= 0:
        args.threads = None
    try:
        return args.func(args)
    except CliError as exc:
        print(f"teleposture {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except _MODULE_ERRORS as exc:
        print(f"teleposture {args.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
