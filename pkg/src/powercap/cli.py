"""Command line entry point: ``powercap train | simulate | report``.

Exit codes: 0 ok, 1 bad input, 2 data problem (too few rows, singular
design), 3 simulation did not terminate.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .core import (
    InsufficientData,
    MetricsReport,
    NonTermination,
    PowercapError,
    SingularDesign,
    TraceError,
)
from .powermodel import (
    FitConfig,
    design_rows,
    error_distribution,
    fit_arrays,
    load_model,
    mape,
    save_model,
    train_test_split,
)
from .scenario import ScenarioError, load_scenario
from .simulator import run
from .trace import join_by_timestamp, parse_power_csv, parse_utilization_csv

THRESHOLDS = (5, 10, 15, 20)


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def cmd_train(args) -> int:
    parsed = {}
    for label, path, parser in (("utils", args.utils, parse_utilization_csv), ("power", args.power, parse_power_csv)):
        try:
            parsed[label] = parser(path)
        except OSError as exc:
            _err(f"{path}: {exc.strerror or exc}")
            return 1
        except TraceError as exc:
            _err(f"{path}: {exc}")
            return 1
    records, dropped = join_by_timestamp(parsed["utils"], parsed["power"], args.tolerance)
    X, y = design_rows(records)
    train_idx, test_idx = train_test_split(len(y), 0.25, args.seed)
    cfg = FitConfig(solver=args.solver, seed=args.seed)
    try:
        model = fit_arrays(X[train_idx], y[train_idx], cfg)
    except (InsufficientData, SingularDesign) as exc:
        _err(str(exc))
        return 2
    pred = model.p_static + np.maximum(X[test_idx] @ np.array(model.coefficients), 0.0)
    try:
        held_out = mape(pred, y[test_idx])
        dist = error_distribution(pred, y[test_idx], THRESHOLDS)
    except PowercapError as exc:
        _err(str(exc))
        return 2
    save_model(model, args.out)
    print(f"records: {len(records)}  dropped: {dropped}  train: {len(train_idx)}  test: {len(test_idx)}")
    print(f"MAPE: {held_out:.4f}%")
    for t, frac in zip(THRESHOLDS, dist):
        print(f"error < {t}%: {frac:.3f}")
    print(f"model written to {args.out}")
    return 0


def _write_jsonl(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in rows:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def cmd_simulate(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except OSError as exc:
        _err(f"{args.scenario}: {exc.strerror or exc}")
        return 1
    except ScenarioError as exc:
        _err(f"{args.scenario}: {exc}")
        return 1
    try:
        model = load_model(args.model)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        _err(f"{args.model}: {exc}")
        return 1
    try:
        result = run(scenario.cluster, scenario.config, scenario.oracle, model, name=scenario.name)
    except NonTermination as exc:
        _err(str(exc))
        return 3
    except PowercapError as exc:
        _err(str(exc))
        return 1
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_jsonl(out / "events.jsonl", (e.to_dict() for e in result.events))
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(result.report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "server_power.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tick", "server", "true_watts", "measured_watts"])
        w.writerows(result.server_power)
    with open(out / "container_power.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tick", "container", "server", "watts"])
        w.writerows(result.container_power)
    with open(out / "execution_time.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["workload", "execution_time"])
        w.writerows(sorted(result.report.execution_time.items()))
    r = result.report
    print(f"{r.scenario} [{r.mode}] finished at tick {r.ticks}; actions: "
          + ", ".join(f"{k}={v}" for k, v in r.action_counts.items()))
    return 0


def _labels(paths, reports) -> list[str]:
    modes = [r.mode for r in reports]
    if len(set(modes)) == len(modes):
        return modes
    return [f"{r.mode}:{Path(p).parent.name or Path(p).stem}" for p, r in zip(paths, reports)]


def cmd_report(args) -> int:
    reports = []
    for p in args.inputs:
        try:
            with open(p, encoding="utf-8") as fh:
                reports.append(MetricsReport.from_dict(json.load(fh)))
        except (OSError, ValueError, TypeError) as exc:
            _err(f"{p}: {exc}")
            return 1
    if len(reports) < 2:
        _err("need at least two reports")
        return 1
    base = reports[0]
    for p, r in zip(args.inputs[1:], reports[1:]):
        if r.scenario != base.scenario or set(r.execution_time) != set(base.execution_time):
            _err(f"{p}: workloads differ from {args.inputs[0]}")
            return 1
    labels = _labels(args.inputs, reports)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "id", *labels])
        for wid in sorted(base.execution_time):
            w.writerow(["execution_time", wid, *(r.execution_time[wid] for r in reports)])
        for sid in sorted(base.peak_power):
            w.writerow(["peak_power", sid, *(r.peak_power.get(sid, "") for r in reports)])
        for sid in sorted(base.peak_power):
            w.writerow(["post_cap_peak_power", sid,
                        *("" if r.post_cap_peak_power.get(sid) is None else r.post_cap_peak_power[sid] for r in reports)])
        for sid in sorted(base.violation_ticks):
            w.writerow(["violation_ticks", sid, *(r.violation_ticks.get(sid, "") for r in reports)])
    print(f"comparison written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="powercap", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit a power model from utilization and meter logs")
    t.add_argument("--utils", required=True)
    t.add_argument("--power", required=True)
    t.add_argument("--tolerance", type=int, default=0)
    t.add_argument("--solver", choices=("closed", "gd"), default="closed")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("simulate", help="run a scenario")
    s.add_argument("--scenario", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="compare metrics reports across capping modes")
    r.add_argument("--inputs", nargs="+", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
