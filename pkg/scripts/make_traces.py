"""Run a scenario with trace recording and write per-server utilization and meter CSVs.

The output pair feeds ``powercap train``::

    python scripts/make_traces.py --scenario scenarios/three-on-one.json --out-dir traces
    powercap train --utils traces/s1_utils.csv --power traces/s1_power.csv --out model.json
"""

import argparse
from pathlib import Path

from powercap.experiments import oracle_model
from powercap.scenario import load_scenario
from powercap.simulator import run
from powercap.trace import write_power_csv, write_utilization_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", required=True)
    ap.add_argument("--out-dir", default="traces")
    args = ap.parse_args()

    sc = load_scenario(args.scenario)
    res = run(sc.cluster, sc.config, sc.oracle, oracle_model(sc.oracle), name=sc.name, record_traces=True)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for sid, samples in sorted(res.utilization.items()):
        with open(out / f"{sid}_utils.csv", "w", newline="") as fh:
            write_utilization_csv(samples, fh)
        with open(out / f"{sid}_power.csv", "w", newline="") as fh:
            write_power_csv(res.meter[sid], fh)
        print(f"{sid}: {len(samples)} utilization rows, {len(res.meter[sid])} meter rows")


if __name__ == "__main__":
    main()
