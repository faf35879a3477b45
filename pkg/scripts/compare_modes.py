"""Run one scenario under no capping, power-aware capping and frequency scaling.

Prints completion times and peak powers and writes a comparison CSV with the
same layout as ``powercap report``.
"""

import argparse
import csv

from powercap.experiments import compensation_pair, oracle_model, three_on_one
from powercap.scenario import load_scenario
from powercap.simulator import run

BUILTIN = {"three-on-one": three_on_one, "compensation-pair": lambda: compensation_pair()}
MODES = ("none", "cap", "freqscale")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("scenario", help=f"a scenario JSON file or one of {sorted(BUILTIN)}")
    ap.add_argument("--out", default="comparison.csv")
    args = ap.parse_args()

    base = BUILTIN[args.scenario]() if args.scenario in BUILTIN else load_scenario(args.scenario)
    reports = []
    for mode in MODES:
        sc = base.with_mode(mode)
        reports.append(run(sc.cluster, sc.config, sc.oracle, oracle_model(sc.oracle), name=sc.name).report)

    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "id", *MODES])
        for wid in sorted(reports[0].execution_time):
            w.writerow(["execution_time", wid, *(r.execution_time[wid] for r in reports)])
        for sid in sorted(reports[0].peak_power):
            w.writerow(["peak_power", sid, *(round(r.peak_power[sid], 3) for r in reports)])
            w.writerow(["post_cap_peak_power", sid, *("" if r.post_cap_peak_power[sid] is None
                                                      else round(r.post_cap_peak_power[sid], 3) for r in reports)])
            w.writerow(["violation_ticks", sid, *(r.violation_ticks[sid] for r in reports)])
    with open(args.out) as fh:
        print(fh.read(), end="")


if __name__ == "__main__":
    main()
