"""Tabulate migration and core-deallocation freeze time against container image size."""

import argparse

import numpy as np

from powercap.simulator import SimConfig, deallocation_time, migration_time


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-gb", type=float, default=4.0)
    ap.add_argument("--points", type=int, default=9)
    ap.add_argument("--rate", type=float, default=100e6, help="transfer rate, bytes/s")
    ap.add_argument("--fixed", type=float, default=5.0, help="fixed checkpoint/restore cost, s")
    args = ap.parse_args()

    cfg = SimConfig(migration_rate=args.rate, migration_fixed=args.fixed)
    print("image_bytes,migration_s,deallocation_s")
    for size in np.linspace(0, args.max_gb * 1e9, args.points):
        print(f"{int(size)},{migration_time(size, cfg):.3f},{deallocation_time(size, cfg):.3f}")


if __name__ == "__main__":
    main()
