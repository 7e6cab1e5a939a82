"""Regenerate the CSVs shipped in src/contract_lens/data.

synthetic_fit.csv: flows follow rate = 100 Mbps * (1 ms / queueing delay) on
a 40 ms RTprop path (capacities 24/48/96 Mbps, 2..8 flows), 1% throughput
noise.  no_contract.csv: same grid, throughput unrelated to delay.
"""
import csv
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "src" / "contract_lens" / "data"
COLUMNS = ["capacity", "flows", "flow_id", "throughput", "avg_delay", "p50_delay", "loss_rate"]


def write(name, rows, comment):
    with open(OUT / name, "w", newline="") as fh:
        fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        w.writerows(rows)


def main():
    rng = np.random.default_rng(7)
    rows, flat = [], []
    for cap in (24, 48, 96):
        for n in range(2, 9):
            share = cap / n
            q = 1.0 * 100 / share  # ms
            for i in range(n):
                thr = share * (1 + 0.01 * rng.standard_normal())
                rows.append([cap, n, i, f"{thr:.6f}", f"{40 + q:.6f}", f"{40 + 0.95 * q:.6f}", 0])
                flat.append([cap, n, i, f"{10 * (1 + 0.3 * rng.standard_normal()):.6f}",
                             f"{40 + q:.6f}", f"{40 + 0.95 * q:.6f}", 0])
    write("synthetic_fit.csv", rows, "synthetic: rate = 100 Mbps * 1 ms / queueing delay, RTprop 40 ms, 1% noise")
    write("no_contract.csv", flat, "synthetic: throughput unrelated to delay")


if __name__ == "__main__":
    main()
