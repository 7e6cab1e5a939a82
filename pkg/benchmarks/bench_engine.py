"""Compiled vs pure-Python simulator throughput.

Usage: python3 benchmarks/bench_engine.py [--duration-s 5] [--repeat 3]

Each scenario runs on both engines; the script reports wall time, events per
second and the speedup, and checks both engines produced identical summaries.
"""
import argparse
import time
from dataclasses import replace

from contract_lens.cca import CcaSpec, default_contract
from contract_lens.netsim import Dumbbell, LinkSpec, ParkingLot, ScenarioSpec, compiled_available, run

MBPS = 1e6 / 8
MS = 1_000_000


def scenarios(duration):
    cap = 100 * MBPS
    c1 = default_contract(1.0, cap, 10 * MS, 0.3)
    return {
        "dumbbell-2 canonical": ScenarioSpec(Dumbbell(2), LinkSpec(cap, 5 * MS), CcaSpec("canonical_rtt_ratio", c1),
                                             duration=duration),
        "dumbbell-8 canonical": ScenarioSpec(Dumbbell(8), LinkSpec(cap, 5 * MS), CcaSpec("canonical_rtt_ratio", c1),
                                             duration=duration),
        "parking-lot-4 canonical": ScenarioSpec(ParkingLot(4), LinkSpec(cap, 5 * MS),
                                                CcaSpec("canonical_rtt_ratio", c1), duration=duration),
        "dumbbell-2 aimd (per-ack)": ScenarioSpec(Dumbbell(2), LinkSpec(cap, 5 * MS),
                                                  CcaSpec("aimd_on_delay", threshold_ns=20 * MS), duration=duration),
    }


def best_of(spec, engine, repeat):
    best, res = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        res = run(spec, engine)
        best = min(best, time.perf_counter() - t)
    return best, res


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--duration-s", type=float, default=5.0)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--trace", action="store_true", help="also record per-packet traces")
    args = ap.parse_args()
    if not compiled_available():
        raise SystemExit("compiled engine not built; run `pip install -e . --no-build-isolation` with Cython")
    print(f"{'scenario':28s} {'events':>10s} {'c s':>8s} {'py s':>8s} {'c Mev/s':>8s} {'py Mev/s':>9s} "
          f"{'speedup':>8s} same")
    for name, spec in scenarios(round(args.duration_s * 1e9)).items():
        spec = replace(spec, trace=args.trace)
        tc, rc = best_of(spec, "c", args.repeat)
        tp, rp = best_of(spec, "python", args.repeat)
        same = rc.flows == rp.flows and rc.trace == rp.trace
        print(f"{name:28s} {rc.events:10d} {tc:8.3f} {tp:8.3f} {rc.events / tc / 1e6:8.2f} "
              f"{rp.events / tp / 1e6:9.2f} {tp / tc:7.1f}x {same}")


if __name__ == "__main__":
    main()
