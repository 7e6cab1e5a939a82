"""Acceptance criteria, each run at its stated tolerance and runtime budget.

Every test records one PASS/FAIL line; the lines are printed together in the
terminal summary (see conftest.py).
"""
import math
import time
from dataclasses import replace

import numpy as np

from contract_lens import AggKind, Contract
from contract_lens.experiments import DESK, dynamics_specs, run_preset, starvation_specs
from contract_lens.fit import FitForm, select_best, synthetic_samples
from contract_lens.metrics import bandwidth_range, growth, parking_lot_fixed_point
from contract_lens.netsim import Dumbbell, ParkingLot, audit_trace, run
from contract_lens.netsim.io import write_trace_csv
from contract_lens.tradeoffs import (corner_contract, growth_lb_given_robustness, range_ub_given_fairness,
                                     range_ub_given_robustness)
from contract_lens.cca import CcaSpec

from conftest import MBPS, MS, record_acceptance

TABLE_FAMILIES = 8


class Clock:
    def __init__(self, number, budget_s):
        self.number, self.budget = number, budget_s
        self.t0 = time.perf_counter()

    def finish(self, ok: bool, detail: str):
        elapsed = time.perf_counter() - self.t0
        within = elapsed < self.budget
        record_acceptance(self.number, ok and within,
                          f"{detail}; {elapsed:.2f} s (budget {self.budget:g} s)")
        assert ok, detail
        assert within, f"took {elapsed:.2f} s, budget {self.budget} s"


def _bad_rows(rows, key="within_tol"):
    return [r for r in rows if r["status"] != "ok" or (key and not r[key])]


def test_criterion_01_periodic_table(tmp_path):
    clock = Clock(1, 10)
    rows = run_preset("table", tmp_path).tables["table"]
    families = {r["contract_id"] for r in rows}
    bad = [r for r in rows if r["status"] != "ok" or r["value"] is None or r["closed_form"] is None
           or not (math.isinf(r["value"]) and math.isinf(r["closed_form"])
                   or abs(r["value"] / r["closed_form"] - 1) <= 0.01)]
    params = {m: sorted({r["param"] for r in rows if r["metric"] == m}) for m in
              ("error_factor", "unfairness", "growth")}
    shape_ok = (len(families) == TABLE_FAMILIES and params["error_factor"] == [0.5, 1.0, 2.0]
                and params["unfairness"] == [1, 2, 3, 4] and params["growth"] == [2, 4, 8])
    worst = max(abs(r["rel_error"]) for r in rows if r["rel_error"] is not None)
    clock.finish(not bad and shape_ok, f"{len(rows)} cells, worst rel error {worst:.2e}")


def test_criterion_02_fairness_notions():
    clock = Clock(2, 1)
    prop = parking_lot_fixed_point(Contract.power_law(1.0, 0.01, 200.0), AggKind.SUM, 2, 1.0)
    mpd = parking_lot_fixed_point(Contract.power_law(0.5, 0.01, 200.0), AggKind.SUM, 2, 1.0)
    maxmin = parking_lot_fixed_point(Contract.power_law(1.0, 0.01, 200.0), AggKind.MAX, 2, 1.0)
    got = [(prop.x_long, prop.x_short), (mpd.x_long, mpd.x_short), (maxmin.x_long, maxmin.x_short)]
    want = [(1 / 3, 2 / 3), (math.sqrt(2) - 1, 2 - math.sqrt(2)), (0.5, 0.5)]
    err = max(abs(a - b) for g, w in zip(got, want) for a, b in zip(g, w))
    clock.finish(err <= 1e-6, f"max abs error {err:.1e}")


def test_criterion_03_simulated_fairness(tmp_path):
    clock = Clock(3, 120)
    rows = run_preset("fairness", tmp_path).tables["fairness"]
    tol = {1.0: 0.15, 2.0: 0.20, 0.5: 0.15}
    bad = []
    for r in rows:
        if r["status"] != "ok":
            bad.append(r)
        elif r["contract"] == "max_hop_delay":
            if not 0.9 <= r["measured_ratio"] <= 1.15:
                bad.append(r)
        elif abs(r["measured_ratio"] / r["predicted_ratio"] - 1) > tol[r["exponent"]]:
            bad.append(r)
    assert {r["k"] for r in rows} == {1, 2, 3, 4}
    clock.finish(not bad and len(rows) == 16, f"{len(rows) - len(bad)}/{len(rows)} cells within tolerance")


def test_criterion_04_simulated_growth(tmp_path):
    clock = Clock(4, 120)
    rows = run_preset("growth", tmp_path).tables["growth"]
    bad = [r for r in rows if r["status"] != "ok"
           or abs(r["measured_growth"] / (r["n"] ** (1 / r["exponent"])) - 1) > 0.15]
    clock.finish(not bad and len(rows) == 8, f"{len(rows) - len(bad)}/{len(rows)} cells within 15%")


def test_criterion_05_simulated_robustness(tmp_path):
    clock = Clock(5, 60)
    rows = run_preset("robustness", tmp_path).tables["robustness"]
    bad = [r for r in rows if r["status"] != "ok" or abs(r["measured_ratio"] / r["predicted_ratio"] - 1) > 0.20]
    assert sorted({r["delta_mult"] for r in rows}) == [0.5, 1.0, 2.0]
    clock.finish(not bad and len(rows) == 6, f"{len(rows) - len(bad)}/{len(rows)} cells within 20%")


def test_criterion_06_starvation(tmp_path):
    clock = Clock(6, 60)
    rows = run_preset("starvation", tmp_path).tables["starvation"]
    aimd = [r for r in rows if r["scenario"] == "aimd_on_delay" and r["flow_id"] == 0]
    linear = [r for r in rows if r["scenario"] == "linear_intercept" and r["flow_id"] == 1]
    ok = (len(aimd) == len(linear) == 1 and all(r["status"] == "ok" for r in rows)
          and aimd[0]["fraction"] < 0.02 and linear[0]["fraction"] < 0.10)
    clock.finish(ok, f"AIMD long flow {aimd[0]['fraction']:.2%} of fair share, "
                     f"noisy linear flow {linear[0]['fraction']:.2%}")


def test_criterion_07_dynamics(tmp_path):
    clock = Clock(7, 120)
    rows = run_preset("dynamics", tmp_path).tables["dynamics"]
    canon = [r for r in rows if r["variant"] == "canonical_rtt_ratio"]
    mimd = [r for r in rows if r["variant"] == "mimd_rate_ratio"]
    converged = all(r["status"] == "ok" and abs(r["share_0"] - 1) <= 0.10 and abs(r["share_1"] - 1) <= 0.10
                    for r in canon)
    worst_amp = max(r["amplitude"] for r in mimd)
    ok = len(canon) == 5 and converged and worst_amp > 0.5
    clock.finish(ok, f"canonical converged on {sum(r['converged'] for r in canon)}/{len(canon)} points, "
                     f"max MIMD amplitude {worst_amp:.0%}")


def test_criterion_08_tradeoff_tightness():
    clock = Clock(8, 1)
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        eps, ds, s_min = rng.uniform(1.05, 10.0), rng.uniform(0.01, 10.0), rng.uniform(0.01, 10.0)
        n = int(rng.integers(1, 65))
        s_max = s_min + ds * (math.log(n) / math.log(eps) + 1 + rng.uniform(0.0, 8.0))
        c = corner_contract("exponential_corner", bmax=1.0, s_min=s_min, ds=ds, eps=eps, s_max=s_max)
        worst = max(worst,
                    abs(growth(c, n) / growth_lb_given_robustness(eps, ds, s_min, n) - 1),
                    abs(bandwidth_range(c) / range_ub_given_robustness(eps, ds, s_min, s_max) - 1))
        alpha = (1.0, 2.0)[int(rng.integers(0, 2))]
        lo, ratio = rng.uniform(0.01, 10.0), rng.uniform(1.5, 1e3)
        a = corner_contract("alpha_fair_corner", alpha=alpha, bmax=1.0, s_min=lo, s_max=lo * ratio)
        worst = max(worst, abs(bandwidth_range(a) / range_ub_given_fairness(alpha, ratio) - 1))
    clock.finish(worst <= 1e-9, f"100 draws, worst relative gap {worst:.1e}")


CAPS = [24 * MBPS, 48 * MBPS, 96 * MBPS]
GENERATORS = {
    FitForm.POWER_LAW: (Contract.power_law(1.38, 1e5, 1e9, rate_scale=100 * MBPS, stat_scale=1e6), 1.38),
    FitForm.EXPONENTIAL: (Contract.exponential(0.0, 2e7, rate_scale=60 * MBPS, stat_scale=3e6), 3e6),
    FitForm.LINEAR: (Contract.linear(0.0, 9.9e6, rate_scale=50 * MBPS, stat_scale=1e7), 1e7),
    FitForm.LOGARITHMIC: (Contract.logarithmic(1e4, 9.9e6, rate_scale=10 * MBPS, stat_scale=1e7), 1e7),
}


def test_criterion_09_fit_recovery(tmp_path):
    clock = Clock(9, 180)
    misses = []
    for form, (contract, shape) in GENERATORS.items():
        best = select_best(synthetic_samples(contract, CAPS, range(2, 9), noise=0.01, seed=9))
        tol = 0.1 if form is FitForm.POWER_LAW else 0.10 * shape
        if best.form is not form or abs(best.shape - shape) > tol:
            misses.append(f"{form.value}: got {best.form.value} shape {best.shape:.4g}")
    sweeps = run_preset("fit-demo", tmp_path).tables["fit_results"]
    for r in sweeps:
        tol = 0.15 if r["expected_shape"] == 2.0 else 0.1
        if r["status"] != "ok" or r["stat"] != r["expected_stat"] or abs(r["shape"] - r["expected_shape"]) > tol:
            misses.append(f"sweep {r['cca']}: {r['stat']} shape {r['shape']}")
    clock.finish(not misses, "; ".join(misses) or "4 generators and 3 simulated sweeps recovered")


def _acceptance_specs():
    specs = {"parking": DESK.scenario(ParkingLot(3), CcaSpec("canonical_rtt_ratio", DESK.contract(1.0))),
             "growth": DESK.scenario(Dumbbell(8), CcaSpec("canonical_rtt_ratio", DESK.contract(2.0)))}
    specs.update(starvation_specs(DESK))
    m, cap, v, spec = dynamics_specs(DESK, multiples=(1000,), variants=("mimd_rate_ratio",))[0]
    specs["dynamics"] = spec
    return {k: replace(s, trace=True, duration=5000 * MS) for k, s in specs.items()}


def test_criterion_10_determinism_and_audits(tmp_path):
    clock = Clock(10, 120)
    failures = []
    for name, spec in _acceptance_specs().items():
        texts = []
        for i in range(2):
            res = run(spec)
            audit = {**res.audit, **audit_trace(res.trace, len(res.flows), res)}
            if not all(audit.values()):
                failures.append(f"{name}: {[k for k, v in audit.items() if not v]}")
            texts.append(write_trace_csv(res, tmp_path / f"{name}_{i}.csv").read_bytes())
        if texts[0] != texts[1]:
            failures.append(f"{name}: traces differ")
    clock.finish(not failures, "; ".join(failures) or "5 scenarios byte-identical, all audits hold")
