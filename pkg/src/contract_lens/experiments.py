"""Experiment presets: each runs a validation suite and writes CSVs plus plot scripts.

Every preset takes a :class:`Scale` (network size and run length) and a dict
of overrides, runs its cells through :func:`contract_lens.fit.map_cells`,
and marks failed cells in its CSV instead of aborting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .cca import CcaSpec, RedParams, default_contract
from .contract import Contract, StatKind
from .csvio import metadata_line, write_csv
from .errors import ConfigError, ContractLensError
from .fit import (SAMPLE_FIELDS, Sample, collect, map_cells, samples_rows, select_best)
from .metrics import bandwidth_range, closed_form, growth
from .netsim.run import run
from .netsim.spec import Dumbbell, LinkSpec, NoiseSpec, ParkingLot, ScenarioSpec
from .tradeoffs import BoundKind, bound_report, default_table_entries, table_rows

MBPS = 1e6 / 8
MS = 1_000_000


@dataclass(frozen=True)
class Scale:
    """Network size shared by the presets (internal units).

    ``s_min_fraction`` sets the contract floor as a fraction of RTprop for the
    validation presets.
    """

    capacity: float = 100 * MBPS
    rtprop: int = 10 * MS
    duration: int = 20_000 * MS
    packet_size: int = 1500
    seed: int = 1
    s_min_fraction: float = 0.3

    def link(self, capacity: float | None = None, red=None) -> LinkSpec:
        return LinkSpec(capacity or self.capacity, self.rtprop // 2, red=red)

    def scenario(self, topology, cca, capacity=None, red=None, **kw) -> ScenarioSpec:
        kw.setdefault("duration", self.duration)
        return ScenarioSpec(topology, self.link(capacity, red), cca, packet_size=self.packet_size,
                            seed=self.seed, **kw)

    def contract(self, exponent: float, capacity: float | None = None,
                 s_min_fraction: float | None = None) -> Contract:
        frac = self.s_min_fraction if s_min_fraction is None else s_min_fraction
        return default_contract(exponent, capacity or self.capacity, self.rtprop, frac)

    def record(self) -> dict:
        return {"capacity": self.capacity, "rtprop": self.rtprop, "duration": self.duration,
                "packet_size": self.packet_size, "seed": self.seed,
                "s_min_fraction": self.s_min_fraction}


DESK = Scale()
# 100 Gbps with a 12 us RTprop; runs are shortened to keep the event count sane.
DATACENTER = Scale(capacity=100e9 / 8, rtprop=12_000, duration=100 * MS)


@dataclass
class PresetResult:
    name: str
    files: list[Path] = field(default_factory=list)
    tables: dict[str, list[dict]] = field(default_factory=dict)
    failures: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failures == 0


# --- plumbing -------------------------------------------------------------------

def _safe_run(cell):
    spec, engine = cell
    try:
        res = run(spec, engine)
    except ContractLensError as exc:
        return f"{type(exc).__name__}: {exc}"
    if not all(res.audit.values()):
        bad = ", ".join(k for k, v in res.audit.items() if not v)
        return f"audit failed: {bad}"
    return res


def _run_all(specs, engine=None, workers=None) -> list:
    return map_cells(_safe_run, [(s, engine) for s in specs], workers)


def _ints(value, name) -> list[int]:
    return [int(v) for v in _floats(value, name)]


def _floats(value, name) -> list[float]:
    if isinstance(value, (int, float)):
        return [float(value)]
    try:
        if isinstance(value, str):
            return [float(v) for v in value.split(",") if v.strip()]
        return [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"override {name}: expected a number list, got {value!r}") from None


def _opts(overrides: dict | None, defaults: dict) -> dict:
    overrides = dict(overrides or {})
    unknown = set(overrides) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown override(s): {', '.join(sorted(unknown))}; "
                          f"known: {', '.join(sorted(defaults))}")
    out = dict(defaults)
    out.update(overrides)
    return out


def _write(result: PresetResult, out_dir: Path, stem: str, rows: list[dict], scale: Scale,
           config: dict, plot: str | None) -> None:
    header = list(rows[0]) if rows else ["empty"]
    meta = metadata_line(seed=scale.seed, config={"preset": result.name, "scale": scale.record(),
                                                  **config})
    path = write_csv(out_dir / f"{stem}.csv", header, ([r.get(h) for h in header] for r in rows), meta)
    result.files.append(path)
    result.tables[stem] = rows
    if plot is not None:
        script = out_dir / f"{stem}_plot.py"
        script.write_text(plot)
        result.files.append(script)


def plot_script(csv_name: str, x: str, y: str | list[str], group: str | None = None,
                title: str = "", logx: bool = False, logy: bool = False,
                overlay: str | None = None) -> str:
    """Text of a standalone matplotlib script that plots ``y`` against ``x``."""
    ys = [y] if isinstance(y, str) else list(y)
    lines = [
        '"""Generated by contract_lens; run with python to render the figure."""',
        "import csv",
        "import sys",
        "from pathlib import Path",
        "",
        "import matplotlib.pyplot as plt",
        "",
        f"CSV = Path(__file__).with_name({csv_name!r})",
        "rows = list(csv.DictReader(l for l in CSV.read_text().splitlines() if not l.startswith('#')))",
        "",
        "def num(v):",
        "    try:",
        "        return float(v)",
        "    except ValueError:",
        "        return float('nan')",
        "",
        "groups = {}",
        "for r in rows:",
        f"    groups.setdefault({f'r[{group!r}]' if group else repr('all')}, []).append(r)",
        "fig, ax = plt.subplots(figsize=(6, 4))",
        "for name, rs in groups.items():",
        f"    xs = [num(r[{x!r}]) for r in rs]",
    ]
    for col in ys:
        lines.append(f"    ax.plot(xs, [num(r[{col!r}]) for r in rs], marker='o', label=f'{{name}} {col}')")
    if overlay:
        lines.append(f"    ax.plot(xs, [num(r[{overlay!r}]) for r in rs], ls='--', color='gray')")
    lines += [
        f"ax.set_xlabel({x!r})",
        f"ax.set_ylabel({', '.join(ys)!r})",
        f"ax.set_title({title!r})",
    ]
    if logx:
        lines.append("ax.set_xscale('log')")
    if logy:
        lines.append("ax.set_yscale('log')")
    lines += [
        "ax.legend(fontsize='small')",
        "fig.tight_layout()",
        "out = CSV.with_suffix('.pdf')",
        "fig.savefig(sys.argv[1] if len(sys.argv) > 1 else out)",
        "",
    ]
    return "\n".join(lines)


def _rel(measured, predicted):
    if measured is None or predicted is None or not predicted:
        return None
    return measured / predicted - 1.0


# --- presets ----------------------------------------------------------------------

FAIRNESS_TOL = {1.0: 0.15, 2.0: 0.20, 0.5: 0.15}


def preset_fairness(scale: Scale, out_dir: Path, overrides=None, engine=None) -> PresetResult:
    """Parking lot: short/long throughput ratio against the predicted k**exponent."""
    o = _opts(overrides, {"ks": [1, 2, 3, 4], "exponents": [1.0, 2.0, 0.5], "max_hop": True})
    ks, exps = _ints(o["ks"], "ks"), _floats(o["exponents"], "exponents")
    cells = []
    for p in exps:
        c = scale.contract(p)
        for k in ks:
            cells.append((f"power_law^{p:g}", p, k, scale.scenario(ParkingLot(k), CcaSpec("canonical_rtt_ratio", c))))
    if o["max_hop"]:
        c = scale.contract(1.0)
        for k in ks:
            cells.append(("max_hop_delay", None, k,
                          scale.scenario(ParkingLot(k), CcaSpec("max_hop_delay_canonical", c))))
    results = _run_all([c[3] for c in cells], engine)
    res = PresetResult("fairness")
    rows = []
    for (name, p, k, spec), r in zip(cells, results):
        predicted = 1.0 if p is None else float(k) ** p
        row = {"contract": name, "exponent": p, "k": k, "predicted_ratio": predicted,
               "measured_ratio": None, "rel_error": None, "within_tol": None,
               "long_throughput": None, "short_throughput_mean": None, "status": "ok"}
        if isinstance(r, str):
            row["status"] = r
            res.failures += 1
        else:
            th = r.throughputs
            ratio = sum(th[1:]) / k / th[0] if th[0] > 0 else math.inf
            row.update(measured_ratio=ratio, rel_error=_rel(ratio, predicted),
                       long_throughput=th[0], short_throughput_mean=sum(th[1:]) / k)
            if p is None:
                row["within_tol"] = 0.9 <= ratio <= 1.15
            else:
                row["within_tol"] = abs(ratio / predicted - 1) <= FAIRNESS_TOL.get(p, 0.2)
        rows.append(row)
    _write(res, out_dir, "fairness", rows, scale, o,
           plot_script("fairness.csv", "k", "measured_ratio", "contract",
                       "short/long throughput ratio vs hops", logy=True, overlay="predicted_ratio"))
    return res


def preset_growth(scale: Scale, out_dir: Path, overrides=None, engine=None) -> PresetResult:
    """Dumbbell: queueing delay growth with flow count against n**(1/exponent)."""
    o = _opts(overrides, {"ns": [1, 2, 4, 8], "exponents": [1.0, 2.0]})
    ns, exps = _ints(o["ns"], "ns"), _floats(o["exponents"], "exponents")
    if 1 not in ns:
        ns = [1] + ns
    cells = [(p, n, scale.scenario(Dumbbell(n), CcaSpec("canonical_rtt_ratio", scale.contract(p))))
             for p in exps for n in ns]
    results = _run_all([c[2] for c in cells], engine)
    res = PresetResult("growth")
    base: dict[float, float] = {}
    rows = []
    for (p, n, _), r in zip(cells, results):
        row = {"contract": f"power_law^{p:g}", "exponent": p, "n": n, "queue_delay_ns": None,
               "measured_growth": None, "predicted_growth": float(n) ** (1 / p), "rel_error": None,
               "within_tol": None, "status": "ok"}
        if isinstance(r, str):
            row["status"] = r
            res.failures += 1
        else:
            q = float(np.mean([f.queue_delay for f in r.flows]))
            row["queue_delay_ns"] = q
            if n == 1:
                base[p] = q
            if p in base and base[p] > 0:
                g = q / base[p]
                row.update(measured_growth=g, rel_error=_rel(g, row["predicted_growth"]),
                           within_tol=abs(g / row["predicted_growth"] - 1) <= 0.15)
        rows.append(row)
    _write(res, out_dir, "growth", rows, scale, o,
           plot_script("growth.csv", "n", "queue_delay_ns", "contract", "queueing delay vs flows",
                       logx=True, logy=True))
    return res


def preset_robustness(scale: Scale, out_dir: Path, overrides=None, engine=None) -> PresetResult:
    """Two flows, one with undisclosed extra delay; ratio against eval(s)/eval(s + ds)."""
    o = _opts(overrides, {"deltas": [0.5, 1.0, 2.0], "exponents": [1.0, 2.0]})
    deltas, exps = _floats(o["deltas"], "deltas"), _floats(o["exponents"], "exponents")
    res = PresetResult("robustness")
    clean = _run_all([scale.scenario(Dumbbell(2), CcaSpec("canonical_rtt_ratio", scale.contract(p)))
                      for p in exps], engine)
    cells = []
    for p, r in zip(exps, clean):
        if isinstance(r, str):
            continue
        op = r.flows[0].queue_delay
        for m in deltas:
            d = int(round(m * op))
            cells.append((p, m, d, op, scale.scenario(Dumbbell(2), CcaSpec("canonical_rtt_ratio", scale.contract(p)),
                                                      noise=(NoiseSpec(1, d),))))
    results = _run_all([c[4] for c in cells], engine)
    rows = []
    for p, r in zip(exps, clean):
        if isinstance(r, str):
            res.failures += 1
            rows.append({"contract": f"power_law^{p:g}", "exponent": p, "delta_mult": None,
                         "status": f"clean run: {r}"})
    for (p, m, d, op, _), r in zip(cells, results):
        c = scale.contract(p)
        row = {"contract": f"power_law^{p:g}", "exponent": p, "delta_mult": m, "delta_ns": d,
               "clean_operating_delay_ns": op, "operating_delay_ns": None, "measured_ratio": None,
               "predicted_ratio": None, "rel_error": None, "within_tol": None,
               "worst_case_error_factor": closed_form(c, "error_factor", d), "status": "ok"}
        if isinstance(r, str):
            row["status"] = r
            res.failures += 1
        else:
            th = r.throughputs
            s = r.flows[0].queue_delay
            pred = float(c.extended(s)) / float(c.extended(s + d))
            ratio = th[0] / th[1] if th[1] > 0 else math.inf
            row.update(operating_delay_ns=s, measured_ratio=ratio, predicted_ratio=pred,
                       rel_error=_rel(ratio, pred), within_tol=abs(ratio / pred - 1) <= 0.20)
        rows.append(row)
    _write(res, out_dir, "robustness", rows, scale, o,
           plot_script("robustness.csv", "delta_mult", ["measured_ratio", "predicted_ratio"], "contract",
                       "clean/noisy throughput ratio vs extra delay", overlay="worst_case_error_factor"))
    return res


def starvation_specs(scale: Scale, sample_interval: int | None = None) -> dict[str, ScenarioSpec]:
    """AIMD-on-delay on a 2-hop parking lot and a linear contract near its intercept."""
    si = 5 * scale.rtprop if sample_interval is None else sample_interval
    aimd = CcaSpec("aimd_on_delay", threshold_ns=2 * scale.rtprop, md_factor=0.8)
    linear = Contract.linear(0.1 * scale.rtprop, 0.995 * scale.rtprop, rate_scale=5 * scale.capacity,
                             stat_scale=scale.rtprop)
    return {
        "aimd_on_delay": scale.scenario(ParkingLot(2), aimd, sample_interval=si),
        "linear_intercept": scale.scenario(Dumbbell(2), CcaSpec("canonical_rtt_ratio", linear),
                                           noise=(NoiseSpec(1, int(0.2 * scale.rtprop)),),
                                           sample_interval=si),
    }


# flow whose share is checked and the share it must stay below
STARVATION_CHECK = {"aimd_on_delay": (0, 0.02), "linear_intercept": (1, 0.10)}


def preset_starvation(scale: Scale, out_dir: Path, overrides=None, engine=None) -> PresetResult:
    o = _opts(overrides, {"sample_interval_ms": 5 * scale.rtprop / MS})
    specs = starvation_specs(scale, int(float(o["sample_interval_ms"]) * MS))
    results = _run_all(list(specs.values()), engine)
    res = PresetResult("starvation")
    rows, series = [], []
    for (name, spec), r in zip(specs.items(), results):
        watch, limit = STARVATION_CHECK[name]
        if isinstance(r, str):
            res.failures += 1
            rows.append({"scenario": name, "flow_id": watch, "status": r})
            continue
        for f in r.flows:
            frac = f.throughput / spec.fair_share(f.flow_id)
            rows.append({"scenario": name, "flow_id": f.flow_id, "throughput": f.throughput,
                         "fair_share": spec.fair_share(f.flow_id), "fraction": frac,
                         "stalled": f.stalled, "domain_clipped": f.domain_clipped,
                         "watched": f.flow_id == watch,
                         "starved": frac < limit if f.flow_id == watch else None, "status": "ok"})
        for t, cw in zip(r.series["time"], r.series["cwnd"]):
            for fid, w in enumerate(cw):
                series.append({"scenario": name, "time_ns": t, "flow_id": fid, "cwnd_bytes": w})
    _write(res, out_dir, "starvation", rows, scale, o, None)
    _write(res, out_dir, "starvation_series", series, scale, o,
           plot_script("starvation_series.csv", "time_ns", "cwnd_bytes", "flow_id",
                       "cwnd over time (filter by scenario column)"))
    return res


DYNAMICS_VARIANTS = ("canonical_rtt_ratio", "mimd_rate_ratio", "mimd_delay_ratio")
DYNAMICS_MULTIPLES = (10, 30, 100, 300, 1000)


def oscillation_amplitude(cwnd: np.ndarray) -> float:
    """Half the 2nd-98th percentile spread of a cwnd trace, relative to its mean."""
    cwnd = np.asarray(cwnd, dtype=float)
    return float((np.percentile(cwnd, 98) - np.percentile(cwnd, 2)) / 2 / cwnd.mean())


def dynamics_specs(scale: Scale, multiples=DYNAMICS_MULTIPLES, variants=DYNAMICS_VARIANTS,
                   sample_interval: int | None = None):
    """2-flow dumbbells from 10x to 1000x of capacity/100 with one fixed 1/s^2 contract."""
    unit = scale.capacity / 100
    caps = [m * unit for m in multiples]
    c = default_contract(2.0, max(caps), scale.rtprop, 0.1)
    si = scale.rtprop if sample_interval is None else sample_interval
    return [(m, cap, v, scale.scenario(Dumbbell(2), CcaSpec(v, c), capacity=cap, sample_interval=si))
            for m, cap in zip(multiples, caps) for v in variants]


def dynamics_row(m, cap, variant, r) -> dict:
    cw = np.asarray(r.series["cwnd"], dtype=float)
    half = cw[len(cw) // 2:]
    amps = [oscillation_amplitude(half[:, i]) for i in range(half.shape[1])]
    shares = [t / (cap / 2) for t in r.throughputs]
    return {"multiple": m, "capacity": cap, "variant": variant, "amplitude": max(amps),
            "share_0": shares[0], "share_1": shares[1],
            "converged": all(abs(s - 1) <= 0.10 for s in shares),
            "oscillating": max(amps) > 0.5, "status": "ok"}


def preset_dynamics(scale: Scale, out_dir: Path, overrides=None, engine=None) -> PresetResult:
    o = _opts(overrides, {"multiples": list(DYNAMICS_MULTIPLES), "variants": list(DYNAMICS_VARIANTS)})
    variants = o["variants"].split(",") if isinstance(o["variants"], str) else list(o["variants"])
    cells = dynamics_specs(scale, _floats(o["multiples"], "multiples"), variants)
    results = _run_all([c[3] for c in cells], engine)
    res = PresetResult("dynamics")
    rows, series = [], []
    for (m, cap, v, spec), r in zip(cells, results):
        if isinstance(r, str):
            res.failures += 1
            rows.append({"multiple": m, "capacity": cap, "variant": v, "status": r})
            continue
        rows.append(dynamics_row(m, cap, v, r))
        for t, cw in zip(r.series["time"], r.series["cwnd"]):
            series.append({"multiple": m, "variant": v, "time_ns": t, "cwnd_0": cw[0], "cwnd_1": cw[1]})
    _write(res, out_dir, "dynamics", rows, scale, o,
           plot_script("dynamics.csv", "capacity", "amplitude", "variant",
                       "cwnd oscillation amplitude vs capacity", logx=True))
    _write(res, out_dir, "dynamics_series", series, scale, o,
           plot_script("dynamics_series.csv", "cwnd_0", "cwnd_1", "variant",
                       "cwnd phase portrait (filter by multiple column)"))
    return res


def preset_table(scale: Scale, out_dir: Path, overrides=None, engine=None) -> PresetResult:
    """Numeric metrics for the eight table contracts beside their closed forms."""
    o = _opts(overrides, {"ds": [0.5, 1.0, 2.0], "ks": [1, 2, 3, 4], "ns": [2, 4, 8], "alpha": 3.0})
    res = PresetResult("table")
    rows = table_rows(default_table_entries(float(o["alpha"])), _floats(o["ds"], "ds"),
                      _ints(o["ks"], "ks"), _ints(o["ns"], "ns"))
    for row in rows:
        v, exact = row["value"], row["closed_form"]
        finite = v is not None and exact is not None and math.isfinite(v) and math.isfinite(exact)
        row["rel_error"] = v / exact - 1.0 if finite else None
        both_inf = v is not None and exact is not None and math.isinf(v) and math.isinf(exact)
        row["matches"] = both_inf or (finite and abs(row["rel_error"]) <= 0.01)
        if row["status"] != "ok" or not row["matches"]:
            res.failures += 1
    _write(res, out_dir, "table", rows, scale, o,
           plot_script("table.csv", "param", ["value", "closed_form"], "contract_id",
                       "metrics vs parameter (filter by metric column)", logy=True))
    return res


BOUND_FIELDS = ("bound_kind", "eps", "alpha", "ds", "s_min", "s_max", "n", "s_ratio", "bound_value",
                "corner_value", "achieving_contract_id")


def bound_row(report) -> dict:
    row = {k: report.inputs.get(k) for k in BOUND_FIELDS[1:8]}
    row["bound_kind"] = report.bound_kind.value
    row["bound_value"] = report.bound_value
    corner = report.achieved_by
    value = None
    if corner is not None:
        if report.bound_kind in (BoundKind.GROWTH_GIVEN_ROBUSTNESS, BoundKind.GROWTH_GIVEN_FAIRNESS):
            value = growth(corner, int(report.inputs["n"]))
        else:
            value = bandwidth_range(corner)
    row["corner_value"] = value
    row["achieving_contract_id"] = report.achieved_by_id
    return row


def preset_bounds(scale: Scale, out_dir: Path, overrides=None, engine=None) -> PresetResult:
    o = _opts(overrides, {"eps": [1.5, 2.0, 4.0], "alphas": [1.0, 2.0, 3.0], "ns": [2, 4, 8],
                          "s_ratio": 100.0})
    res = PresetResult("bounds")
    rows = []
    s_ratio = float(o["s_ratio"])
    for eps in _floats(o["eps"], "eps"):
        for n in _ints(o["ns"], "ns"):
            rows.append(bound_row(bound_report("growth_given_robustness", eps=eps, ds=1.0, s_min=1.0, n=n)))
        rows.append(bound_row(bound_report("range_given_robustness", eps=eps, ds=1.0, s_min=1.0,
                                           s_max=s_ratio)))
    for a in _floats(o["alphas"], "alphas"):
        for n in _ints(o["ns"], "ns"):
            rows.append(bound_row(bound_report("growth_given_fairness", alpha=a, n=n)))
        rows.append(bound_row(bound_report("range_given_fairness", alpha=a, s_ratio=s_ratio)))
    _write(res, out_dir, "bounds", rows, scale, o,
           plot_script("bounds.csv", "n", ["bound_value", "corner_value"], "bound_kind",
                       "bounds and the corner contracts that meet them"))
    return res


def fit_demo_cases(scale: Scale) -> list[tuple[str, CcaSpec, dict]]:
    """(name, cca, base overrides) for the fit demonstration sweeps."""
    red = RedParams(20, 220, 1.0)
    ecn = Contract.power_law(0.5, 0.001, 0.9, rate_scale=scale.capacity / 2, stat_scale=0.002)
    return [
        ("canonical 1/s", CcaSpec("canonical_rtt_ratio", scale.contract(1.0)), {}),
        ("canonical 1/s^2", CcaSpec("canonical_rtt_ratio", scale.contract(2.0)), {}),
        ("ecn 1/sqrt(s)", CcaSpec("ecn_canonical", ecn, red=red), {"red": red}),
    ]


FIT_DEMO_EXPECT = {"canonical 1/s": (StatKind.QUEUE_DELAY, 1.0), "canonical 1/s^2": (StatKind.QUEUE_DELAY, 2.0),
                   "ecn 1/sqrt(s)": (StatKind.ECN_RATE, 0.5)}


def preset_fit_demo(scale: Scale, out_dir: Path, overrides=None, engine=None) -> PresetResult:
    o = _opts(overrides, {"capacity_fractions": [0.24, 0.48, 0.96], "flows": [2, 4, 8]})
    caps = [f * scale.capacity for f in _floats(o["capacity_fractions"], "capacity_fractions")]
    flows = _ints(o["flows"], "flows")
    res = PresetResult("fit-demo")
    rows, sample_rows = [], []
    for name, cca, extra in fit_demo_cases(scale):
        base = scale.scenario(Dumbbell(2), cca, red=extra.get("red"), duration=scale.duration // 2)
        samples: list[Sample] = collect(caps, flows, cca, base)
        res.failures += sum(1 for s in samples if s.error)
        for s, r in zip(samples, samples_rows(samples)):
            sample_rows.append({"cca": name, **dict(zip(SAMPLE_FIELDS, r))})
        stat, shape = FIT_DEMO_EXPECT[name]
        row = {"cca": name, "expected_stat": stat.value, "expected_shape": shape}
        try:
            best = select_best(samples)
        except ContractLensError as exc:
            res.failures += 1
            row["status"] = f"{type(exc).__name__}: {exc}"
        else:
            row.update(stat=best.stat.value, form=best.form.value, shape=best.shape, nmse=best.nmse,
                       r2=best.r2, verdict=best.verdict, status="ok")
        rows.append(row)
    _write(res, out_dir, "fit_results", rows, scale, o, None)
    _write(res, out_dir, "fit_samples", sample_rows, scale, o,
           plot_script("fit_samples.csv", "queue_delay", "throughput", "cca",
                       "throughput vs queueing delay", logx=True, logy=True))
    return res


PRESETS: dict[str, Callable[..., PresetResult]] = {
    "robustness": preset_robustness,
    "fairness": preset_fairness,
    "growth": preset_growth,
    "starvation": preset_starvation,
    "dynamics": preset_dynamics,
    "table": preset_table,
    "bounds": preset_bounds,
    "fit-demo": preset_fit_demo,
}


def run_preset(name: str, out_dir, overrides: dict | None = None, scale: Scale = DESK,
               engine: str | None = None) -> PresetResult:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return PRESETS[name](scale, out, overrides, engine)


def scale_with(scale: Scale, **changes) -> Scale:
    return replace(scale, **{k: v for k, v in changes.items() if v is not None})


__all__ = ["Scale", "DESK", "DATACENTER", "PresetResult", "PRESETS", "run_preset", "plot_script",
           "oscillation_amplitude", "dynamics_specs", "starvation_specs", "scale_with"]
