"""Command line entry point: ``contract-lens {analyze,bounds,simulate,experiment,fit}``.

Exit codes: 0 success, 1 user error (bad config, bad input, failed cells),
2 internal error.
"""
from __future__ import annotations

import argparse
import sys
import traceback
from dataclasses import replace
from importlib import resources
from pathlib import Path

from . import __version__
from .cca import CcaSpec
from .config import MBPS, MS, load_analysis, load_scenario_config
from .csvio import metadata_line, render, write_csv
from .errors import ConfigError, ContractLensError, NoFit
from .experiments import DESK, DATACENTER, PRESETS, bound_row, run_preset, scale_with
from .fit import (FitResult, collect, fit_all, read_samples_csv, samples_rows, SAMPLE_FIELDS,
                  select_best)
from .netsim.io import write_series_csv, write_summary_csv, write_trace_csv
from .netsim.run import run
from .tradeoffs import BoundKind, bound_report, table_rows

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2

ANALYZE_FIELDS = ("contract_id", "metric", "param", "value", "argmax", "closed_form", "status")
BOUND_INPUTS = {
    BoundKind.GROWTH_GIVEN_ROBUSTNESS: ("eps", "ds", "s_min", "n"),
    BoundKind.RANGE_GIVEN_ROBUSTNESS: ("eps", "ds", "s_min", "s_max"),
    BoundKind.GROWTH_GIVEN_FAIRNESS: ("alpha", "n"),
    BoundKind.RANGE_GIVEN_FAIRNESS: ("alpha", "s_ratio"),
}
BOUND_COLUMNS = ("bound_kind", "eps", "ds", "s_min", "s_max", "n", "alpha", "s_ratio",
                 "bound_value", "corner_value", "achieving_contract_id", "achieving_contract")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with 2, which we reserve for bugs
        raise UsageError(f"{self.prog}: {message}")


def bundled(name: str) -> Path:
    """Path of a data file shipped with the package."""
    return Path(str(resources.files("contract_lens") / "data" / name))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
        print(f"wrote {out}", file=sys.stderr)
    else:
        sys.stdout.write(text)


def _record_text(record: dict) -> str:
    return ";".join(f"{k}={v}" for k, v in record.items())


# --- analyze -----------------------------------------------------------------------

def cmd_analyze(args) -> int:
    cfg = load_analysis(args.config)
    metrics = tuple(args.metric) if args.metric else cfg.metrics
    rows = table_rows(cfg.entries, cfg.ds, cfg.k, cfg.n, metrics, cfg.ds_relative)
    meta = metadata_line(config={"config": cfg.raw, "metrics": list(metrics)})
    if args.wide:
        cols = []
        for r in rows:
            col = r["metric"] if r["param"] is None else f"{r['metric']}@{r['param']:g}"
            if col not in cols:
                cols.append(col)
        table: dict[str, dict] = {}
        for r in rows:
            col = r["metric"] if r["param"] is None else f"{r['metric']}@{r['param']:g}"
            table.setdefault(r["contract_id"], {})[col] = r["value"]
        text = render(["contract_id", *cols], ([cid, *[v.get(c) for c in cols]] for cid, v in table.items()),
                      meta)
    else:
        text = render(ANALYZE_FIELDS, ([r[f] for f in ANALYZE_FIELDS] for r in rows), meta)
    _emit(text, args.output)
    failed = [r for r in rows if r["status"] != "ok"]
    for r in failed:
        print(f"warning: {r['contract_id']} {r['metric']}({r['param']}): {r['status']}", file=sys.stderr)
    return EXIT_OK


# --- bounds ------------------------------------------------------------------------

def cmd_bounds(args) -> int:
    given = {k: getattr(args, k) for k in ("eps", "ds", "s_min", "s_max", "n", "alpha", "s_ratio")
             if getattr(args, k) is not None}
    kinds = [BoundKind(args.kind)] if args.kind else list(BoundKind)
    rows = []
    for kind in kinds:
        need = BOUND_INPUTS[kind]
        missing = [k for k in need if k not in given]
        if missing:
            if args.kind:
                raise ConfigError(f"{kind.value} needs --{' --'.join(m.replace('_', '-') for m in missing)}")
            continue
        report = bound_report(kind, **{k: given[k] for k in need})
        row = bound_row(report)
        row["achieving_contract"] = _record_text(report.achieved_by.to_record()) if report.achieved_by else None
        rows.append(row)
    if not rows:
        raise ConfigError("no bound can be evaluated from the given inputs; "
                          "see `contract-lens bounds --help` for what each bound needs")
    text = render(BOUND_COLUMNS, ([r.get(c) for c in BOUND_COLUMNS] for r in rows),
                  metadata_line(config=given))
    _emit(text, args.output)
    return EXIT_OK


# --- simulate ----------------------------------------------------------------------

def cmd_simulate(args) -> int:
    source = args.scenario or bundled("scenario.toml")
    cfg = load_scenario_config(Path(source))
    spec = cfg.spec
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    spec = replace(spec, trace=not args.no_trace)
    result = run(spec, args.engine)
    out = Path(args.out_dir)
    files = [write_summary_csv(result, out / "summary.csv", cfg.raw)]
    if result.trace is not None:
        files.append(write_trace_csv(result, out / "trace.csv", cfg.raw))
    if spec.sample_interval:
        files.append(write_series_csv(result, out / "series.csv", cfg.raw))
    for f in result.flows:
        print(f"flow {f.flow_id}: {f.throughput / MBPS:.3f} Mbps, queue delay "
              f"{f.queue_delay / MS:.3f} ms{' (stalled)' if f.stalled else ''}"
              f"{' (domain clipped)' if f.domain_clipped else ''}")
    bad = [k for k, v in result.audit.items() if not v]
    for path in files:
        print(f"wrote {path}", file=sys.stderr)
    if bad:
        print(f"error: simulation audit failed: {', '.join(bad)}", file=sys.stderr)
        return EXIT_INTERNAL
    if result.stalled:
        print(f"note: flows {result.stalled} starved after warmup", file=sys.stderr)
    return EXIT_OK


# --- experiment --------------------------------------------------------------------

def _parse_sets(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        value = value.strip()
        out[key.strip()] = value.lower() == "true" if value.lower() in ("true", "false") else value
    return out


def cmd_experiment(args) -> int:
    scale = DATACENTER if args.datacenter_scale else DESK
    scale = scale_with(scale, seed=args.seed,
                       duration=None if args.duration_s is None else round(args.duration_s * 1e9))
    names = list(PRESETS) if args.preset == "all" else [args.preset]
    failures = 0
    for name in names:
        res = run_preset(name, Path(args.out_dir) / name if len(names) > 1 else args.out_dir,
                         _parse_sets(args.set), scale, args.engine)
        for path in res.files:
            print(f"wrote {path}", file=sys.stderr)
        print(f"{name}: {'ok' if res.ok else f'{res.failures} failed cell(s)'}")
        failures += res.failures
    return EXIT_OK if failures == 0 else EXIT_USER


# --- fit ---------------------------------------------------------------------------

def _sweep_samples(path):
    cfg = load_scenario_config(Path(path), extra_tables=("sweep",))
    sec = cfg.section("sweep")
    caps = [c * MBPS for c in (sec.num_list("capacities_mbps", [24, 48, 96]) if sec else [24, 48, 96])]
    flows = [int(n) for n in (sec.num_list("flows", [2, 3, 4, 5, 6, 7, 8]) if sec else range(2, 9))]
    if sec:
        sec.finish()
    base = cfg.spec
    cca = base.cca
    if not isinstance(cca, CcaSpec):
        raise ConfigError("fit sweeps need a single [cca] for every flow")
    return collect(caps, flows, cca, base), {"config": cfg.raw}


def cmd_fit(args) -> int:
    if sum(x is not None for x in (args.csv, args.sweep)) + bool(args.bundled) != 1:
        raise UsageError("fit: give exactly one of --csv, --sweep or --bundled")
    if args.sweep:
        samples, config = _sweep_samples(args.sweep)
    else:
        path = bundled("synthetic_fit.csv") if args.bundled else Path(args.csv)
        samples = read_samples_csv(path)
        config = {"csv": str(path)}
    out = Path(args.out_dir)
    meta = metadata_line(config=config)
    files = [write_csv(out / "samples.csv", SAMPLE_FIELDS, samples_rows(samples), meta)]
    usable = [s for s in samples if s.usable]
    print(f"{len(samples)} samples, {len(samples) - len(usable)} excluded (starved or failed)")
    try:
        best: FitResult = select_best(samples, args.form or None, args.stat or None)
    except NoFit as exc:
        files.append(write_csv(out / "fit.csv", ("selected", *FitResult.FIELDS), [], meta))
        for path in files:
            print(f"wrote {path}", file=sys.stderr)
        print(f"no contract: {exc}")
        return EXIT_OK
    ranked = fit_all(samples, args.form or None, args.stat or None)
    rows = [[r is best or (r.form is best.form and r.stat is best.stat), *r.row()] for r in ranked]
    files.append(write_csv(out / "fit.csv", ("selected", *FitResult.FIELDS), rows, meta))
    contract = best.to_contract()
    record = dict(contract.to_record(), stat_unit="ns") if contract is not None else None
    rec_rows = [[k, v] for k, v in (record or {}).items()]
    files.append(write_csv(out / "contract.csv", ("key", "value"), rec_rows, meta))
    for path in files:
        print(f"wrote {path}", file=sys.stderr)
    print(f"selected {best.form.value} on {best.stat.value}: shape {best.shape:.4g}, "
          f"nmse {best.nmse:.3g}, r2 {best.r2:.3f} -> {best.verdict}")
    if record is not None and best.has_contract:
        print("[cca.contract]")
        for k, v in record.items():
            print(f"{k} = {v!r}" if isinstance(v, str) else f"{k} = {v:.10g}")
    return EXIT_OK


# --- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="contract-lens", description="Analyse, simulate and fit congestion-control contracts.")
    p.add_argument("--version", action="version", version=f"contract-lens {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    a = sub.add_parser("analyze", help="metrics table for a set of contracts")
    a.add_argument("config", nargs="?", help="analysis TOML (default: the eight table contracts)")
    a.add_argument("-o", "--output", help="CSV path (default: stdout)")
    a.add_argument("--metric", action="append",
                   choices=["error_factor", "unfairness", "growth", "bandwidth_range"],
                   help="restrict to this metric (repeatable)")
    a.add_argument("--wide", action="store_true", help="one row per contract, one column per metric")
    a.set_defaults(func=cmd_analyze)

    b = sub.add_parser("bounds", help="tradeoff bounds and the corner contracts meeting them")
    b.add_argument("--kind", choices=[k.value for k in BoundKind])
    b.add_argument("--eps", type=float, help="robustness target (error factor > 1)")
    b.add_argument("--ds", type=float, help="statistic noise")
    b.add_argument("--s-min", dest="s_min", type=float)
    b.add_argument("--s-max", dest="s_max", type=float)
    b.add_argument("--n", type=int, help="flow-count factor for growth")
    b.add_argument("--alpha", type=float, help="alpha-fairness parameter")
    b.add_argument("--s-ratio", dest="s_ratio", type=float, help="s_max / s_min")
    b.add_argument("-o", "--output", help="CSV path (default: stdout)")
    b.set_defaults(func=cmd_bounds)

    s = sub.add_parser("simulate", help="run one scenario file")
    s.add_argument("scenario", nargs="?", help="scenario TOML (default: bundled 2-flow dumbbell)")
    s.add_argument("-o", "--out-dir", default="contract_lens_out")
    s.add_argument("--seed", type=int)
    s.add_argument("--no-trace", action="store_true", help="skip the per-packet trace CSV")
    s.add_argument("--engine", choices=["auto", "c", "python"], default="auto")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("experiment", help="run a validation preset")
    e.add_argument("preset", choices=[*PRESETS, "all"])
    e.add_argument("-o", "--out-dir", default="contract_lens_out")
    e.add_argument("--set", action="append", metavar="KEY=VALUE", help="preset override (repeatable)")
    e.add_argument("--datacenter-scale", action="store_true", help="100 Gbps / 12 us network instead of desk scale")
    e.add_argument("--duration-s", type=float, help="simulated seconds per run")
    e.add_argument("--seed", type=int)
    e.add_argument("--engine", choices=["auto", "c", "python"], default="auto")
    e.set_defaults(func=cmd_experiment)

    f = sub.add_parser("fit", help="derive a contract from a sweep or external measurements")
    f.add_argument("--csv", help="external CSV: capacity,flows,flow_id,throughput,avg_delay,p50_delay,loss_rate")
    f.add_argument("--sweep", help="scenario TOML with an optional [sweep] table")
    f.add_argument("--bundled", action="store_true", help="use the bundled synthetic CSV")
    f.add_argument("--form", action="append", choices=["power_law", "exponential", "linear", "logarithmic",
                                                        "shifted_power"])
    f.add_argument("--stat", action="append", choices=["queue_delay", "avg_delay", "p50_delay", "loss_rate",
                                                        "ecn_rate"])
    f.add_argument("-o", "--out-dir", default="contract_lens_out")
    f.set_defaults(func=cmd_fit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except (ContractLensError, FileNotFoundError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except KeyboardInterrupt:  # pragma: no cover
        return EXIT_USER
    except Exception:  # pragma: no cover - bugs end up here
        traceback.print_exc()
        print("internal error; please report the traceback above", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
