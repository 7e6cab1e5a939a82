"""Trace and summary CSV writers for simulation results."""
from __future__ import annotations

from ..csvio import metadata_line, render, write_csv
from .spec import FlowSummary

TRACE_HEADER = ("time_ns", "flow_id", "event", "seq", "rtt_ns", "cwnd_bytes")


def _meta(result, config) -> str:
    return metadata_line(seed=result.spec.seed, config=config, engine=result.engine)


def trace_csv_text(result, config=None) -> str:
    if result.trace is None:
        raise ValueError("run was made without trace=True")
    return render(TRACE_HEADER, (r[:6] for r in result.trace), _meta(result, config))


def write_trace_csv(result, path, config=None):
    if result.trace is None:
        raise ValueError("run was made without trace=True")
    return write_csv(path, TRACE_HEADER, (r[:6] for r in result.trace), _meta(result, config))


def summary_rows(result):
    for f in result.flows:
        yield [getattr(f, name) for name in FlowSummary.FIELDS]


def write_summary_csv(result, path, config=None):
    return write_csv(path, FlowSummary.FIELDS, summary_rows(result), _meta(result, config))


def write_series_csv(result, path, config=None):
    """Sampled cwnd per flow and queue length per link (needs sample_interval > 0)."""
    s = result.series
    nf = result.spec.n_flows
    nl = result.spec.topology.n_links
    header = ["time_ns"] + [f"cwnd_{i}" for i in range(nf)] + [f"queue_{l}" for l in range(nl)]
    rows = ([t] + list(c) + list(q) for t, c, q in zip(s["time"], s["cwnd"], s["qlen"]))
    return write_csv(path, header, rows, _meta(result, config))
