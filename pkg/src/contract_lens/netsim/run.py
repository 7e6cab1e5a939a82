"""Run a scenario, summarise it, and audit the result."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from ..cca import FlowContext, build_cca
from ..contract import StatKind
from ..errors import EmptyWindow
from .engine import engine_label, select_engine
from .spec import FlowSummary, ScenarioSpec

NS = 1_000_000_000
STALL_FRACTION = 0.02


@dataclass
class RunResult:
    spec: ScenarioSpec
    flows: list[FlowSummary]
    links: dict
    series: dict
    trace: list | None
    counters: dict
    events: int
    engine: str
    audit: dict = field(default_factory=dict)

    @property
    def stalled(self) -> list[int]:
        """Flows that sent nothing after warmup (starvation indicator)."""
        return [f.flow_id for f in self.flows if f.stalled]

    @property
    def throughputs(self) -> list[float]:
        return [f.throughput for f in self.flows]


def _link_rng(seed: int, link: int) -> random.Random:
    return random.Random(seed * 1_000_003 + link)


def build_engine(spec: ScenarioSpec, engine: str | None = None):
    """Instantiate controllers and the engine; returns (engine, controllers, engine name)."""
    topo = spec.topology
    nl = topo.n_links
    ser = spec.serialization_ns
    link = spec.link
    red = None
    if link.red is not None:
        red = (float(link.red.k_min), float(link.red.k_max), float(link.red.max_mark_prob))
    ccas = []
    fwd, ack = [], []
    for i in range(spec.n_flows):
        ctx = FlowContext(packet_size=spec.packet_size, rtprop=spec.cca_rtprop(i),
                          serialization_ns=ser, capacity_hint=link.capacity)
        ccas.append(build_cca(spec.flow_cca(i), ctx))
        nz = spec.noise_for(i)
        fwd.append(link.prop_delay + (nz.extra_delay if nz else 0))
        ack.append(link.prop_delay)
    cls = select_engine(engine)
    eng = cls(
        [ser] * nl,
        [-1 if link.buffer is None else link.buffer] * nl,
        [red] * nl,
        [_link_rng(spec.seed, l) if red is not None else None for l in range(nl)],
        topo.paths(), fwd, ack, ccas, spec.packet_size,
        spec.duration, spec.warmup_ns, spec.sample_interval, spec.trace, spec.max_burst,
        spec.start_times or None,
    )
    return eng, ccas, engine_label(cls)


def run(spec: ScenarioSpec, engine: str | None = None) -> RunResult:
    """Simulate ``spec`` and return per-flow summaries plus raw series."""
    eng, ccas, label = build_engine(spec, engine)
    raw = eng.run()
    window = spec.duration - spec.warmup_ns
    fl = raw["flows"]
    flows = []
    for i, cca in enumerate(ccas):
        throughput = fl["w_bytes"][i] * NS / window
        rtts = np.asarray(fl["rtt_samples"][i], dtype=np.int64)
        true_rtprop = spec.true_rtprop(i)
        acks = fl["w_acks"][i]
        sent = fl["w_sent"][i]
        lost = fl["w_losses"][i]
        if len(rtts):
            d_avg, d_p50, d_min = float(rtts.mean()), float(np.median(rtts)), float(rtts.min())
        else:
            d_avg = d_p50 = d_min = math.nan
        flows.append(FlowSummary(
            flow_id=i,
            throughput=throughput,
            delay_avg=d_avg,
            delay_p50=d_p50,
            delay_min=d_min,
            queue_delay=d_min - true_rtprop if len(rtts) else math.nan,
            queue_delay_avg=d_avg - true_rtprop if len(rtts) else math.nan,
            loss_rate=lost / (acks + lost) if acks + lost else 0.0,
            ecn_rate=fl["w_marks"][i] / acks if acks else 0.0,
            max_per_hop_delay_avg=fl["w_hop_sum"][i] / acks if acks else math.nan,
            domain_clipped=bool(cca.domain_clipped),
            stalled=sent == 0 or throughput < STALL_FRACTION * spec.fair_share(i),
            rtprop=true_rtprop,
            sent=sent,
            acked=acks,
        ))
    counters = {k: v for k, v in fl.items() if k != "rtt_samples"}
    result = RunResult(spec, flows, raw["links"], raw["samples"], raw["trace"], counters,
                       raw["events"], label)
    result.audit = audit_counters(result)
    if result.trace is not None:
        result.audit.update(audit_trace(result.trace, spec.n_flows, result))
    return result


# --- RED ---------------------------------------------------------------------

def red_probability(queue_len: float, red) -> float:
    """Marking probability: 0 up to k_min, linear to max_mark_prob at k_max, flat above."""
    if queue_len >= red.k_max:
        return float(red.max_mark_prob)
    if queue_len <= red.k_min:
        return 0.0
    return red.max_mark_prob * (queue_len - red.k_min) / (red.k_max - red.k_min)


def red_mark(queue_len: float, red, rng: random.Random) -> bool:
    """One marking decision; draws from ``rng`` only when the probability is positive."""
    prob = red_probability(queue_len, red)
    return prob > 0.0 and rng.random() < prob


# --- measurement -------------------------------------------------------------

def measure_statistic(trace, kind: StatKind | str, window: tuple[int, int], flow_id: int,
                      rtprop: int = 0) -> float:
    """Aggregate one statistic for ``flow_id`` over events with time in ``window``.

    ``trace`` rows are ``(time_ns, flow_id, event, seq, rtt_ns, cwnd)``.
    Delay statistics use ACK rows; QueueDelay takes the window minimum of
    ``rtt - rtprop``.  ACK rows produced by the engines carry a seventh field,
    the largest queueing delay the packet met at any single hop (exported by
    the links); MaxPerHopDelay takes the window minimum of that value.
    """
    kind = StatKind(kind)
    t0, t1 = window
    rows = [r for r in trace if r[1] == flow_id and t0 <= r[0] <= t1]
    acks = [r for r in rows if r[2] == "ack"]
    if kind is StatKind.LOSS_RATE:
        sends = sum(1 for r in rows if r[2] == "send")
        if not sends:
            raise EmptyWindow("no packets sent in window")
        return sum(1 for r in rows if r[2] == "drop") / sends
    if not acks:
        raise EmptyWindow("no acknowledgements in window")
    if kind is StatKind.ECN_RATE:
        return sum(1 for r in rows if r[2] == "mark") / len(acks)
    if kind is StatKind.MAX_PER_HOP_DELAY:
        hops = [r[6] for r in acks if len(r) > 6]
        if not hops:
            raise EmptyWindow("no per-hop delay samples in window")
        return float(min(hops))
    rtts = np.array([r[4] for r in acks], dtype=float)
    if kind is StatKind.QUEUE_DELAY:
        return max(float(rtts.min()) - rtprop, 0.0)
    if kind is StatKind.AVG_DELAY:
        return float(rtts.mean())
    return float(np.median(rtts))


# --- audits --------------------------------------------------------------------

def audit_counters(result: RunResult) -> dict:
    """Conservation, FIFO, in-order delivery and link-utilisation checks."""
    c = result.counters
    spec = result.spec
    conservation = all(
        s == d + x + n for s, d, x, n in zip(c["sent"], c["delivered"], c["dropped"], c["in_network"])
    ) and all(
        s == a + k + i for s, a, k, i in zip(c["sent"], c["acked"], c["nacked"], c["inflight"])
    )
    # a link holds its waiting packets plus at most one in service
    fifo = all(v == 0 for v in result.links["fifo_violations"]) and all(
        q - 1 <= a - d <= q
        for a, d, q in zip(result.links["arrivals"], result.links["departures"], result.links["queue"])
    )
    in_order = all(v == 0 for v in c["order_violations"])
    busy_ok = all(d * spec.serialization_ns <= spec.duration + spec.serialization_ns
                  for d in result.links["departures"])
    return {"conservation": conservation, "fifo": fifo, "in_order": in_order,
            "utilization": busy_ok}


def audit_trace(trace, n_flows: int, result: RunResult | None = None) -> dict:
    """Replay a trace and check it is self-consistent (and matches the counters)."""
    outstanding = [set() for _ in range(n_flows)]
    next_seq = [0] * n_flows
    sends = [0] * n_flows
    acks = [0] * n_flows
    drops = [0] * n_flows
    ok = True
    last_t = -1
    for t, f, ev, seq, rtt, cwnd in (r[:6] for r in trace):
        if t < last_t:
            ok = False
        last_t = t
        if ev == "send":
            if seq != next_seq[f]:
                ok = False
            next_seq[f] += 1
            outstanding[f].add(seq)
            sends[f] += 1
        elif ev == "ack":
            if seq not in outstanding[f] or rtt < 0:
                ok = False
            outstanding[f].discard(seq)
            acks[f] += 1
        elif ev == "drop":
            if seq not in outstanding[f]:
                ok = False
            drops[f] += 1
        elif ev == "mark":
            if seq not in outstanding[f]:
                ok = False
        else:
            ok = False
    matches = True
    if result is not None:
        c = result.counters
        matches = (sends == list(c["sent"]) and acks == list(c["acked"])
                   and drops == list(c["dropped"]))
    return {"trace_consistent": ok, "trace_matches_counters": matches}
