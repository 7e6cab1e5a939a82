"""Congestion controllers: contract-following canonical dynamics plus baselines.

Each controller is built from an immutable :class:`CcaSpec` and driven by the
simulator through one of two hooks:

* interval controllers (canonical, MIMD, Vegas, ECN, max-hop) receive
  ``on_interval`` once per update period with the minimum RTT / per-hop delay
  and the ACK, mark and loss counts accumulated since the previous update;
* per-ACK controllers (Swift-like, AIMD-on-delay, Reno) receive ``on_ack``.

The update rules themselves are plain functions so they can be tested without
a simulator.  Units: cwnd in bytes, times in ns, rates in bytes/second.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .contract import Contract, Family, TabulatedContract, contract_from_record
from .errors import ConfigError, MissingCapacity

NS = 1_000_000_000
INITIAL_CWND_PKTS = 4


class CcaKind(enum.Enum):
    CANONICAL_RTT_RATIO = "canonical_rtt_ratio"
    MIMD_RATE_RATIO = "mimd_rate_ratio"
    MIMD_DELAY_RATIO = "mimd_delay_ratio"
    VEGAS = "vegas"
    SWIFT_LIKE = "swift_like"
    AIMD_ON_DELAY = "aimd_on_delay"
    RENO_LOSS = "reno_loss"
    ECN_CANONICAL = "ecn_canonical"
    MAX_HOP_DELAY_CANONICAL = "max_hop_delay_canonical"


_NEEDS_CONTRACT = {
    CcaKind.CANONICAL_RTT_RATIO, CcaKind.MIMD_RATE_RATIO, CcaKind.MIMD_DELAY_RATIO,
    CcaKind.SWIFT_LIKE, CcaKind.ECN_CANONICAL, CcaKind.MAX_HOP_DELAY_CANONICAL,
}
_PER_ACK = {CcaKind.SWIFT_LIKE, CcaKind.AIMD_ON_DELAY, CcaKind.RENO_LOSS}


@dataclass(frozen=True)
class RedParams:
    """RED marking thresholds in packets; marks only, never drops."""

    k_min: float
    k_max: float
    max_mark_prob: float = 1.0

    def __post_init__(self):
        if not 0 <= self.k_min < self.k_max:
            raise ConfigError("RED needs 0 <= k_min < k_max")
        if not 0 < self.max_mark_prob <= 1:
            raise ConfigError("RED max_mark_prob must lie in (0, 1]")


@dataclass(frozen=True)
class CcaSpec:
    """Immutable controller description; unused fields are ignored by a kind.

    ``threshold_ns`` and ``ai_bytes`` default to sensible values when ``None``
    (one packet of additive increase; threshold must be given for AIMD).
    """

    kind: CcaKind
    contract: Contract | TabulatedContract | None = None
    update_interval_rtts: float = 2.0
    alpha: float = 1.0
    clamp_lo: float | None = None
    clamp_hi: float | None = None
    alpha_pkts: float = 2.0
    ai_bytes: float | None = None
    md_factor: float = 0.5
    threshold_ns: int | None = None
    red: RedParams | None = None
    capacity_hint: float | None = None

    def __post_init__(self):
        if not isinstance(self.kind, CcaKind):
            object.__setattr__(self, "kind", CcaKind(self.kind))
        kind = self.kind
        if kind in _NEEDS_CONTRACT and self.contract is None:
            raise ConfigError(f"{kind.value} needs a contract")
        if not self.update_interval_rtts > 0:
            raise ConfigError("update_interval_rtts must be positive")
        if not 0 < self.alpha <= 1:
            raise ConfigError("MIMD alpha must lie in (0, 1]")
        if self.clamp_lo is not None and not 0 < self.clamp_lo < 1:
            raise ConfigError("clamp_lo must lie in (0, 1)")
        if self.clamp_hi is not None and not self.clamp_hi > 1:
            raise ConfigError("clamp_hi must exceed 1")
        if not 0 < self.md_factor < 1:
            raise ConfigError("md_factor must lie in (0, 1)")
        if not self.alpha_pkts > 0:
            raise ConfigError("vegas alpha_pkts must be positive")
        if self.ai_bytes is not None and not self.ai_bytes > 0:
            raise ConfigError("ai_bytes must be positive")
        if kind is CcaKind.AIMD_ON_DELAY and (self.threshold_ns is None or self.threshold_ns <= 0):
            raise ConfigError("aimd_on_delay needs a positive threshold_ns")

    @property
    def per_ack(self) -> bool:
        return self.kind in _PER_ACK

    def with_contract(self, contract) -> "CcaSpec":
        return replace(self, contract=contract)


@dataclass(frozen=True)
class FlowContext:
    """What a controller knows about its path (oracular, from the topology)."""

    packet_size: int
    rtprop: int
    serialization_ns: int
    capacity_hint: float | None = None


@dataclass
class Feedback:
    """One acknowledgement (or loss notification) as seen by the sender."""

    now: int
    rtt_sample: int
    rtprop: int
    loss_event: bool = False
    ecn_marked: bool = False
    max_per_hop_delay: int | None = None
    acked_bytes: int = 0


# --- pure update rules -------------------------------------------------------

def canonical_rtt_ratio_update(cwnd: float, rtprop: float, current_delay: float,
                               contract) -> tuple[float, bool]:
    """RTT-ratio MIMD step; returns ``(new_cwnd, target_was_clamped)``.

    The rate estimate is ``cwnd / (rtprop + current_delay)``, the target delay is
    the contract inverse at that rate, and the window scales by the ratio of
    target RTT to current RTT.
    """
    current_delay = max(float(current_delay), 0.0)
    rtt = rtprop + current_delay
    target, clipped = contract.inverse_clamped(cwnd * NS / rtt)
    return cwnd * (rtprop + target) / rtt, clipped


def mimd_ratio_update(cwnd: float, rtprop: float, current_delay: float, contract, mode: str,
                      alpha: float = 1.0, clamp_lo: float | None = None,
                      clamp_hi: float | None = None,
                      delay_floor: float = 0.0) -> tuple[float, bool]:
    """Rate-ratio or delay-ratio MIMD step with averaging gain and clamps."""
    current_delay = max(float(current_delay), 0.0)
    rate = cwnd * NS / (rtprop + current_delay)
    if mode == "rate":
        s, clipped = contract.clamp_stat(current_delay)
        tcwnd = cwnd * float(contract.evaluate(s)) / rate
    elif mode == "delay":
        target, clipped = contract.inverse_clamped(rate)
        tcwnd = cwnd * target / max(current_delay, delay_floor, 1e-300)
    else:
        raise ValueError(f"unknown MIMD mode {mode!r}")
    nxt = (1.0 - alpha) * cwnd + alpha * tcwnd
    if clamp_lo is not None:
        nxt = max(nxt, clamp_lo * cwnd)
    if clamp_hi is not None:
        nxt = min(nxt, clamp_hi * cwnd)
    return nxt, clipped


def vegas_update(cwnd: float, rtprop: float, rtt: float, alpha_pkts: float,
                 packet_size: int) -> float:
    """Additive step of one packet towards ``alpha_pkts`` packets queued."""
    diff = cwnd / packet_size * (1.0 - rtprop / rtt)
    if diff < alpha_pkts:
        return cwnd + packet_size
    if diff > alpha_pkts:
        return cwnd - packet_size
    return cwnd


def aimd_on_delay_update(cwnd: float, delay: float, threshold: float, ai_bytes: float,
                         md_factor: float, packet_size: int, may_decrease: bool = True) -> float:
    """Per-ACK AIMD on a fixed delay threshold (the starvation pitfall)."""
    if delay > threshold:
        return cwnd * md_factor if may_decrease else cwnd
    return cwnd + ai_bytes * packet_size / cwnd


def swift_like_update(cwnd: float, rtt: float, rtprop: float, contract, ai_bytes: float,
                      md_factor: float, packet_size: int,
                      may_decrease: bool = True) -> tuple[float, bool]:
    """Per-ACK AIMD towards the contract's target delay; ties take the AI branch."""
    target, clipped = contract.inverse_clamped(cwnd * NS / rtt)
    if rtt - rtprop <= target:
        return cwnd + ai_bytes * packet_size / cwnd, clipped
    return (cwnd * md_factor if may_decrease else cwnd), clipped


def ecn_target_rtt(target_ecn_rate: float, red: RedParams | None, capacity_hint: float | None,
                   rtprop: float, packet_size: int) -> float:
    """RTT at which RED marks at ``target_ecn_rate`` on a single bottleneck.

    The marking probability is normalised by ``max_mark_prob`` so the ramp maps
    onto ``[k_min, k_max]`` for any RED slope; rates past the ramp saturate.
    """
    if capacity_hint is None or not capacity_hint > 0:
        raise MissingCapacity("ECN target inversion needs the link capacity")
    if red is None:
        raise ConfigError("ECN target inversion needs RED parameters")
    frac = min(max(target_ecn_rate / red.max_mark_prob, 0.0), 1.0)
    queue_pkts = red.k_min + (red.k_max - red.k_min) * frac
    return rtprop + packet_size * NS / capacity_hint * queue_pkts


# --- stateful controllers ----------------------------------------------------

class Controller:
    """Common state: window, oracular RTprop and the domain-clipping flag."""

    per_ack = False

    def __init__(self, spec: CcaSpec, ctx: FlowContext):
        self.spec = spec
        self.ctx = ctx
        self.pkt = ctx.packet_size
        self.rtprop = ctx.rtprop
        self.cwnd = float(INITIAL_CWND_PKTS * ctx.packet_size)
        self.next_update = 0
        self.domain_clipped = False
        self.updates = 0
        self.max_cwnd = self.cwnd

    def _set(self, cwnd: float) -> float:
        cwnd = max(float(cwnd), float(self.pkt))
        self.cwnd = cwnd
        self.updates += 1
        if cwnd > self.max_cwnd:
            self.max_cwnd = cwnd
        return cwnd

    def feed(self, fb: Feedback) -> float:
        """Per-ACK convenience entry point using a :class:`Feedback` record."""
        hop = fb.max_per_hop_delay or 0
        if self.per_ack:
            rtt = -1 if fb.loss_event else fb.rtt_sample
            return self.on_ack(fb.now, rtt, int(fb.ecn_marked), fb.loss_event, hop)
        if fb.loss_event:
            return self.cwnd
        return self.on_interval(fb.now, fb.rtt_sample, hop, 1, int(fb.ecn_marked), 0)


class IntervalController(Controller):
    interval_rtts = 2.0

    def __init__(self, spec, ctx):
        super().__init__(spec, ctx)
        self.interval_rtts = spec.update_interval_rtts

    def on_interval(self, now, min_rtt, min_hop, acks, marks, losses) -> float:
        cwnd = self._set(self.step(min_rtt, min_hop, acks, marks, losses))
        self.next_update = now + int(self.interval_rtts * min_rtt)
        return cwnd

    def step(self, min_rtt, min_hop, acks, marks, losses) -> float:  # pragma: no cover
        raise NotImplementedError


class CanonicalRttRatio(IntervalController):
    def step(self, min_rtt, min_hop, acks, marks, losses):
        new, clipped = canonical_rtt_ratio_update(self.cwnd, self.rtprop, min_rtt - self.rtprop,
                                                  self.spec.contract)
        self.domain_clipped |= clipped
        return new


class MimdRatio(IntervalController):
    def __init__(self, spec, ctx, mode):
        super().__init__(spec, ctx)
        self.mode = mode

    def step(self, min_rtt, min_hop, acks, marks, losses):
        sp = self.spec
        new, clipped = mimd_ratio_update(self.cwnd, self.rtprop, min_rtt - self.rtprop, sp.contract,
                                         self.mode, sp.alpha, sp.clamp_lo, sp.clamp_hi,
                                         delay_floor=self.ctx.serialization_ns)
        self.domain_clipped |= clipped
        return new


class Vegas(IntervalController):
    def __init__(self, spec, ctx):
        super().__init__(spec, ctx)
        self.interval_rtts = 1.0

    def step(self, min_rtt, min_hop, acks, marks, losses):
        return vegas_update(self.cwnd, self.rtprop, max(min_rtt, self.rtprop),
                            self.spec.alpha_pkts, self.pkt)


class EcnCanonical(IntervalController):
    """RTT-ratio update where both RTTs are implied by ECN rates through RED."""

    def __init__(self, spec, ctx):
        super().__init__(spec, ctx)
        self.capacity = spec.capacity_hint if spec.capacity_hint is not None else ctx.capacity_hint
        if self.capacity is None:
            raise MissingCapacity("ecn_canonical needs a capacity hint")
        if spec.red is None:
            raise ConfigError("ecn_canonical needs RED parameters")

    def step(self, min_rtt, min_hop, acks, marks, losses):
        sp = self.spec
        measured = marks / acks
        target, clipped = sp.contract.inverse_clamped(self.cwnd * NS / min_rtt)
        self.domain_clipped |= clipped
        t_rtt = ecn_target_rtt(target, sp.red, self.capacity, self.rtprop, self.pkt)
        c_rtt = ecn_target_rtt(measured, sp.red, self.capacity, self.rtprop, self.pkt)
        return self.cwnd * t_rtt / c_rtt


class MaxHopDelayCanonical(IntervalController):
    """RTT-ratio update driven by the largest single-hop queueing delay."""

    def step(self, min_rtt, min_hop, acks, marks, losses):
        contract = self.spec.contract
        target, clipped = contract.inverse_clamped(self.cwnd * NS / min_rtt)
        self.domain_clipped |= clipped
        return self.cwnd * (self.rtprop + target) / (self.rtprop + max(min_hop, 0))


class PerAckController(Controller):
    per_ack = True

    def __init__(self, spec, ctx):
        super().__init__(spec, ctx)
        self.ai = spec.ai_bytes if spec.ai_bytes is not None else float(ctx.packet_size)
        self.last_md = -(1 << 62)
        self.last_rtt = ctx.rtprop

    def _may_decrease(self, now) -> bool:
        return now - self.last_md >= self.last_rtt

    def _decrease(self, now) -> float:
        if self._may_decrease(now):
            self.last_md = now
            return self._set(self.cwnd * self.spec.md_factor)
        return self.cwnd


class SwiftLike(PerAckController):
    def on_ack(self, now, rtt, ecn, lost, hop):
        if lost:
            return self._decrease(now)
        self.last_rtt = rtt
        may = self._may_decrease(now)
        new, clipped = swift_like_update(self.cwnd, rtt, self.rtprop, self.spec.contract,
                                         self.ai, self.spec.md_factor, self.pkt, may)
        self.domain_clipped |= clipped
        if new < self.cwnd:
            self.last_md = now
        return self._set(new)


class AimdOnDelay(PerAckController):
    def on_ack(self, now, rtt, ecn, lost, hop):
        if lost:
            return self._decrease(now)
        self.last_rtt = rtt
        may = self._may_decrease(now)
        new = aimd_on_delay_update(self.cwnd, rtt - self.rtprop, self.spec.threshold_ns,
                                   self.ai, self.spec.md_factor, self.pkt, may)
        if new < self.cwnd:
            self.last_md = now
        return self._set(new)


class RenoLoss(PerAckController):
    def on_ack(self, now, rtt, ecn, lost, hop):
        if lost:
            return self._decrease(now)
        self.last_rtt = rtt
        return self._set(self.cwnd + self.ai * self.pkt / self.cwnd)


def build_cca(spec: CcaSpec, ctx: FlowContext) -> Controller:
    """Instantiate the controller for one flow."""
    kind = spec.kind
    if kind is CcaKind.CANONICAL_RTT_RATIO:
        return CanonicalRttRatio(spec, ctx)
    if kind is CcaKind.MIMD_RATE_RATIO:
        return MimdRatio(spec, ctx, "rate")
    if kind is CcaKind.MIMD_DELAY_RATIO:
        return MimdRatio(spec, ctx, "delay")
    if kind is CcaKind.VEGAS:
        return Vegas(spec, ctx)
    if kind is CcaKind.SWIFT_LIKE:
        return SwiftLike(spec, ctx)
    if kind is CcaKind.AIMD_ON_DELAY:
        return AimdOnDelay(spec, ctx)
    if kind is CcaKind.RENO_LOSS:
        return RenoLoss(spec, ctx)
    if kind is CcaKind.ECN_CANONICAL:
        return EcnCanonical(spec, ctx)
    return MaxHopDelayCanonical(spec, ctx)


def default_contract(exponent: float, capacity: float, rtprop_ns: float,
                     s_min_fraction: float = 0.1, s_ratio: float = 100.0) -> Contract:
    """Power law ``Bmax * (s_min / s) ** exponent`` with desk-scale defaults.

    ``s_min`` is a fraction of RTprop and ``Bmax`` the link capacity, so one
    flow alone settles at ``s_min`` worth of queueing delay.
    """
    s_min = s_min_fraction * rtprop_ns
    return Contract(Family.POWER_LAW, s_min, s_min * s_ratio, exponent=exponent,
                    rate_scale=capacity, stat_scale=s_min)


def spec_to_record(spec: CcaSpec) -> dict:
    """Flat dict view of a spec (internal units) for CSV metadata and round trips."""
    rec: dict = {"kind": spec.kind.value}
    for name in ("update_interval_rtts", "alpha", "clamp_lo", "clamp_hi", "alpha_pkts",
                 "ai_bytes", "md_factor", "threshold_ns", "capacity_hint"):
        value = getattr(spec, name)
        if value is not None:
            rec[name] = value
    if spec.red is not None:
        rec["red"] = {"k_min": spec.red.k_min, "k_max": spec.red.k_max,
                      "max_mark_prob": spec.red.max_mark_prob}
    if spec.contract is not None:
        rec["contract"] = spec.contract.to_record()
    return rec


def spec_from_record(rec: dict) -> CcaSpec:
    rec = dict(rec)
    kind = rec.pop("kind", None)
    if kind is None:
        raise ConfigError("cca record lacks 'kind'")
    try:
        kind = CcaKind(kind)
    except ValueError:
        raise ConfigError(f"unknown cca kind {kind!r}") from None
    if "contract" in rec:
        rec["contract"] = contract_from_record(rec["contract"])
    if "red" in rec:
        rec["red"] = RedParams(**rec["red"])
    allowed = {f for f in CcaSpec.__dataclass_fields__} - {"kind"}
    unknown = set(rec) - allowed
    if unknown:
        raise ConfigError(f"unknown cca key(s): {', '.join(sorted(unknown))}")
    return CcaSpec(kind, **rec)


__all__ = [
    "CcaKind", "CcaSpec", "RedParams", "FlowContext", "Feedback", "Controller",
    "build_cca", "default_contract", "canonical_rtt_ratio_update", "mimd_ratio_update",
    "vegas_update", "aimd_on_delay_update", "swift_like_update", "ecn_target_rtt",
    "spec_to_record", "spec_from_record",
]
