"""Scenario description types for the packet simulator (internal units)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..cca import CcaSpec, RedParams
from ..errors import ConfigError


@dataclass(frozen=True)
class LinkSpec:
    """Bottleneck link shared by every hop of a topology.

    ``capacity`` in bytes/s; ``prop_delay`` is the one-way propagation of each
    flow's path in ns, so the base RTT is ``2 * prop_delay``.  ``buffer`` is in
    packets, ``None`` meaning infinite.
    """

    capacity: float
    prop_delay: int
    buffer: int | None = None
    red: RedParams | None = None

    def __post_init__(self):
        if not (self.capacity > 0 and math.isfinite(self.capacity)):
            raise ConfigError("link capacity must be positive and finite")
        if self.prop_delay < 0:
            raise ConfigError("prop_delay must be non-negative")
        if self.buffer is not None and self.buffer < 1:
            raise ConfigError("buffer must hold at least one packet")
        if self.red is not None and self.buffer is not None and self.red.k_max > self.buffer:
            raise ConfigError("RED k_max must not exceed the buffer")


@dataclass(frozen=True)
class Dumbbell:
    flows: int

    def __post_init__(self):
        if self.flows < 1:
            raise ConfigError("dumbbell needs at least one flow")

    @property
    def n_flows(self) -> int:
        return self.flows

    @property
    def n_links(self) -> int:
        return 1

    def paths(self) -> list[tuple[int, ...]]:
        return [(0,)] * self.flows


@dataclass(frozen=True)
class ParkingLot:
    """``hops`` serial links; flow 0 crosses all, flow i uses link i-1 alone."""

    hops: int

    def __post_init__(self):
        if self.hops < 1:
            raise ConfigError("parking lot needs at least one hop")

    @property
    def n_flows(self) -> int:
        return self.hops + 1

    @property
    def n_links(self) -> int:
        return self.hops

    def paths(self) -> list[tuple[int, ...]]:
        return [tuple(range(self.hops))] + [(i,) for i in range(self.hops)]


@dataclass(frozen=True)
class NoiseSpec:
    """Persistent extra one-way delay on one flow's path."""

    flow_index: int
    extra_delay: int
    disclose_to_cca: bool = False

    def __post_init__(self):
        if self.extra_delay < 0:
            raise ConfigError("noise extra_delay must be non-negative")


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation run.

    ``cca`` is either one spec shared by all flows or a tuple with one spec per
    flow.  ``start_times`` (ns) optionally staggers flow starts,
    ``sample_interval`` (ns, 0 = off) enables the cwnd/queue time series and
    ``trace`` the per-packet event log.
    """

    topology: Dumbbell | ParkingLot
    link: LinkSpec
    cca: CcaSpec | tuple[CcaSpec, ...]
    duration: int
    packet_size: int = 1500
    noise: tuple[NoiseSpec, ...] = ()
    warmup_fraction: float = 0.5
    seed: int = 1
    sample_interval: int = 0
    trace: bool = False
    max_burst: int = 64
    start_times: tuple[int, ...] = ()
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if isinstance(self.noise, NoiseSpec):
            object.__setattr__(self, "noise", (self.noise,))
        else:
            object.__setattr__(self, "noise", tuple(self.noise))
        if isinstance(self.cca, list):
            object.__setattr__(self, "cca", tuple(self.cca))
        if self.duration <= 0:
            raise ConfigError("duration must be positive")
        if self.packet_size <= 0:
            raise ConfigError("packet_size must be positive")
        if not 0 < self.warmup_fraction < 1:
            raise ConfigError("warmup_fraction must lie in (0, 1)")
        if self.sample_interval < 0:
            raise ConfigError("sample_interval must be non-negative")
        if self.max_burst < 1:
            raise ConfigError("max_burst must be >= 1")
        n = self.topology.n_flows
        object.__setattr__(self, "start_times", tuple(int(t) for t in self.start_times))
        if self.start_times and (len(self.start_times) != n
                                 or any(not 0 <= t < self.duration for t in self.start_times)):
            raise ConfigError("start_times needs one value in [0, duration) per flow")
        if isinstance(self.cca, tuple) and len(self.cca) != n:
            raise ConfigError(f"{len(self.cca)} cca specs for {n} flows")
        seen = set()
        for nz in self.noise:
            if not 0 <= nz.flow_index < n:
                raise ConfigError(f"noise flow_index {nz.flow_index} out of range (0..{n - 1})")
            if nz.flow_index in seen:
                raise ConfigError(f"duplicate noise entry for flow {nz.flow_index}")
            seen.add(nz.flow_index)

    @property
    def n_flows(self) -> int:
        return self.topology.n_flows

    def flow_cca(self, i: int) -> CcaSpec:
        return self.cca[i] if isinstance(self.cca, tuple) else self.cca

    def noise_for(self, i: int) -> NoiseSpec | None:
        for nz in self.noise:
            if nz.flow_index == i:
                return nz
        return None

    @property
    def serialization_ns(self) -> int:
        return max(1, round(self.packet_size * 1e9 / self.link.capacity))

    @property
    def warmup_ns(self) -> int:
        return int(self.duration * self.warmup_fraction)

    def fair_share(self, i: int) -> float:
        """Max-min fair rate of flow ``i`` (every link on its path is equally shared)."""
        paths = self.topology.paths()
        load = max(sum(1 for p in paths if l in p) for l in paths[i])
        return self.link.capacity / load

    def true_rtprop(self, i: int) -> int:
        """Minimum possible RTT of flow ``i`` including any noise hop."""
        hops = len(self.topology.paths()[i])
        nz = self.noise_for(i)
        extra = nz.extra_delay if nz else 0
        return 2 * self.link.prop_delay + hops * self.serialization_ns + extra

    def cca_rtprop(self, i: int) -> int:
        """RTprop handed to the controller; undisclosed noise is left out."""
        nz = self.noise_for(i)
        hidden = nz.extra_delay if nz and not nz.disclose_to_cca else 0
        return self.true_rtprop(i) - hidden


@dataclass(frozen=True)
class FlowSummary:
    """Post-warmup measurements for one flow; delays are RTTs in ns.

    ``stalled`` flags starvation: no packets sent after warmup, or throughput
    below 2% of the flow's fair share.
    """

    flow_id: int
    throughput: float
    delay_avg: float
    delay_p50: float
    delay_min: float
    queue_delay: float
    queue_delay_avg: float
    loss_rate: float
    ecn_rate: float
    max_per_hop_delay_avg: float
    domain_clipped: bool
    stalled: bool
    rtprop: int
    sent: int
    acked: int

    FIELDS = ("flow_id", "throughput", "delay_avg", "delay_p50", "delay_min", "queue_delay",
              "queue_delay_avg", "loss_rate", "ecn_rate", "max_per_hop_delay_avg",
              "domain_clipped", "stalled", "rtprop", "sent", "acked")
