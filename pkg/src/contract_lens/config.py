"""TOML scenario and analysis configs, converted to internal units.

Config files use friendly units (Mbps, ms, packets); everything returned is
in bytes/s and ns.  Errors name the offending key and, when it can be found,
the line it sits on.  The full schema is documented in README.md.
"""
from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .cca import CcaKind, CcaSpec, RedParams, default_contract
from .contract import AggKind, Contract, Family, TabulatedContract
from .errors import ConfigError, ContractLensError
from .netsim.spec import Dumbbell, LinkSpec, NoiseSpec, ParkingLot, ScenarioSpec
from .tradeoffs import TableEntry, default_table_entries

MBPS = 1e6 / 8  # bytes/s per Mbps
MS = 1_000_000  # ns per ms
STAT_UNITS = {"ns": 1.0, "us": 1e3, "ms": 1e6, "s": 1e9, "1": 1.0}
ANALYSIS_METRICS = ("error_factor", "unfairness", "growth", "bandwidth_range")


def _key_line(text: str, table: str, key: str) -> int | None:
    """Best-effort line number of ``key`` inside ``[table]`` (or ``[[table]]``)."""
    current = ""
    want = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for lineno, line in enumerate(text.splitlines(), 1):
        m = re.match(r"^\s*\[\[?\s*([^\]]+?)\s*\]\]?\s*(#.*)?$", line)
        if m:
            current = m.group(1)
            if not key and current == table:
                return lineno
            continue
        if key and current == table and want.match(line):
            return lineno
    return None


class _Section:
    """Typed access to one TOML table that remembers which keys were read."""

    def __init__(self, data: dict, path: str, text: str, table: str | None = None):
        if not isinstance(data, dict):
            raise ConfigError(f"'{path}' must be a table")
        self.data = data
        self.path = path
        self.text = text
        self.table = path if table is None else table
        self.used: set[str] = set()

    def error(self, key: str, msg: str) -> ConfigError:
        name = f"{self.path}.{key}" if self.path and key else (key or self.path)
        line = _key_line(self.text, self.table, key)
        where = f" (line {line})" if line else ""
        return ConfigError(f"{name}{where}: {msg}")

    def has(self, key: str) -> bool:
        return key in self.data

    def raw(self, key: str, default=None):
        self.used.add(key)
        return self.data.get(key, default)

    def num(self, key: str, default=None, *, positive=False, nonneg=False, integer=False):
        self.used.add(key)
        if key not in self.data:
            if default is None:
                raise self.error(key, "required key is missing")
            return default
        v = self.data[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.error(key, f"expected a number, got {v!r}")
        if integer and int(v) != v:
            raise self.error(key, f"expected an integer, got {v!r}")
        if positive and not v > 0:
            raise self.error(key, f"must be positive, got {v!r}")
        if nonneg and v < 0:
            raise self.error(key, f"must be non-negative, got {v!r}")
        return int(v) if integer else float(v)

    def opt_num(self, key: str, **kw):
        return self.num(key, **kw) if key in self.data else None

    def string(self, key: str, default=None, choices=None) -> str:
        self.used.add(key)
        if key not in self.data:
            if default is None:
                raise self.error(key, "required key is missing")
            return default
        v = self.data[key]
        if not isinstance(v, str):
            raise self.error(key, f"expected a string, got {v!r}")
        if choices is not None and v not in choices:
            raise self.error(key, f"must be one of {', '.join(choices)}; got {v!r}")
        return v

    def boolean(self, key: str, default: bool) -> bool:
        self.used.add(key)
        v = self.data.get(key, default)
        if not isinstance(v, bool):
            raise self.error(key, f"expected true or false, got {v!r}")
        return v

    def num_list(self, key: str, default=None) -> list[float]:
        self.used.add(key)
        if key not in self.data:
            if default is None:
                raise self.error(key, "required key is missing")
            return list(default)
        v = self.data[key]
        if not isinstance(v, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
            raise self.error(key, f"expected a list of numbers, got {v!r}")
        return [float(x) for x in v]

    def sub(self, key: str) -> "_Section | None":
        self.used.add(key)
        if key not in self.data:
            return None
        return _Section(self.data[key], f"{self.path}.{key}" if self.path else key, self.text,
                        f"{self.table}.{key}" if self.table else key)

    def finish(self):
        extra = sorted(set(self.data) - self.used)
        if extra:
            raise self.error(extra[0], "unknown key")


def _parse(source) -> tuple[dict, str]:
    """``source`` is a path or a TOML string (anything containing a newline or '=')."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and "=" not in source):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {source}: {exc.strerror}") from None
    else:
        text = str(source)
    try:
        return tomllib.loads(text), text
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None


# --- contracts ----------------------------------------------------------------

def parse_contract(sec: _Section, capacity: float | None = None, rtprop: float | None = None,
                   stat_unit_default: str = "ms") -> Contract | TabulatedContract:
    """Contract table in friendly units.

    Either the shorthand ``exponent`` (+ ``s_min_fraction``, ``s_ratio``) for a
    desk-scale power law anchored at the link, or an explicit ``family`` with
    ``s_min``/``s_max``/``stat_scale``/``stat_shift`` in ``stat_unit`` and
    ``rate_scale_mbps`` (or ``rate_scale``, which may be ``"capacity"``).
    """
    if sec.has("exponent") and not sec.has("family"):
        if capacity is None or rtprop is None:
            raise sec.error("exponent", "shorthand contracts need a [link] section")
        exp = sec.num("exponent", positive=True)
        frac = sec.num("s_min_fraction", 0.1, positive=True)
        ratio = sec.num("s_ratio", 100.0)
        if ratio <= 1:
            raise sec.error("s_ratio", "must exceed 1")
        sec.finish()
        return default_contract(exp, capacity, rtprop, frac, ratio)
    family = sec.string("family", choices=[f.value for f in Family] + ["tabulated"])
    unit = sec.string("stat_unit", stat_unit_default, choices=list(STAT_UNITS))
    scale = STAT_UNITS[unit]
    if family == "tabulated":
        stats = sec.num_list("stats")
        rates = sec.num_list("rates_mbps")
        sec.finish()
        try:
            return TabulatedContract([s * scale for s in stats], [r * MBPS for r in rates])
        except ContractLensError as exc:
            raise sec.error("stats", str(exc)) from None
    if sec.has("rate_scale_mbps"):
        rate_scale = sec.num("rate_scale_mbps", positive=True) * MBPS
    else:
        rs = sec.raw("rate_scale", 1.0)
        if rs == "capacity":
            if capacity is None:
                raise sec.error("rate_scale", "'capacity' needs a [link] section")
            rate_scale = capacity
        else:
            rate_scale = sec.num("rate_scale", 1.0, positive=True)
    s_min = sec.num("s_min") * scale
    s_max = sec.num("s_max") * scale
    try:
        c = Contract(
            Family(family), s_min, s_max,
            exponent=sec.num("alpha", 1.0),
            rate_scale=rate_scale,
            stat_scale=sec.num("stat_scale", s_min / scale if s_min > 0 else 1.0, positive=True) * scale,
            stat_shift=sec.num("stat_shift", 0.0) * scale,
            rate_shift=sec.num("rate_shift_mbps", 0.0) * MBPS if sec.has("rate_shift_mbps")
            else sec.num("rate_shift", 0.0),
        )
    except ContractLensError as exc:
        raise sec.error("", str(exc)) from None
    sec.finish()
    return c


# --- scenarios ----------------------------------------------------------------

_CCA_KEYS_NS = {"threshold_ms": "threshold_ns"}


def _parse_red(sec: _Section | None) -> RedParams | None:
    if sec is None:
        return None
    try:
        red = RedParams(sec.num("k_min", nonneg=True), sec.num("k_max", positive=True),
                        sec.num("max_mark_prob", 1.0, positive=True))
    except ConfigError as exc:
        raise sec.error("", str(exc)) from None
    sec.finish()
    return red


def parse_cca(sec: _Section, link: LinkSpec, packet_size: int, skip=()) -> CcaSpec:
    kind_s = sec.string("kind", choices=[k.value for k in CcaKind])
    kind = CcaKind(kind_s)
    for key in skip:
        sec.raw(key)
    rtprop = 2 * link.prop_delay
    kw: dict = {}
    csec = sec.sub("contract")
    if csec is not None:
        unit = "1" if kind is CcaKind.ECN_CANONICAL else "ms"
        kw["contract"] = parse_contract(csec, link.capacity, rtprop, unit)
    kw["update_interval_rtts"] = sec.num("update_interval_rtts", 2.0, positive=True)
    kw["alpha"] = sec.num("alpha", 1.0)
    kw["clamp_lo"] = sec.opt_num("clamp_lo")
    kw["clamp_hi"] = sec.opt_num("clamp_hi")
    kw["alpha_pkts"] = sec.num("alpha_pkts", 2.0)
    if sec.has("ai_pkts"):
        kw["ai_bytes"] = sec.num("ai_pkts", positive=True) * packet_size
    kw["md_factor"] = sec.num("md_factor", 0.5)
    if sec.has("threshold_ms"):
        kw["threshold_ns"] = round(sec.num("threshold_ms", positive=True) * MS)
    if sec.has("capacity_hint_mbps"):
        kw["capacity_hint"] = sec.num("capacity_hint_mbps", positive=True) * MBPS
    red = _parse_red(sec.sub("red"))
    kw["red"] = red if red is not None else link.red
    try:
        spec = CcaSpec(kind, **kw)
    except ConfigError as exc:
        msg = str(exc)
        key = next((k for k in sec.data if k in msg or _CCA_KEYS_NS.get(k, "~") in msg), "kind")
        raise sec.error(key, msg) from None
    sec.finish()
    return spec


@dataclass
class ScenarioConfig:
    spec: ScenarioSpec
    raw: dict = field(default_factory=dict)
    text: str = ""

    def section(self, key: str) -> "_Section | None":
        """Typed view of an extra top-level table, with line-aware errors."""
        if key not in self.raw:
            return None
        return _Section(self.raw[key], key, self.text)


def load_scenario(source) -> ScenarioSpec:
    """Parse a scenario file (path or TOML text) into a :class:`ScenarioSpec`."""
    return load_scenario_config(source).spec


def load_scenario_config(source, extra_tables: tuple[str, ...] = ()) -> ScenarioConfig:
    """Like :func:`load_scenario`; ``extra_tables`` names top-level tables the
    caller handles itself (they are left in ``raw``)."""
    data, text = _parse(source)
    top = _Section(data, "", text)
    for key in extra_tables:
        top.raw(key)
    dur = top.num("duration_s", 20.0)
    if dur <= 0:
        raise top.error("duration_s", f"must be positive, got {dur!r}")
    packet_size = top.num("packet_size", 1500, positive=True, integer=True)

    tsec = top.sub("topology")
    if tsec is None:
        raise top.error("topology", "required table [topology] is missing")
    tkind = tsec.string("kind", "dumbbell", choices=["dumbbell", "parking_lot"])
    if tkind == "dumbbell":
        topo = Dumbbell(tsec.num("flows", 2, positive=True, integer=True))
    else:
        topo = ParkingLot(tsec.num("hops", 2, positive=True, integer=True))
    tsec.finish()

    lsec = top.sub("link")
    if lsec is None:
        raise top.error("link", "required table [link] is missing")
    capacity = lsec.num("capacity_mbps", 100.0, positive=True) * MBPS
    rtprop_ms = lsec.num("rtprop_ms", 10.0, nonneg=True)
    buf = lsec.raw("buffer_pkts", "inf")
    if buf == "inf":
        buffer = None
    else:
        buffer = lsec.num("buffer_pkts", positive=True, integer=True)
    red = _parse_red(lsec.sub("red"))
    try:
        link = LinkSpec(capacity, round(rtprop_ms * MS / 2), buffer, red)
    except ConfigError as exc:
        raise lsec.error("", str(exc)) from None
    lsec.finish()

    csec = top.sub("cca")
    if csec is None:
        raise top.error("cca", "required table [cca] is missing")
    base_cca = parse_cca(csec, link, packet_size)
    cca: CcaSpec | tuple = base_cca
    overrides = top.raw("flow_cca", [])
    if overrides:
        per_flow = [base_cca] * topo.n_flows
        for i, item in enumerate(overrides):
            osec = _Section(item, f"flow_cca[{i}]", text, "flow_cca")
            idx = osec.num("flow", integer=True, nonneg=True)
            if idx >= topo.n_flows:
                raise osec.error("flow", f"flow {idx} out of range (0..{topo.n_flows - 1})")
            per_flow[idx] = parse_cca(osec, link, packet_size, skip=("flow",))
        cca = tuple(per_flow)

    noise = []
    for i, item in enumerate(top.raw("noise", [])):
        nsec = _Section(item, f"noise[{i}]", text, "noise")
        idx = nsec.num("flow", integer=True, nonneg=True)
        extra = round(nsec.num("extra_delay_ms", nonneg=True) * MS)
        disclose = nsec.boolean("disclose", False)
        nsec.finish()
        noise.append(NoiseSpec(idx, extra, disclose))

    starts = [round(t * MS) for t in top.num_list("start_times_ms", [])]
    try:
        spec = ScenarioSpec(
            topology=topo, link=link, cca=cca, duration=round(dur * 1e9),
            packet_size=packet_size, noise=tuple(noise),
            warmup_fraction=top.num("warmup_fraction", 0.5),
            seed=top.num("seed", 1, integer=True),
            sample_interval=round(top.num("sample_interval_ms", 0.0, nonneg=True) * MS),
            trace=top.boolean("trace", False),
            max_burst=top.num("max_burst", 64, positive=True, integer=True),
            start_times=tuple(starts),
            label=top.string("label", ""),
        )
    except ConfigError as exc:
        msg = str(exc)
        key = next((k for k in ("warmup_fraction", "start_times_ms", "noise") if k.split("_ms")[0] in msg),
                   "")
        raise top.error(key, msg) from None
    top.finish()
    return ScenarioConfig(spec, data, text)


# --- analysis -----------------------------------------------------------------

@dataclass
class AnalysisConfig:
    entries: list[TableEntry]
    ds: list[float]
    k: list[int]
    n: list[int]
    metrics: tuple[str, ...]
    ds_relative: bool = True
    raw: dict = field(default_factory=dict)


def load_analysis(source=None) -> AnalysisConfig:
    """Analysis config; with no source (or no ``[[contract]]``) the default table is used."""
    data, text = _parse(source) if source is not None else ({}, "")
    top = _Section(data, "", text)
    ds = top.num_list("ds", [1.0])
    ks = [int(v) for v in top.num_list("k", [2])]
    ns = [int(v) for v in top.num_list("n", [4])]
    if any(v <= 0 for v in ds):
        raise top.error("ds", "values must be positive")
    if any(v < 1 for v in ks):
        raise top.error("k", "values must be >= 1")
    if any(v < 1 for v in ns):
        raise top.error("n", "values must be >= 1")
    metrics = top.raw("metrics", list(ANALYSIS_METRICS))
    if not isinstance(metrics, list) or not metrics or any(m not in ANALYSIS_METRICS for m in metrics):
        raise top.error("metrics", f"expected a non-empty list drawn from {', '.join(ANALYSIS_METRICS)}")
    ds_rel = top.boolean("ds_relative", True)
    alpha = top.num("table_alpha", 3.0, positive=True)
    entries = []
    for i, item in enumerate(top.raw("contract", [])):
        sec = _Section(item, f"contract[{i}]", text, "contract")
        cid = sec.string("id", f"contract{i}")
        agg = sec.string("agg", "sum", choices=[a.value for a in AggKind])
        entries.append(TableEntry(cid, parse_contract(sec, stat_unit_default="1"), AggKind(agg)))
    top.finish()
    if not entries:
        entries = default_table_entries(alpha)
    return AnalysisConfig(entries, ds, ks, ns, tuple(metrics), ds_rel, data)


__all__ = [
    "MBPS", "MS", "load_scenario", "load_scenario_config", "load_analysis", "parse_contract",
    "ScenarioConfig", "AnalysisConfig", "ANALYSIS_METRICS",
]
