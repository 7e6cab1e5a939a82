"""Empirical contracts: sweep the simulator, then fit rate = f(statistic).

``collect`` runs one dumbbell per (capacity, flow count) cell and turns every
flow into a :class:`Sample`.  ``fit`` fits one functional form against one
statistic; ``select_best`` searches forms x statistics for the lowest
normalised MSE.
"""
from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from .cca import CcaSpec
from .contract import Contract, Family, StatKind
from .csvio import read_csv
from .errors import ConfigError, ContractLensError, FitDiverged, NoFit
from .netsim.run import run
from .netsim.spec import Dumbbell, ScenarioSpec

MIN_SAMPLES = 8
# Fits within this factor of the best normalised MSE count as ties, as do fits
# whose RMS relative residual is within TIE_RMS of the best (below what a
# packet-level measurement resolves).
TIE_FACTOR = 1.25
TIE_RMS = 0.005
NO_CONTRACT_R2 = 0.5

# Statistics read from a run summary, in tie-break order (QueueDelay first).
SUMMARY_FIELDS = {
    StatKind.QUEUE_DELAY: "queue_delay_avg",
    StatKind.AVG_DELAY: "delay_avg",
    StatKind.P50_DELAY: "delay_p50",
    StatKind.LOSS_RATE: "loss_rate",
    StatKind.ECN_RATE: "ecn_rate",
}
STAT_ORDER = tuple(SUMMARY_FIELDS)


class FitForm(enum.Enum):
    POWER_LAW = "power_law"          # a * s**c
    EXPONENTIAL = "exponential"      # a * exp(-s / tau)
    LINEAR = "linear"                # a - b * s
    LOGARITHMIC = "logarithmic"      # q * log(s0 / s)
    SHIFTED_POWER = "shifted_power"  # a * (s + b)**c + d

    @property
    def n_params(self) -> int:
        return 4 if self is FitForm.SHIFTED_POWER else 2


@dataclass(frozen=True)
class Sample:
    """One flow of one sweep cell.  ``stats`` maps StatKind to its measured value."""

    capacity: float
    flow_count: int
    flow_id: int
    throughput: float
    stats: dict = field(default_factory=dict)
    stalled: bool = False
    error: str | None = None

    @property
    def usable(self) -> bool:
        return not self.stalled and self.error is None and self.throughput > 0


@dataclass
class FitResult:
    form: FitForm
    stat: StatKind
    params: dict[str, float]
    mse: float
    nmse: float
    r2: float
    n_samples: int
    s_range: tuple[float, float]

    def predict(self, s):
        return _model(self.form, self.params, np.asarray(s, dtype=float))

    @property
    def has_contract(self) -> bool:
        """False when the fit explains too little variance to call it a contract."""
        return self.r2 >= NO_CONTRACT_R2

    @property
    def verdict(self) -> str:
        return "contract" if self.has_contract else "no contract"

    @property
    def shape(self) -> float:
        """The family's shape parameter: exponent, decay scale or x-intercept."""
        p = self.params
        if self.form in (FitForm.POWER_LAW, FitForm.SHIFTED_POWER):
            return -p["c"]
        if self.form is FitForm.EXPONENTIAL:
            return p["tau"]
        if self.form is FitForm.LINEAR:
            return p["a"] / p["b"]
        return p["s0"]

    def to_contract(self) -> Contract | None:
        """The fitted curve as a Contract over the sampled range, when it maps onto one."""
        lo, hi = self.s_range
        p = self.params
        try:
            if self.form is FitForm.POWER_LAW:
                return Contract.power_law(-p["c"], lo, hi, rate_scale=p["a"] * lo ** p["c"], stat_scale=lo)
            if self.form is FitForm.SHIFTED_POWER:
                if p["c"] >= 0:
                    return None
                return Contract(Family.POWER_LAW, lo, hi, exponent=-p["c"], rate_scale=p["a"],
                                stat_scale=1.0, stat_shift=-p["b"], rate_shift=p["d"])
            if self.form is FitForm.EXPONENTIAL:
                return Contract.exponential(lo, hi, rate_scale=p["a"], stat_scale=p["tau"])
            if self.form is FitForm.LINEAR:
                return Contract.linear(lo, hi, rate_scale=p["a"], stat_scale=p["a"] / p["b"])
            return Contract.logarithmic(lo, hi, rate_scale=p["q"], stat_scale=p["s0"])
        except ContractLensError:
            return None

    FIELDS = ("stat", "form", "shape", "params", "mse", "nmse", "r2", "n_samples", "s_lo", "s_hi",
              "verdict")

    def row(self) -> list:
        params = ";".join(f"{k}={v!r}" for k, v in self.params.items())
        return [self.stat.value, self.form.value, self.shape, params, self.mse, self.nmse, self.r2,
                self.n_samples, self.s_range[0], self.s_range[1], self.verdict]


# --- models -------------------------------------------------------------------

def _model(form: FitForm, p: dict, s: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        if form is FitForm.POWER_LAW:
            return p["a"] * s ** p["c"]
        if form is FitForm.EXPONENTIAL:
            return p["a"] * np.exp(-s / p["tau"])
        if form is FitForm.LINEAR:
            return p["a"] - p["b"] * s
        if form is FitForm.LOGARITHMIC:
            return p["q"] * np.log(p["s0"] / s)
        return p["a"] * (s + p["b"]) ** p["c"] + p["d"]


def _lstsq(cols: Sequence[np.ndarray], y: np.ndarray) -> np.ndarray:
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return coef


def _fit_power(s, x):
    c, loga = _lstsq([np.log(s), np.ones_like(s)], np.log(x))
    return {"a": float(math.exp(loga)), "c": float(c)}


def _fit_exponential(s, x):
    slope, loga = _lstsq([s, np.ones_like(s)], np.log(x))
    if slope >= 0:
        raise FitDiverged("exponential fit is not decreasing")
    return {"a": float(math.exp(loga)), "tau": float(-1.0 / slope)}


def _fit_linear(s, x):
    slope, a = _lstsq([s, np.ones_like(s)], x)
    if slope >= 0:
        raise FitDiverged("linear fit is not decreasing")
    return {"a": float(a), "b": float(-slope)}


def _fit_logarithmic(s, x):
    slope, p0 = _lstsq([np.log(s), np.ones_like(s)], x)
    if slope >= 0:
        raise FitDiverged("logarithmic fit is not decreasing")
    q = -slope
    return {"q": float(q), "s0": float(math.exp(p0 / q))}


def _fit_shifted_power(s, x):
    """Variable projection: simplex over (log offset, c); a and d by least squares.

    The data are normalised first (s by its median, x by its mean) so one start
    lattice serves every unit system.  The offset is parametrised as
    ``b = exp(beta) - min(s)`` which keeps ``s + b`` positive.
    """
    s_scale = float(np.median(s))
    x_scale = float(np.mean(np.abs(x)))
    u = s / s_scale
    y = x / x_scale
    umin = float(u.min())
    denom = float(np.sum((y - y.mean()) ** 2)) or 1.0

    def solve(theta):
        beta, c = theta
        g = (u - umin + math.exp(beta)) ** c
        if not np.all(np.isfinite(g)):
            return None, math.inf
        A = np.column_stack([g, np.ones_like(g)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        r = A @ coef - y
        return coef, float(r @ r) / denom

    best = None
    for beta0 in np.log([1e-3, 1e-2, 1e-1, 1.0]) + math.log(max(umin, 1e-12)):
        for c0 in (-3.0, -1.0, -0.3, 1.0):
            res = minimize(lambda t: solve(t)[1], x0=[beta0, c0], method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-16, "maxiter": 4000})
            coef, obj = solve(res.x)
            if coef is None or not math.isfinite(obj):
                continue
            a, d = coef
            if a * res.x[1] >= 0:  # not decreasing
                continue
            if best is None or obj < best[0]:
                best = (obj, res.x, coef)
    if best is None:
        raise FitDiverged("no start produced a decreasing shifted power law")
    _, (beta, c), (a, d) = best
    b = (math.exp(beta) - umin) * s_scale
    return {"a": float(a * x_scale * s_scale ** (-c)), "b": float(b), "c": float(c),
            "d": float(d * x_scale)}


_FITTERS = {
    FitForm.POWER_LAW: _fit_power,
    FitForm.EXPONENTIAL: _fit_exponential,
    FitForm.LINEAR: _fit_linear,
    FitForm.LOGARITHMIC: _fit_logarithmic,
    FitForm.SHIFTED_POWER: _fit_shifted_power,
}


def _xy(samples: Iterable[Sample], stat: StatKind) -> tuple[np.ndarray, np.ndarray]:
    pts = [(s.stats[stat], s.throughput) for s in samples if s.usable and stat in s.stats]
    pts = [(a, b) for a, b in pts if a is not None and math.isfinite(a)]
    if len(pts) < MIN_SAMPLES:
        raise FitDiverged(f"{stat.value}: need at least {MIN_SAMPLES} samples, have {len(pts)}")
    arr = np.asarray(pts, dtype=float)
    return arr[:, 0], arr[:, 1]


def fit(samples: Sequence[Sample], form: FitForm | str, stat: StatKind | str) -> FitResult:
    """Least-squares fit of one form to (stat, throughput) pairs of usable samples."""
    form, stat = FitForm(form), StatKind(stat)
    s, x = _xy(samples, stat)
    if np.any(s <= 0):
        raise FitDiverged(f"{stat.value}: statistic values must be strictly positive")
    params = _FITTERS[form](s, x)
    pred = _model(form, params, s)
    if not np.all(np.isfinite(pred)):
        raise FitDiverged(f"{form.value} on {stat.value}: non-finite residuals")
    grid = _model(form, params, np.linspace(s.min(), s.max(), 64))
    if not np.all(np.diff(grid) < 0):
        raise FitDiverged(f"{form.value} on {stat.value}: fitted curve is not decreasing")
    resid = x - pred
    sse = float(resid @ resid)
    sst = float(((x - x.mean()) ** 2).sum())
    mse = sse / len(x)
    return FitResult(form, stat, params, mse, mse / float(np.mean(x ** 2)),
                     1.0 - sse / sst if sst > 0 else (1.0 if sse == 0 else 0.0),
                     len(x), (float(s.min()), float(s.max())))


def select_best(samples: Sequence[Sample], forms: Sequence[FitForm | str] | None = None,
                stats: Sequence[StatKind | str] | None = None) -> FitResult:
    """Lowest normalised MSE over forms x statistics.

    Candidates within ``TIE_FACTOR`` of the best normalised MSE, or within
    ``TIE_RMS`` of its RMS relative residual, are ties.  Ties go to fewer
    parameters and then follow the statistic order (QueueDelay first).
    """
    forms = [FitForm(f) for f in (forms or list(FitForm))]
    stats = [StatKind(k) for k in (stats or STAT_ORDER)]
    results = []
    for stat in stats:
        for form in forms:
            try:
                results.append(fit(samples, form, stat))
            except FitDiverged:
                continue
    if not results:
        raise NoFit("no form/statistic combination could be fitted")
    best = min(r.nmse for r in results)
    ties = [r for r in results
            if r.nmse <= best * TIE_FACTOR or math.sqrt(r.nmse) - math.sqrt(best) <= TIE_RMS]
    order = {k: i for i, k in enumerate(list(StatKind))}
    order.update({k: i for i, k in enumerate(STAT_ORDER)})
    return min(ties, key=lambda r: (r.form.n_params, order[r.stat], r.nmse))


def fit_all(samples: Sequence[Sample], forms=None, stats=None) -> list[FitResult]:
    """Every successful fit, best first (for reports)."""
    out = []
    for stat in [StatKind(k) for k in (stats or STAT_ORDER)]:
        for form in [FitForm(f) for f in (forms or list(FitForm))]:
            try:
                out.append(fit(samples, form, stat))
            except FitDiverged:
                pass
    return sorted(out, key=lambda r: r.nmse)


# --- sweeps -------------------------------------------------------------------

def worker_count(default: int | None = None) -> int:
    """Pool size: ``CONTRACT_LENS_THREADS`` if set, else the number of cores."""
    env = os.environ.get("CONTRACT_LENS_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"CONTRACT_LENS_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("CONTRACT_LENS_THREADS must be >= 1")
        return n
    return default or os.cpu_count() or 1


def map_cells(fn, cells: Sequence, workers: int | None = None) -> list:
    """``[fn(c) for c in cells]``, on a process pool when more than one worker is allowed.

    Results come back in cell order regardless of completion order.
    """
    workers = min(worker_count(workers), len(cells)) if cells else 1
    if workers <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, cells))


def _run_cell(spec: ScenarioSpec):
    try:
        res = run(spec)
    except ContractLensError as exc:
        return f"{type(exc).__name__}: {exc}"
    out = []
    for f in res.flows:
        stats = {k: getattr(f, name) for k, name in SUMMARY_FIELDS.items()}
        out.append((f.flow_id, f.throughput, {k: v for k, v in stats.items() if math.isfinite(v)},
                    f.stalled))
    return out


def sweep_specs(capacities: Sequence[float], flow_counts: Sequence[int], cca: CcaSpec,
                base: ScenarioSpec) -> list[ScenarioSpec]:
    specs = []
    for c in capacities:
        for n in flow_counts:
            specs.append(replace(base, topology=Dumbbell(int(n)), link=replace(base.link, capacity=float(c)),
                                 cca=cca, noise=(), start_times=(), trace=False,
                                 label=f"cap={c:g} flows={n}"))
    return specs


def collect(capacities: Sequence[float], flow_counts: Sequence[int], cca: CcaSpec,
            base: ScenarioSpec, workers: int | None = None) -> list[Sample]:
    """One Sample per (cell, flow).  Failed cells yield samples carrying ``error``."""
    specs = sweep_specs(capacities, flow_counts, cca, base)
    results = map_cells(_run_cell, specs, workers)
    samples = []
    for spec, res in zip(specs, results):
        cap, n = spec.link.capacity, spec.topology.n_flows
        if isinstance(res, str):
            samples.extend(Sample(cap, n, i, math.nan, {}, False, res) for i in range(n))
            continue
        for fid, thr, stats, stalled in res:
            samples.append(Sample(cap, n, fid, thr, stats, stalled))
    return samples


# --- external data --------------------------------------------------------------

EXTERNAL_COLUMNS = ("capacity", "flows", "flow_id", "throughput", "avg_delay", "p50_delay", "loss_rate")
_EXTERNAL_STATS = {"avg_delay": StatKind.AVG_DELAY, "p50_delay": StatKind.P50_DELAY,
                   "loss_rate": StatKind.LOSS_RATE, "queue_delay": StatKind.QUEUE_DELAY,
                   "ecn_rate": StatKind.ECN_RATE}
_MBPS = 1e6 / 8
_MS = 1e6


def read_samples_csv(path) -> list[Sample]:
    """Samples from an external CSV (capacity/throughput in Mbps, delays in ms).

    Required columns: capacity, flows, flow_id, throughput, avg_delay,
    p50_delay, loss_rate.  Optional: queue_delay (ms), ecn_rate, stalled.
    """
    _, rows = read_csv(path)
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    missing = [c for c in EXTERNAL_COLUMNS if c not in rows[0]]
    if missing:
        raise ConfigError(f"{path}: missing column(s) {', '.join(missing)}")
    out = []
    for lineno, r in enumerate(rows, 2):
        try:
            stats = {}
            for col, kind in _EXTERNAL_STATS.items():
                if r.get(col) not in (None, ""):
                    v = float(r[col])
                    stats[kind] = v * _MS if kind.is_delay else v
            out.append(Sample(float(r["capacity"]) * _MBPS, int(r["flows"]), int(r["flow_id"]),
                              float(r["throughput"]) * _MBPS, stats,
                              str(r.get("stalled", "")).lower() in ("1", "true")))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: bad value on data row {lineno - 1}: {exc}") from None
    return out


def samples_rows(samples: Sequence[Sample]):
    """Rows for a samples CSV in internal units (bytes/s, ns)."""
    for s in samples:
        yield [s.capacity, s.flow_count, s.flow_id, s.throughput,
               *[s.stats.get(k) for k in STAT_ORDER], s.stalled, s.error or ""]


SAMPLE_FIELDS = ("capacity", "flows", "flow_id", "throughput", *[k.value for k in STAT_ORDER],
                 "stalled", "error")


def synthetic_samples(contract: Contract, capacities: Sequence[float], flow_counts: Sequence[int],
                      noise: float = 0.0, seed: int = 0, stat: StatKind = StatKind.QUEUE_DELAY,
                      offset: float = 0.0) -> list[Sample]:
    """Generator oracle: each flow gets its fair share C/n and the statistic the
    contract assigns to it (plus ``offset``); ``noise`` is a relative
    multiplicative perturbation on throughput."""
    rng = np.random.default_rng(seed)
    out = []
    for c in capacities:
        for n in flow_counts:
            x = c / n
            s = float(contract.inverse(x)) + offset
            for i in range(n):
                thr = x * (1.0 + noise * rng.standard_normal()) if noise else x
                out.append(Sample(c, n, i, thr, {stat: s}))
    return out


__all__ = [
    "FitForm", "Sample", "FitResult", "fit", "select_best", "fit_all", "collect", "sweep_specs",
    "map_cells", "worker_count", "read_samples_csv", "samples_rows", "SAMPLE_FIELDS",
    "synthetic_samples", "EXTERNAL_COLUMNS", "STAT_ORDER",
]
