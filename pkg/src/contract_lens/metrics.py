"""The four contract-determined metrics, computed numerically.

Every metric is a worst case over either the statistic or the link capacity.
Searches use a coarse grid followed by golden-section refinement around the
best grid point.  ``closed_form`` gives the exact answer for unshifted members
of the four parametric families and is used as an independent cross-check.

Statistics beyond ``s_max`` (noise pushing a flow past the domain, or a long
parking-lot flow summing several hop delays) are evaluated with the contract's
closed form extended past the domain.  A rate that reaches zero there means the
flow has crossed the contract's X-intercept and starves; the corresponding
metric is ``math.inf``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .contract import AggKind, Contract, Family
from .errors import ContractLensError, DomainError, InfeasibleCapacity, ParamError, RangeError

INF = math.inf

_GRID_ERROR = 1024
_GRID_CAPACITY = 64
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(fn: Callable[[float], float], a: float, b: float,
               rtol: float = 1e-12, max_iter: int = 200) -> tuple[float, float]:
    """Maximise a unimodal ``fn`` on ``[a, b]``; returns ``(value, argmax)``.

    The endpoints are evaluated too, so a monotone function returns its
    boundary maximum exactly.
    """
    best_x, best_v = a, fn(a)
    vb = fn(b)
    if vb > best_v:
        best_x, best_v = b, vb
    lo, hi = a, b
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = fn(x1), fn(x2)
    for _ in range(max_iter):
        if hi - lo <= rtol * max(abs(lo), abs(hi), 1e-300):
            break
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = fn(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = fn(x2)
    for x, v in ((x1, f1), (x2, f2)):
        if v > best_v:
            best_x, best_v = x, v
    return best_v, best_x


def _grid_then_refine(fn, grid: np.ndarray) -> tuple[float, float]:
    values = np.array([fn(float(g)) for g in grid])
    if np.any(np.isinf(values)):
        i = int(np.argmax(np.isinf(values)))
        return INF, float(grid[i])
    i = int(np.argmax(values))
    lo = float(grid[max(i - 1, 0)])
    hi = float(grid[min(i + 1, len(grid) - 1)])
    best_v, best_x = float(values[i]), float(grid[i])
    if hi > lo:
        v, x = golden_max(fn, lo, hi)
        if v > best_v:
            best_v, best_x = v, x
    return best_v, best_x


def _spaced(lo: float, hi: float, n: int) -> np.ndarray:
    grid = np.geomspace(lo, hi, n) if lo > 0 else np.linspace(lo, hi, n)
    grid[0], grid[-1] = lo, hi
    return grid


def _rate_ratio(num: float, den: float) -> float:
    if den <= 0.0:
        return INF
    return num / den


# --- robustness -----------------------------------------------------------

def error_factor_search(contract, ds: float) -> tuple[float, float]:
    """Worst-case rate ratio under additive statistic error ``ds``: (value, worst s)."""
    if not ds > 0:
        raise ParamError("statistic error ds must be positive")
    if ds >= contract.s_max - contract.s_min:
        raise DomainError("ds must be smaller than the domain width")
    intercept = getattr(contract, "x_intercept", None)
    if intercept is not None:
        # the noisy statistic may leave the domain; past the intercept the rate is zero
        if contract.s_max + ds >= intercept:
            return INF, max(contract.s_min, intercept - ds)
        hi = contract.s_max
    else:
        hi = contract.s_max - ds

    def ratio(s: float) -> float:
        return _rate_ratio(float(contract.evaluate(s)), float(contract.extended(s + ds)))

    return _grid_then_refine(ratio, _spaced(contract.s_min, hi, _GRID_ERROR))


def error_factor(contract, ds: float) -> float:
    return error_factor_search(contract, ds)[0]


# --- fairness ---------------------------------------------------------------

@dataclass(frozen=True)
class ParkingLotFixedPoint:
    s_short: float
    s_long: float
    x_short: float
    x_long: float
    ratio: float
    starved: bool
    capacity: float


def _long_rate(contract, agg: AggKind, k: int, s: float) -> tuple[float, float]:
    s_long = agg.repeat(s, k)
    return s_long, max(float(contract.extended(s_long)), 0.0)


def _parking_capacity(contract, agg, k, s) -> float:
    return float(contract.evaluate(s)) + _long_rate(contract, agg, k, s)[1]


def parking_lot_band(contract, agg: AggKind, k: int) -> tuple[float, float]:
    """Capacities ``(low, high)`` for which a parking-lot fixed point exists."""
    return (_parking_capacity(contract, agg, k, contract.s_max),
            _parking_capacity(contract, agg, k, contract.s_min))


def parking_lot_fixed_point(contract, agg: AggKind, k: int, capacity: float) -> ParkingLotFixedPoint:
    """Steady state of a ``k``-hop parking lot with per-hop ``capacity``.

    Short flows see one hop's statistic ``s``; the long flow sees ``agg`` of
    ``k`` copies.  Solves ``f(s) + f(agg(s, ..)) = capacity`` by bisection.
    """
    if k < 1:
        raise ParamError("hop count k must be >= 1")
    lo_c, hi_c = parking_lot_band(contract, agg, k)
    if capacity > hi_c * (1 + 1e-12) or capacity < lo_c * (1 - 1e-12):
        raise InfeasibleCapacity(f"capacity {capacity!r} outside feasible band [{lo_c}, {hi_c}]")
    lo, hi = contract.s_min, contract.s_max
    # the left side is decreasing in s
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if _parking_capacity(contract, agg, k, mid) > capacity:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    s = 0.5 * (lo + hi)
    x_short = float(contract.evaluate(s))
    s_long, x_long = _long_rate(contract, agg, k, s)
    starved = x_long <= 0.0
    ratio = INF if starved else x_short / x_long
    return ParkingLotFixedPoint(s, s_long, x_short, x_long, ratio, starved, float(capacity))


def unfairness_search(contract, agg: AggKind, k: int) -> tuple[float, float]:
    """Worst parking-lot throughput ratio over capacity: (value, worst capacity)."""
    lo_c, hi_c = parking_lot_band(contract, agg, k)

    def ratio(c: float) -> float:
        return parking_lot_fixed_point(contract, agg, k, c).ratio

    return _grid_then_refine(ratio, _spaced(lo_c, hi_c, _GRID_CAPACITY))


def unfairness_worst(contract, agg: AggKind, k: int) -> float:
    return unfairness_search(contract, agg, k)[0]


def shifted_unfairness_curve(contract: Contract, agg: AggKind, k: int,
                             shifts: Sequence[float]) -> list[float]:
    """Worst parking-lot ratio for each rightward statistic shift of ``contract``."""
    return [unfairness_worst(contract.with_shift(b), agg, k) for b in shifts]


# --- congestion growth ---------------------------------------------------

def growth_search(contract, n: int) -> tuple[float, float]:
    """Worst statistic growth when the fair share shrinks ``n``-fold: (value, capacity)."""
    if n < 1:
        raise ParamError("flow count n must be >= 1")
    if n == 1:
        return 1.0, contract.rate_max
    lo_c, hi_c = n * contract.rate_min, contract.rate_max
    if lo_c > hi_c * (1 + 1e-12):
        raise RangeError(f"no capacity lets {n} flows share within the contract range")
    lo_c = min(lo_c, hi_c)

    def ratio(c: float) -> float:
        base = float(contract.inverse(c))
        return INF if base <= 0 else float(contract.inverse(c / n)) / base

    if hi_c <= lo_c:
        return ratio(hi_c), hi_c
    return _grid_then_refine(ratio, _spaced(lo_c, hi_c, _GRID_CAPACITY))


def growth(contract, n: int) -> float:
    return growth_search(contract, n)[0]


# --- generality -------------------------------------------------------------

def bandwidth_range(contract) -> float:
    return _rate_ratio(contract.rate_max, contract.rate_min)


# --- exact closed forms -------------------------------------------------------

def closed_form(contract, metric: str, param: float | None = None,
                agg: AggKind = AggKind.SUM) -> float | None:
    """Exact metric for an unshifted family member, or ``None`` if unknown.

    ``metric`` is one of ``error_factor`` (param = ds), ``unfairness``
    (param = k), ``growth`` (param = n) or ``range``.
    """
    if not isinstance(contract, Contract) or contract.stat_shift or contract.rate_shift:
        return None
    fam, s0, b0 = contract.family, contract.stat_scale, contract.rate_scale
    lo, hi = contract.s_min, contract.s_max
    p = contract.exponent
    if metric == "range":
        return bandwidth_range(contract)
    if metric == "error_factor":
        ds = float(param)
        if fam is Family.POWER_LAW:
            return (1.0 + ds / lo) ** p
        if fam is Family.EXPONENTIAL:
            return math.exp(ds / s0)
        if hi + ds >= s0:
            return INF
        if fam is Family.LINEAR:
            return (s0 - hi) / (s0 - hi - ds)
        return None
    if metric == "unfairness":
        k = int(param)
        if k == 1 or agg in (AggKind.MAX, AggKind.MIN):
            return 1.0
        if agg is not AggKind.SUM:
            return None
        if fam is Family.POWER_LAW:
            return float(k) ** p
        if fam is Family.EXPONENTIAL:
            return math.exp((k - 1) * hi / s0)
        if k * hi >= s0:
            return INF
        if fam is Family.LINEAR:
            return (s0 - hi) / (s0 - k * hi)
        return None
    if metric == "growth":
        n = int(param)
        if fam is Family.POWER_LAW:
            return float(n) ** (1.0 / p)
        if fam is Family.EXPONENTIAL:
            return (lo + s0 * math.log(n)) / lo
        bmax = contract.rate_max
        if fam is Family.LINEAR:
            return (n * b0 - bmax) / (n * (b0 - bmax))
        return (s0 / lo) ** ((n - 1) / n)
    raise ValueError(f"unknown metric {metric!r}")


# --- report ---------------------------------------------------------------

@dataclass
class MetricReport:
    """All four metrics for one contract; failed cells hold ``None`` plus a message."""

    ds: float
    k: int
    n: int
    error_factor: float | None = None
    unfairness: float | None = None
    growth: float | None = None
    bandwidth_range: float | None = None
    error_factor_arg: float | None = None
    unfairness_arg: float | None = None
    growth_arg: float | None = None
    errors: dict[str, str] = field(default_factory=dict)

    def rows(self):
        """(metric, param, value, argmax) tuples in a fixed order."""
        yield "error_factor", self.ds, self.error_factor, self.error_factor_arg
        yield "unfairness", self.k, self.unfairness, self.unfairness_arg
        yield "growth", self.n, self.growth, self.growth_arg
        yield "bandwidth_range", None, self.bandwidth_range, None


def metric_report(contract, agg: AggKind, ds: float, k: int, n: int) -> MetricReport:
    report = MetricReport(ds=ds, k=k, n=n)
    cells = (
        ("error_factor", lambda: error_factor_search(contract, ds)),
        ("unfairness", lambda: unfairness_search(contract, agg, k)),
        ("growth", lambda: growth_search(contract, n)),
        ("bandwidth_range", lambda: (bandwidth_range(contract), None)),
    )
    for name, compute in cells:
        try:
            value, arg = compute()
        except ContractLensError as exc:
            report.errors[name] = f"{type(exc).__name__}: {exc}"
            continue
        setattr(report, name, value)
        if name != "bandwidth_range":
            setattr(report, name + "_arg", arg)
    return report
