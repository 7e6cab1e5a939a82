"""Bounds linking robustness/fairness to congestion growth/generality.

Fixing one metric constrains the contract, which in turn bounds the others.
Two corner contracts meet the bounds with equality: the exponential contract
for a robustness target and the power law ``s ** (-1/alpha)`` for an
alpha-fairness target.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .contract import AggKind, Contract, Family
from .errors import ParamError
from .metrics import MetricReport, metric_report


class BoundKind(enum.Enum):
    GROWTH_GIVEN_ROBUSTNESS = "growth_given_robustness"
    RANGE_GIVEN_ROBUSTNESS = "range_given_robustness"
    GROWTH_GIVEN_FAIRNESS = "growth_given_fairness"
    RANGE_GIVEN_FAIRNESS = "range_given_fairness"


class CornerKind(enum.Enum):
    EXPONENTIAL = "exponential_corner"
    ALPHA_FAIR = "alpha_fair_corner"


@dataclass
class BoundReport:
    bound_kind: BoundKind
    inputs: dict[str, float]
    bound_value: float
    achieved_by: Contract | None = None
    achieved_by_id: str | None = None


def _check_eps(eps: float) -> None:
    if not eps > 1:
        raise ParamError(f"error factor target must exceed 1, got {eps!r}")


def growth_lb_given_robustness(eps: float, ds: float, s_min: float, n: int) -> float:
    """Least possible growth(n) for a contract with error factor <= eps at noise ds."""
    _check_eps(eps)
    if not ds > 0 or not s_min > 0:
        raise ParamError("ds and s_min must be positive")
    if n < 1:
        raise ParamError("n must be >= 1")
    return (s_min + math.log(n) / math.log(eps) * ds) / s_min


def range_ub_given_robustness(eps: float, ds: float, s_min: float, s_max: float) -> float:
    """Largest bandwidth range reachable with error factor <= eps on [s_min, s_max]."""
    _check_eps(eps)
    if not ds > 0:
        raise ParamError("ds must be positive")
    if s_max < s_min:
        raise ParamError("need s_max >= s_min")
    return eps ** ((s_max - s_min) / ds)


class RatioCurve:
    """Monotone increasing target ratio*(k), tabulated; inverse by bisection."""

    def __init__(self, ks: Sequence[float], ratios: Sequence[float]):
        k = np.asarray(ks, dtype=float)
        r = np.asarray(ratios, dtype=float)
        if k.shape != r.shape or len(k) < 2 or np.any(np.diff(k) <= 0) or np.any(np.diff(r) <= 0):
            raise ParamError("ratio curve needs >= 2 points, both columns increasing")
        self.ks, self.ratios = k, r

    def __call__(self, k: float) -> float:
        return float(np.interp(k, self.ks, self.ratios))

    def inverse(self, y: float, tol: float = 1e-12) -> float:
        lo, hi = float(self.ks[0]), float(self.ks[-1])
        if not self.ratios[0] <= y <= self.ratios[-1]:
            raise ParamError(f"ratio {y!r} outside tabulated range")
        while hi - lo > tol * max(hi, 1.0):
            mid = 0.5 * (lo + hi)
            if self(mid) < y:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


def growth_lb_given_fairness(alpha: float | None, n: int, ratio_star: RatioCurve | None = None) -> float:
    """Least growth(n) given parking-lot ratio*(k) = k**(1/alpha) (or a custom curve)."""
    if n < 1:
        raise ParamError("n must be >= 1")
    if n == 1:
        return 1.0
    if ratio_star is not None:
        return ratio_star.inverse(n - 1)
    if alpha is None or not alpha > 0:
        raise ParamError("alpha must be positive")
    return float(n - 1) ** alpha


def range_ub_given_fairness(alpha: float | None, s_ratio: float,
                            ratio_star: Callable[[float], float] | None = None) -> float:
    """Largest bandwidth range given ratio*(k) and s_max/s_min = ``s_ratio``."""
    if s_ratio < 1:
        raise ParamError("s_ratio must be >= 1")
    if ratio_star is not None:
        return float(ratio_star(s_ratio))
    if alpha is None or not alpha > 0:
        raise ParamError("alpha must be positive")
    return s_ratio ** (1.0 / alpha)


def corner_contract(kind: CornerKind | str, **params) -> Contract:
    """Contract meeting a tradeoff bound with equality.

    exponential_corner: ``bmax, s_min, ds, eps`` (+ optional ``s_max``) giving
    ``bmax * eps ** (-(s - s_min) / ds)``.
    alpha_fair_corner: ``alpha, bmax, s_min`` (+ optional ``s_max``) giving
    ``bmax * (s_min / s) ** (1 / alpha)``.
    """
    kind = CornerKind(kind)
    for name, value in params.items():
        if value is not None and not value > 0:
            raise ParamError(f"{name} must be positive, got {value!r}")
    if kind is CornerKind.EXPONENTIAL:
        try:
            bmax, s_min, ds, eps = (params[k] for k in ("bmax", "s_min", "ds", "eps"))
        except KeyError as exc:
            raise ParamError(f"missing corner parameter {exc}") from None
        _check_eps(eps)
        s_max = params.get("s_max") or s_min + 64 * ds
        return Contract(Family.EXPONENTIAL, s_min, s_max, rate_scale=bmax,
                        stat_scale=ds / math.log(eps), stat_shift=s_min)
    try:
        alpha, bmax, s_min = (params[k] for k in ("alpha", "bmax", "s_min"))
    except KeyError as exc:
        raise ParamError(f"missing corner parameter {exc}") from None
    s_max = params.get("s_max") or 1000.0 * s_min
    return Contract(Family.POWER_LAW, s_min, s_max, exponent=1.0 / alpha,
                    rate_scale=bmax, stat_scale=s_min)


def bound_report(kind: BoundKind | str, **inputs) -> BoundReport:
    """Evaluate one bound and attach the corner contract that attains it."""
    kind = BoundKind(kind)
    if kind is BoundKind.GROWTH_GIVEN_ROBUSTNESS:
        value = growth_lb_given_robustness(inputs["eps"], inputs["ds"], inputs["s_min"], int(inputs["n"]))
        s_max = inputs["s_min"] + inputs["ds"] * (math.log(inputs["n"]) / math.log(inputs["eps"]) + 1)
        corner = corner_contract(CornerKind.EXPONENTIAL, bmax=1.0, s_min=inputs["s_min"],
                                 ds=inputs["ds"], eps=inputs["eps"], s_max=s_max)
        cid = "exponential_corner"
    elif kind is BoundKind.RANGE_GIVEN_ROBUSTNESS:
        value = range_ub_given_robustness(inputs["eps"], inputs["ds"], inputs["s_min"], inputs["s_max"])
        corner = (corner_contract(CornerKind.EXPONENTIAL, bmax=1.0, s_min=inputs["s_min"],
                                  ds=inputs["ds"], eps=inputs["eps"], s_max=inputs["s_max"])
                  if inputs["s_max"] > inputs["s_min"] else None)
        cid = "exponential_corner" if corner else None
    elif kind is BoundKind.GROWTH_GIVEN_FAIRNESS:
        value = growth_lb_given_fairness(inputs["alpha"], int(inputs["n"]))
        corner = corner_contract(CornerKind.ALPHA_FAIR, alpha=inputs["alpha"], bmax=1.0, s_min=1.0,
                                 s_max=float(inputs["n"]) ** inputs["alpha"] * 2)
        cid = "alpha_fair_corner"
    else:
        value = range_ub_given_fairness(inputs["alpha"], inputs["s_ratio"])
        corner = (corner_contract(CornerKind.ALPHA_FAIR, alpha=inputs["alpha"], bmax=1.0, s_min=1.0,
                                  s_max=inputs["s_ratio"])
                  if inputs["s_ratio"] > 1 else None)
        cid = "alpha_fair_corner" if corner else None
    return BoundReport(kind, dict(inputs), value, corner, cid)


# --- periodic table ----------------------------------------------------------

@dataclass
class TableEntry:
    name: str
    contract: Contract
    agg: AggKind


@dataclass
class TableRow:
    name: str
    agg: AggKind
    report: MetricReport
    closed: dict[str, float | None] = field(default_factory=dict)


def default_table_entries(alpha: float = 3.0) -> list[TableEntry]:
    """The eight contract rows, normalised to ``rate_scale = stat_scale = 1``.

    Power-law rows span a 200x rate range.  Domains reach close to the
    X-intercept for the linear and logarithmic rows, which is where their
    worst cases live.
    """
    return [
        TableEntry("FAST/Copa 1/s", Contract.power_law(1.0, 1.0, 200.0), AggKind.SUM),
        TableEntry("Swift/DCTCP 1/s^2", Contract.power_law(2.0, 1.0, 200.0), AggKind.SUM),
        TableEntry("Reno 1/sqrt(s)", Contract.power_law(0.5, 1.0, 200.0), AggKind.SUM),
        TableEntry("Poseidon e^-s", Contract.exponential(0.1, 5.0), AggKind.MAX),
        TableEntry(f"alpha-fair (alpha={alpha:g})", Contract.power_law(1.0 / alpha, 1.0, 200.0 ** alpha),
                   AggKind.SUM),
        TableEntry("Exponential e^-s/S0", Contract.exponential(0.1, 5.0), AggKind.SUM),
        TableEntry("ICC log(S0/s)", Contract.logarithmic(0.05, 0.99), AggKind.SUM),
        TableEntry("Astraea B0(1-s/S0)", Contract.linear(0.1, 0.96), AggKind.SUM),
    ]


def periodic_table(entries: Sequence[TableEntry], ds: float, k: int, n: int,
                   ds_relative: bool = True) -> list[TableRow]:
    """One row of metrics per contract; ``ds`` is a multiple of s_min by default."""
    from .metrics import closed_form

    rows = []
    for entry in entries:
        c = entry.contract
        noise = ds * c.s_min if ds_relative else ds
        report = metric_report(c, entry.agg, noise, k, n)
        closed = {
            "error_factor": closed_form(c, "error_factor", noise, entry.agg),
            "unfairness": closed_form(c, "unfairness", k, entry.agg),
            "growth": closed_form(c, "growth", n, entry.agg),
            "bandwidth_range": closed_form(c, "range"),
        }
        rows.append(TableRow(entry.name, entry.agg, report, closed))
    return rows


TABLE_METRICS = ("error_factor", "unfairness", "growth", "bandwidth_range")


def table_rows(entries: Sequence[TableEntry], ds: Sequence[float], ks: Sequence[int],
               ns: Sequence[int], metrics: Sequence[str] = TABLE_METRICS,
               ds_relative: bool = True) -> list[dict]:
    """One dict per (contract, metric, parameter), each metric computed once per value.

    Keys: contract_id, agg, metric, param, value, argmax, closed_form, status.
    A metric that cannot be computed leaves ``value`` empty and explains why
    in ``status``.
    """
    from .errors import ContractLensError
    from .metrics import (bandwidth_range, closed_form, error_factor_search, growth_search,
                          unfairness_search)

    rows = []
    for entry in entries:
        c, agg = entry.contract, entry.agg
        cells = []
        if "error_factor" in metrics:
            for d in ds:
                noise = d * c.s_min if ds_relative else d
                cells.append(("error_factor", d, lambda v=noise: error_factor_search(c, v),
                              lambda v=noise: closed_form(c, "error_factor", v, agg)))
        if "unfairness" in metrics:
            for k in ks:
                cells.append(("unfairness", int(k), lambda k=int(k): unfairness_search(c, agg, k),
                              lambda k=int(k): closed_form(c, "unfairness", k, agg)))
        if "growth" in metrics:
            for n in ns:
                cells.append(("growth", int(n), lambda n=int(n): growth_search(c, n),
                              lambda n=int(n): closed_form(c, "growth", n, agg)))
        if "bandwidth_range" in metrics:
            cells.append(("bandwidth_range", None, lambda: (bandwidth_range(c), None),
                          lambda: closed_form(c, "range")))
        for metric, param, compute, exact in cells:
            row = {"contract_id": entry.name, "agg": agg.value, "metric": metric, "param": param,
                   "value": None, "argmax": None, "closed_form": exact(), "status": "ok"}
            try:
                row["value"], row["argmax"] = compute()
            except ContractLensError as exc:
                row["status"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    return rows
