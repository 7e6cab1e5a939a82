"""Contracts: strictly decreasing maps from a congestion statistic to a rate.

A contract is ``rate = rate_shift + rate_scale * base((s - stat_shift) / stat_scale)``
with one of four decreasing base shapes:

==============  =================
family          base(u)
==============  =================
power_law       ``u ** -exponent``
exponential     ``exp(-u)``
linear          ``1 - u``
logarithmic     ``log(1 / u)``
==============  =================

Units follow the rest of the package: rates in bytes/second, delays in
nanoseconds, loss/ECN rates dimensionless.  Nothing here cares about units,
so the analytic code freely uses the ``rate_scale = stat_scale = 1``
normalisation.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np
from scipy import integrate

from .errors import ContractError, DomainError, RangeError, UnsupportedAgg

# Slack applied to domain/range membership checks so that round trips through
# evaluate/inverse do not trip on the last ulp.
_EDGE_RTOL = 1e-12


class Family(enum.Enum):
    POWER_LAW = "power_law"
    EXPONENTIAL = "exponential"
    LINEAR = "linear"
    LOGARITHMIC = "logarithmic"


class AggKind(enum.Enum):
    """How a statistic accumulates over the hops of a path."""

    SUM = "sum"
    MAX = "max"
    MIN = "min"
    SURVIVAL_PRODUCT = "survival_product"

    def combine(self, values, exact: bool = False) -> float:
        vals = [float(v) for v in values]
        if not vals:
            raise ValueError("cannot aggregate an empty list of statistics")
        if self is AggKind.SUM:
            return math.fsum(vals)
        if self is AggKind.MAX:
            return max(vals)
        if self is AggKind.MIN:
            return min(vals)
        if any(v < 0.0 or v > 1.0 for v in vals):
            raise DomainError("survival-product aggregation needs statistics in [0, 1]")
        # small probabilities add up; the product form only matters above ~1%
        if not exact and max(vals) < 0.01:
            return math.fsum(vals)
        survive = 1.0
        for v in vals:
            survive *= 1.0 - v
        return 1.0 - survive

    def repeat(self, s: float, k: int, exact: bool = False) -> float:
        """Aggregate ``k`` copies of the same per-hop statistic ``s``."""
        if k < 1:
            raise ValueError("hop count must be >= 1")
        if self is AggKind.SUM:
            return k * s
        if self in (AggKind.MAX, AggKind.MIN):
            return s
        if s < 0.0 or s > 1.0:
            raise DomainError("survival-product aggregation needs statistics in [0, 1]")
        if not exact and s < 0.01:
            return k * s
        return 1.0 - (1.0 - s) ** k


class StatKind(enum.Enum):
    QUEUE_DELAY = "queue_delay"
    AVG_DELAY = "avg_delay"
    P50_DELAY = "p50_delay"
    LOSS_RATE = "loss_rate"
    ECN_RATE = "ecn_rate"
    MAX_PER_HOP_DELAY = "max_per_hop_delay"

    @property
    def default_agg(self) -> AggKind:
        if self in (StatKind.LOSS_RATE, StatKind.ECN_RATE):
            return AggKind.SURVIVAL_PRODUCT
        if self is StatKind.MAX_PER_HOP_DELAY:
            return AggKind.MAX
        return AggKind.SUM

    @property
    def is_delay(self) -> bool:
        return self not in (StatKind.LOSS_RATE, StatKind.ECN_RATE)


def _as_output(value, scalar: bool):
    return float(value) if scalar else value


@dataclass(frozen=True)
class Contract:
    """Parametric decreasing contract over the closed domain ``[s_min, s_max]``."""

    family: Family
    s_min: float
    s_max: float
    exponent: float = 1.0
    rate_scale: float = 1.0
    stat_scale: float = 1.0
    stat_shift: float = 0.0
    rate_shift: float = 0.0

    def __post_init__(self):
        if not isinstance(self.family, Family):
            object.__setattr__(self, "family", Family(self.family))
        for name in ("s_min", "s_max", "exponent", "rate_scale", "stat_scale",
                     "stat_shift", "rate_shift"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ContractError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.rate_scale <= 0:
            raise ContractError("rate_scale must be positive")
        if self.stat_scale <= 0:
            raise ContractError("stat_scale must be positive")
        if self.family is Family.POWER_LAW and self.exponent <= 0:
            raise ContractError("power-law exponent must be positive")
        if not self.s_max > self.s_min:
            raise ContractError(f"empty domain [{self.s_min}, {self.s_max}]")
        if self.family in (Family.POWER_LAW, Family.LOGARITHMIC) and self.s_min <= self.stat_shift:
            raise ContractError("s_min must lie strictly right of stat_shift")
        if not self._raw(self.s_max) > 0:
            raise ContractError("contract must stay positive over its domain "
                                f"(rate at s_max is {self._raw(self.s_max)!r})")

    # constructors ----------------------------------------------------------
    @classmethod
    def power_law(cls, exponent, s_min, s_max, rate_scale=1.0, stat_scale=1.0, **kw) -> "Contract":
        return cls(Family.POWER_LAW, s_min, s_max, exponent=exponent,
                   rate_scale=rate_scale, stat_scale=stat_scale, **kw)

    @classmethod
    def exponential(cls, s_min, s_max, rate_scale=1.0, stat_scale=1.0, **kw) -> "Contract":
        return cls(Family.EXPONENTIAL, s_min, s_max, rate_scale=rate_scale,
                   stat_scale=stat_scale, **kw)

    @classmethod
    def linear(cls, s_min, s_max, rate_scale=1.0, stat_scale=1.0, **kw) -> "Contract":
        return cls(Family.LINEAR, s_min, s_max, rate_scale=rate_scale,
                   stat_scale=stat_scale, **kw)

    @classmethod
    def logarithmic(cls, s_min, s_max, rate_scale=1.0, stat_scale=1.0, **kw) -> "Contract":
        return cls(Family.LOGARITHMIC, s_min, s_max, rate_scale=rate_scale,
                   stat_scale=stat_scale, **kw)

    # shape -----------------------------------------------------------------
    def _base(self, u):
        fam = self.family
        with np.errstate(divide="ignore", invalid="ignore"):
            if fam is Family.POWER_LAW:
                return np.power(u, -self.exponent)
            if fam is Family.EXPONENTIAL:
                return np.exp(-u)
            if fam is Family.LINEAR:
                return 1.0 - u
            return -np.log(u)

    def _base_inv(self, y):
        fam = self.family
        with np.errstate(divide="ignore", invalid="ignore"):
            if fam is Family.POWER_LAW:
                return np.power(y, -1.0 / self.exponent)
            if fam is Family.EXPONENTIAL:
                return -np.log(y)
            if fam is Family.LINEAR:
                return 1.0 - y
            return np.exp(-y)

    def _raw(self, s):
        u = (np.asarray(s, dtype=float) - self.stat_shift) / self.stat_scale
        return self.rate_shift + self.rate_scale * self._base(u)

    # public evaluation -------------------------------------------------------
    @property
    def rate_min(self) -> float:
        return float(self._raw(self.s_max))

    @property
    def rate_max(self) -> float:
        return float(self._raw(self.s_min))

    def in_domain(self, s) -> bool:
        tol = _EDGE_RTOL * max(abs(self.s_min), abs(self.s_max), 1e-300)
        arr = np.asarray(s, dtype=float)
        return bool(np.all((arr >= self.s_min - tol) & (arr <= self.s_max + tol)))

    def evaluate(self, s):
        """Rate for statistic ``s``; raises :class:`DomainError` outside the domain."""
        scalar = np.ndim(s) == 0
        if not self.in_domain(s):
            raise DomainError(f"statistic {s!r} outside [{self.s_min}, {self.s_max}]")
        arr = np.clip(np.asarray(s, dtype=float), self.s_min, self.s_max)
        return _as_output(self._raw(arr), scalar)

    def extended(self, s):
        """Closed-form value with no domain check; may be <= 0 past an X-intercept."""
        scalar = np.ndim(s) == 0
        out = self._raw(s)
        out = np.where(np.isnan(out), 0.0, out)
        return _as_output(out, scalar)

    def inverse(self, x):
        """Statistic at which the contract yields rate ``x``."""
        scalar = np.ndim(x) == 0
        lo, hi = self.rate_min, self.rate_max
        tol = _EDGE_RTOL * hi
        arr = np.asarray(x, dtype=float)
        if np.any((arr < lo - tol) | (arr > hi + tol)):
            raise RangeError(f"rate {x!r} outside contract range [{lo}, {hi}]")
        y = (arr - self.rate_shift) / self.rate_scale
        s = self.stat_shift + self.stat_scale * self._base_inv(y)
        return _as_output(np.clip(s, self.s_min, self.s_max), scalar)

    def clamp_stat(self, s: float) -> tuple[float, bool]:
        """Clip ``s`` into the domain, reporting whether clipping happened."""
        if s < self.s_min:
            return self.s_min, True
        if s > self.s_max:
            return self.s_max, True
        return float(s), False

    def inverse_clamped(self, x: float) -> tuple[float, bool]:
        """Like :meth:`inverse` but saturates at the domain ends instead of raising."""
        if x >= self.rate_max:
            return self.s_min, x > self.rate_max
        if x <= self.rate_min:
            return self.s_max, x < self.rate_min
        return float(self.inverse(x)), False

    @property
    def x_intercept(self) -> float | None:
        """Statistic where the extended closed form reaches rate 0, if any."""
        c, b0 = self.rate_shift, self.rate_scale
        fam = self.family
        if fam is Family.LINEAR:
            u = 1.0 + c / b0
        elif fam is Family.LOGARITHMIC:
            u = math.exp(c / b0)
        elif c < 0:
            y = -c / b0
            u = y ** (-1.0 / self.exponent) if fam is Family.POWER_LAW else -math.log(y)
        else:
            return None
        return self.stat_shift + self.stat_scale * u

    # utility ----------------------------------------------------------------
    def _inverse_antiderivative(self, x: float) -> float:
        # integral of inverse(x) dx = stat_shift*x + stat_scale*rate_scale*G(v),
        # v = (x - rate_shift) / rate_scale, G' = base^-1
        v = (x - self.rate_shift) / self.rate_scale
        fam = self.family
        if fam is Family.POWER_LAW:
            q = 1.0 / self.exponent
            g = math.log(v) if q == 1.0 else v ** (1.0 - q) / (1.0 - q)
        elif fam is Family.EXPONENTIAL:
            g = v - v * math.log(v)
        elif fam is Family.LINEAR:
            g = v - 0.5 * v * v
        else:
            g = -math.exp(-v)
        return self.stat_shift * x + self.stat_scale * self.rate_scale * g

    def utility(self, x: float, agg: AggKind = AggKind.SUM) -> float:
        """Utility whose marginal is the contract inverse, zeroed at the range midpoint."""
        if agg in (AggKind.MAX, AggKind.MIN):
            raise UnsupportedAgg("utility is only defined for statistics that add up over hops")
        self.inverse(x)  # range check
        mid = 0.5 * (self.rate_min + self.rate_max)
        return self._inverse_antiderivative(float(x)) - self._inverse_antiderivative(mid)

    # transforms / io --------------------------------------------------------
    def with_shift(self, stat_shift: float) -> "Contract":
        return replace(self, stat_shift=float(stat_shift))

    def to_record(self) -> dict:
        return {
            "family": self.family.value,
            "alpha": self.exponent,
            "rate_scale": self.rate_scale,
            "stat_scale": self.stat_scale,
            "stat_shift": self.stat_shift,
            "rate_shift": self.rate_shift,
            "s_min": self.s_min,
            "s_max": self.s_max,
        }


class TabulatedContract:
    """Monotone contract given by points, interpolated linearly in log-log space.

    Used to re-analyse fitted or measured contracts with the same metric code.
    Past the last point the final segment is extrapolated.
    """

    def __init__(self, stats, rates):
        s = np.asarray(stats, dtype=float)
        x = np.asarray(rates, dtype=float)
        if s.ndim != 1 or s.shape != x.shape or len(s) < 2:
            raise ContractError("need at least two (stat, rate) points of equal length")
        order = np.argsort(s)
        s, x = s[order], x[order]
        if np.any(s <= 0) or np.any(x <= 0):
            raise ContractError("tabulated contracts need positive stats and rates")
        if np.any(np.diff(s) <= 0) or np.any(np.diff(x) >= 0):
            raise ContractError("tabulated contract must be strictly decreasing")
        self._ls = np.log(s)
        self._lx = np.log(x)
        self.stats = s
        self.rates = x

    family = "tabulated"
    stat_shift = 0.0
    x_intercept = None

    @property
    def s_min(self) -> float:
        return float(self.stats[0])

    @property
    def s_max(self) -> float:
        return float(self.stats[-1])

    @property
    def rate_min(self) -> float:
        return float(self.rates[-1])

    @property
    def rate_max(self) -> float:
        return float(self.rates[0])

    def in_domain(self, s) -> bool:
        tol = _EDGE_RTOL * self.s_max
        arr = np.asarray(s, dtype=float)
        return bool(np.all((arr >= self.s_min - tol) & (arr <= self.s_max + tol)))

    def evaluate(self, s):
        scalar = np.ndim(s) == 0
        if not self.in_domain(s):
            raise DomainError(f"statistic {s!r} outside [{self.s_min}, {self.s_max}]")
        ls = np.log(np.clip(np.asarray(s, dtype=float), self.s_min, self.s_max))
        return _as_output(np.exp(np.interp(ls, self._ls, self._lx)), scalar)

    def extended(self, s):
        scalar = np.ndim(s) == 0
        arr = np.asarray(s, dtype=float)
        ls = np.log(np.maximum(arr, 1e-300))
        inner = np.interp(ls, self._ls, self._lx)
        lo_slope = (self._lx[1] - self._lx[0]) / (self._ls[1] - self._ls[0])
        hi_slope = (self._lx[-1] - self._lx[-2]) / (self._ls[-1] - self._ls[-2])
        out = np.where(ls < self._ls[0], self._lx[0] + lo_slope * (ls - self._ls[0]), inner)
        out = np.where(ls > self._ls[-1], self._lx[-1] + hi_slope * (ls - self._ls[-1]), out)
        return _as_output(np.exp(out), scalar)

    def inverse(self, x):
        scalar = np.ndim(x) == 0
        arr = np.asarray(x, dtype=float)
        tol = _EDGE_RTOL * self.rate_max
        if np.any((arr < self.rate_min - tol) | (arr > self.rate_max + tol)):
            raise RangeError(f"rate {x!r} outside contract range [{self.rate_min}, {self.rate_max}]")
        lx = np.log(np.clip(arr, self.rate_min, self.rate_max))
        return _as_output(np.exp(np.interp(lx, self._lx[::-1], self._ls[::-1])), scalar)

    def clamp_stat(self, s: float) -> tuple[float, bool]:
        if s < self.s_min:
            return self.s_min, True
        if s > self.s_max:
            return self.s_max, True
        return float(s), False

    def inverse_clamped(self, x: float) -> tuple[float, bool]:
        if x >= self.rate_max:
            return self.s_min, x > self.rate_max
        if x <= self.rate_min:
            return self.s_max, x < self.rate_min
        return float(self.inverse(x)), False

    def utility(self, x: float, agg: AggKind = AggKind.SUM) -> float:
        if agg in (AggKind.MAX, AggKind.MIN):
            raise UnsupportedAgg("utility is only defined for statistics that add up over hops")
        self.inverse(x)
        mid = 0.5 * (self.rate_min + self.rate_max)
        val, _ = integrate.quad(lambda y: float(self.inverse(y)), mid, float(x), limit=200)
        return val

    def to_record(self) -> dict:
        pts = ";".join(f"{float(s)!r}:{float(x)!r}" for s, x in zip(self.stats, self.rates))
        return {"family": "tabulated", "points": pts,
                "s_min": self.s_min, "s_max": self.s_max}


RECORD_KEYS = ("family", "alpha", "rate_scale", "stat_scale", "stat_shift",
               "rate_shift", "s_min", "s_max")


def contract_from_record(record: Mapping) -> Contract | TabulatedContract:
    """Inverse of ``to_record``; unknown keys raise so typos surface early."""
    rec = dict(record)
    family = rec.pop("family", None)
    if family is None:
        raise ContractError("contract record lacks 'family'")
    if family == "tabulated":
        pts = rec.pop("points", "")
        rec.pop("s_min", None)
        rec.pop("s_max", None)
        if rec:
            raise ContractError(f"unknown contract key(s): {', '.join(sorted(rec))}")
        pairs = [p.split(":") for p in str(pts).split(";") if p]
        return TabulatedContract([float(a) for a, _ in pairs], [float(b) for _, b in pairs])
    unknown = set(rec) - set(RECORD_KEYS)
    if unknown:
        raise ContractError(f"unknown contract key(s): {', '.join(sorted(unknown))}")
    for key in ("s_min", "s_max"):
        if key not in rec:
            raise ContractError(f"contract record lacks '{key}'")
    try:
        fam = Family(family)
    except ValueError:
        raise ContractError(f"unknown contract family {family!r}") from None
    return Contract(
        fam,
        s_min=float(rec["s_min"]),
        s_max=float(rec["s_max"]),
        exponent=float(rec.get("alpha", 1.0)),
        rate_scale=float(rec.get("rate_scale", 1.0)),
        stat_scale=float(rec.get("stat_scale", 1.0)),
        stat_shift=float(rec.get("stat_shift", 0.0)),
        rate_shift=float(rec.get("rate_shift", 0.0)),
    )
