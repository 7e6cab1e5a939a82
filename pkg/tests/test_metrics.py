import math

import pytest

from contract_lens import AggKind, Contract
from contract_lens.errors import DomainError, InfeasibleCapacity, ParamError, RangeError
from contract_lens.metrics import (bandwidth_range, closed_form, error_factor, golden_max, growth,
                                   growth_search, metric_report, parking_lot_band,
                                   parking_lot_fixed_point, shifted_unfairness_curve,
                                   unfairness_worst)

INV = Contract.power_law(1.0, 1.0, 200.0)
INV2 = Contract.power_law(2.0, 1.0, 200.0)
INV_SQRT = Contract.power_law(0.5, 1.0, 200.0)
EXP = Contract.exponential(0.1, 5.0)
LIN = Contract.linear(0.1, 0.96)
LOG = Contract.logarithmic(0.05, 0.99)


def test_golden_max_finds_interior_peak():
    v, x = golden_max(lambda t: -(t - 0.3) ** 2, 0.0, 1.0)
    assert x == pytest.approx(0.3, abs=1e-6) and v == pytest.approx(0.0, abs=1e-12)


class TestErrorFactor:
    def test_inverse(self):
        assert error_factor(INV, 1.0) == pytest.approx(2.0, rel=1e-9)

    def test_inverse_square(self):
        assert error_factor(INV2, 1.0) == pytest.approx(4.0, rel=1e-9)

    def test_exponential(self):
        c = Contract.exponential(0.1, 5.0, stat_scale=0.5)
        assert error_factor(c, 0.5) == pytest.approx(math.e, rel=1e-9)

    @pytest.mark.parametrize("c", [LIN, LOG])
    def test_intercept_gives_infinity(self, c):
        assert error_factor(c, 0.05) == math.inf

    def test_linear_finite_when_far_from_intercept(self):
        c = Contract.linear(0.1, 0.5)
        assert error_factor(c, 0.1) == pytest.approx((1 - 0.5) / (1 - 0.6), rel=1e-9)

    def test_ds_too_wide(self):
        with pytest.raises(DomainError):
            error_factor(INV, 199.0)

    def test_ds_non_positive(self):
        with pytest.raises(ParamError):
            error_factor(INV, 0.0)

    def test_monotone_in_ds(self):
        vals = [error_factor(EXP, d) for d in (1e-6, 0.1, 0.5, 1.0, 2.0)]
        assert vals == sorted(vals)
        assert vals[0] == pytest.approx(1.0, abs=1e-5)


class TestParkingLot:
    def test_proportional(self):
        fp = parking_lot_fixed_point(INV, AggKind.SUM, 2, 1.0)
        assert fp.x_long == pytest.approx(1 / 3, abs=1e-6)
        assert fp.x_short == pytest.approx(2 / 3, abs=1e-6)
        assert fp.ratio == pytest.approx(2.0, rel=1e-9)

    def test_min_potential_delay(self):
        c = Contract.power_law(0.5, 0.01, 200.0)
        fp = parking_lot_fixed_point(c, AggKind.SUM, 2, 1.0)
        assert fp.x_long == pytest.approx(math.sqrt(2) - 1, abs=1e-6)
        assert fp.x_short == pytest.approx(2 - math.sqrt(2), abs=1e-6)
        assert fp.ratio == pytest.approx(math.sqrt(2), rel=1e-9)

    def test_max_min(self):
        fp = parking_lot_fixed_point(EXP, AggKind.MAX, 5, 0.5)
        assert fp.ratio == pytest.approx(1.0, abs=1e-12)
        fp = parking_lot_fixed_point(Contract.power_law(1.0, 0.1, 200.0), AggKind.MAX, 2, 1.0)
        assert (fp.x_long, fp.x_short) == pytest.approx((0.5, 0.5), abs=1e-6)

    def test_invariants(self):
        fp = parking_lot_fixed_point(INV, AggKind.SUM, 3, 0.05)
        # frozen from a brentq solve of 1/s + 1/(3s) = 0.05
        assert fp.s_short == pytest.approx(26.666666666666664, rel=1e-9)
        assert fp.x_short + fp.x_long == pytest.approx(0.05, rel=1e-6)
        assert fp.s_long == pytest.approx(3 * fp.s_short, rel=1e-12)
        assert fp.ratio >= 1

    def test_exponential_sum(self):
        # frozen from a brentq solve of e^-s + e^-2s = 0.5
        fp = parking_lot_fixed_point(EXP, AggKind.SUM, 2, 0.5)
        assert fp.x_short == pytest.approx(0.36602540378443865, rel=1e-9)
        assert fp.x_long == pytest.approx(0.13397459621556135, rel=1e-9)

    def test_k1_is_fair(self):
        assert parking_lot_fixed_point(INV, AggKind.SUM, 1, 0.5).ratio == pytest.approx(1.0)

    def test_infeasible(self):
        lo, hi = parking_lot_band(INV, AggKind.SUM, 2)
        with pytest.raises(InfeasibleCapacity):
            parking_lot_fixed_point(INV, AggKind.SUM, 2, hi * 1.01)
        with pytest.raises(InfeasibleCapacity):
            parking_lot_fixed_point(INV, AggKind.SUM, 2, lo * 0.99)

    def test_starved_past_intercept(self):
        lo, hi = parking_lot_band(LIN, AggKind.SUM, 2)
        fp = parking_lot_fixed_point(LIN, AggKind.SUM, 2, lo * 1.0001)
        assert fp.starved and fp.ratio == math.inf

    def test_bad_k(self):
        with pytest.raises(ParamError):
            parking_lot_fixed_point(INV, AggKind.SUM, 0, 1.0)


class TestUnfairness:
    def test_inverse(self):
        assert unfairness_worst(INV, AggKind.SUM, 3) == pytest.approx(3.0, rel=1e-6)

    def test_inverse_square(self):
        assert unfairness_worst(INV2, AggKind.SUM, 3) == pytest.approx(9.0, rel=1e-6)

    def test_inverse_sqrt(self):
        assert unfairness_worst(INV_SQRT, AggKind.SUM, 4) == pytest.approx(2.0, rel=1e-6)

    def test_logarithmic_starves(self):
        assert unfairness_worst(LOG, AggKind.SUM, 2) == math.inf

    @pytest.mark.parametrize("c", [INV, INV2, EXP, LIN, LOG])
    @pytest.mark.parametrize("agg", [AggKind.MAX, AggKind.MIN])
    def test_max_min_is_fair(self, c, agg):
        assert unfairness_worst(c, agg, 4) == pytest.approx(1.0, abs=1e-12)


class TestShifted:
    def test_unshifted(self):
        assert shifted_unfairness_curve(INV, AggKind.SUM, 2, [0.0]) == [pytest.approx(2.0, rel=1e-6)]

    def test_diverges_towards_shift(self):
        # frozen from the closed ratio (2s - b)/(s - b) at s = s_min
        got = shifted_unfairness_curve(INV, AggKind.SUM, 2, [0.9, 0.99, 0.999])
        assert got == pytest.approx([11.0, 101.0, 1001.0], rel=1e-6)

    def test_leftward_shift_is_fairer(self):
        got = shifted_unfairness_curve(INV, AggKind.SUM, 2, [-0.5])[0]
        assert got == pytest.approx(1.9975062344139651, rel=1e-6)
        assert got <= 2.0

    def test_monotone_in_rightward_shift(self):
        vals = shifted_unfairness_curve(INV, AggKind.SUM, 2, [-0.5, 0.0, 0.3, 0.6, 0.9])
        assert all(a <= b * (1 + 1e-9) for a, b in zip(vals, vals[1:]))


class TestGrowth:
    def test_inverse(self):
        assert growth(INV, 4) == pytest.approx(4.0, rel=1e-9)

    def test_inverse_square(self):
        assert growth(INV2, 4) == pytest.approx(2.0, rel=1e-9)

    def test_linear_closed_form(self):
        bmax = LIN.rate_max
        expected = (4 * 1.0 - bmax) / (4 * (1.0 - bmax))
        assert growth(LIN, 4) == pytest.approx(expected, rel=1e-6)

    def test_worst_case_at_bmax_for_linear(self):
        _, cap = growth_search(LIN, 4)
        assert cap == pytest.approx(LIN.rate_max, rel=1e-6)

    def test_one_flow(self):
        assert growth(EXP, 1) == 1.0

    def test_no_room(self):
        with pytest.raises(RangeError):
            growth(Contract.power_law(1.0, 1.0, 2.0), 4)

    def test_multiplicative_for_power_laws(self):
        for c in (INV, INV2, INV_SQRT):
            assert growth(c, 6) == pytest.approx(growth(c, 2) * growth(c, 3), rel=1e-6)


class TestRange:
    def test_inverse(self):
        assert bandwidth_range(INV) == pytest.approx(200.0)

    def test_inverse_square(self):
        assert bandwidth_range(INV2) == pytest.approx(40000.0)

    def test_exponential(self):
        c = Contract.exponential(0.0, math.log(10.0))
        assert bandwidth_range(c) == pytest.approx(10.0)


class TestClosedForms:
    @pytest.mark.parametrize("c", [INV, INV2, INV_SQRT, EXP])
    @pytest.mark.parametrize("k", [2, 3, 4, 8])
    def test_unfairness(self, c, k):
        assert unfairness_worst(c, AggKind.SUM, k) == pytest.approx(closed_form(c, "unfairness", k), rel=0.01)

    @pytest.mark.parametrize("c", [INV, INV2, INV_SQRT, EXP, LIN, LOG])
    @pytest.mark.parametrize("n", [2, 8, 64])
    def test_growth(self, c, n):
        if n > bandwidth_range(c):
            with pytest.raises(RangeError):
                growth(c, n)
        else:
            assert growth(c, n) == pytest.approx(closed_form(c, "growth", n), rel=0.01)

    def test_unknown_metric(self):
        with pytest.raises(ValueError):
            closed_form(INV, "latency")

    def test_shifted_has_no_closed_form(self):
        assert closed_form(INV.with_shift(0.5), "growth", 2) is None


class TestReport:
    def test_report_entries(self):
        r = metric_report(INV, AggKind.SUM, 1.0, 2, 4)
        assert [row[0] for row in r.rows()] == ["error_factor", "unfairness", "growth", "bandwidth_range"]
        assert r.error_factor == pytest.approx(2.0)
        assert r.unfairness == pytest.approx(2.0)
        assert r.growth == pytest.approx(4.0)
        assert all(v >= 1 for _, _, v, _ in r.rows())

    def test_failed_cells_are_reported(self):
        r = metric_report(Contract.power_law(1.0, 1.0, 2.0), AggKind.SUM, 0.5, 2, 4)
        assert r.growth is None and "growth" in r.errors
        assert r.error_factor is not None
