import math

import numpy as np
import pytest
from scipy import integrate

from contract_lens import AggKind, Contract, Family, StatKind, TabulatedContract, contract_from_record
from contract_lens.errors import ContractError, DomainError, RangeError, UnsupportedAgg

# frozen from scripts/derive_oracles.py (scipy quadrature of the closed-form inverses)
UTILITY_ORACLE = {
    "exponential": (Contract.exponential(0.1, 3.0, rate_scale=2.0, stat_scale=0.5), 0.2, 1.5,
                    0.635503045039431),
    "shifted_power": (Contract.power_law(0.7, 0.5, 10.0, rate_scale=1.5, stat_shift=0.2, rate_shift=0.1),
                      0.5, 3.0, 4.028557495470752),
    "linear": (Contract.linear(0.1, 3.9, rate_scale=3.0, stat_scale=4.0), 0.5, 2.5, 4.0),
    "logarithmic": (Contract.logarithmic(0.1, 4.9, rate_scale=2.0, stat_scale=5.0), 0.4, 3.0,
                    5.956005929295521),
}


class TestEvaluate:
    def test_inverse_power(self):
        assert Contract.power_law(1.0, 1.0, 100.0).evaluate(2.0) == pytest.approx(0.5)

    def test_inverse_square(self):
        assert Contract.power_law(2.0, 1.0, 100.0).evaluate(2.0) == pytest.approx(0.25)

    def test_exponential_at_zero(self):
        assert Contract.exponential(0.0, 5.0).evaluate(0.0) == pytest.approx(1.0)

    def test_vectorised(self):
        c = Contract.power_law(1.0, 1.0, 100.0)
        np.testing.assert_allclose(c.evaluate(np.array([1.0, 2.0, 4.0])), [1.0, 0.5, 0.25])

    @pytest.mark.parametrize("s", [0.5, 100.5, -1.0])
    def test_outside_domain(self, s):
        with pytest.raises(DomainError):
            Contract.power_law(1.0, 1.0, 100.0).evaluate(s)

    def test_domain_edges_are_inclusive(self):
        c = Contract.power_law(1.0, 1.0, 100.0)
        assert c.evaluate(1.0) == 1.0
        assert c.evaluate(100.0) == pytest.approx(0.01)

    def test_extended_past_intercept_is_zero_or_negative(self):
        c = Contract.linear(0.1, 0.9)
        assert c.extended(2.0) < 0
        assert c.x_intercept == pytest.approx(1.0)


class TestInverse:
    def test_inverse_power(self):
        assert Contract.power_law(1.0, 1.0, 100.0).inverse(0.5) == pytest.approx(2.0)

    def test_inverse_square(self):
        assert Contract.power_law(2.0, 1.0, 100.0).inverse(0.25) == pytest.approx(2.0)

    def test_exponential(self):
        assert Contract.exponential(0.0, 5.0).inverse(1.0) == pytest.approx(0.0, abs=1e-15)

    def test_out_of_range(self):
        c = Contract.power_law(1.0, 1.0, 100.0)
        with pytest.raises(RangeError):
            c.inverse(2.0)
        with pytest.raises(RangeError):
            c.inverse(0.001)

    def test_inverse_clamped_saturates(self):
        c = Contract.power_law(1.0, 1.0, 100.0)
        assert c.inverse_clamped(5.0) == (1.0, True)
        assert c.inverse_clamped(1e-6) == (100.0, True)
        s, clipped = c.inverse_clamped(0.5)
        assert s == pytest.approx(2.0) and not clipped


class TestUtility:
    def test_log_utility(self):
        c = Contract.power_law(1.0, 0.1, 10.0)
        assert c.utility(2.0) - c.utility(1.0) == pytest.approx(math.log(2.0), rel=1e-12)

    def test_alpha_two(self):
        c = Contract.power_law(0.5, 0.1, 10.0)
        assert c.utility(2.0) - c.utility(1.0) == pytest.approx(0.5, rel=1e-12)

    @pytest.mark.parametrize("name", list(UTILITY_ORACLE))
    def test_matches_quadrature(self, name):
        c, x1, x2, expected = UTILITY_ORACLE[name]
        assert c.utility(x2) - c.utility(x1) == pytest.approx(expected, abs=1e-6)

    def test_zero_at_midpoint(self):
        c = Contract.power_law(1.0, 1.0, 100.0)
        assert c.utility(0.5 * (c.rate_min + c.rate_max)) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("alpha", [0.5, 2.0, 3.0])
    def test_alpha_fair_shape(self, alpha):
        # utility of the 1/s^(1/alpha) contract is x^(1-alpha)/(1-alpha) up to an affine map
        c = Contract.power_law(1.0 / alpha, 1.0, 1e3)
        xs = np.linspace(c.rate_min * 1.01, c.rate_max * 0.99, 9)
        u = np.array([c.utility(x) for x in xs])
        ref = xs ** (1 - alpha) / (1 - alpha)
        slope, icpt = np.polyfit(ref, u, 1)
        np.testing.assert_allclose(u, slope * ref + icpt, rtol=1e-9, atol=1e-9)
        assert slope > 0

    @pytest.mark.parametrize("agg", [AggKind.MAX, AggKind.MIN])
    def test_rejects_non_additive(self, agg):
        with pytest.raises(UnsupportedAgg):
            Contract.power_law(1.0, 1.0, 10.0).utility(0.5, agg)


class TestProperties:
    @pytest.mark.parametrize("c", [
        Contract.power_law(1.0, 1.0, 100.0),
        Contract.power_law(2.0, 0.3, 30.0, rate_scale=5.0, stat_scale=0.3),
        Contract.exponential(0.1, 5.0, rate_scale=3.0, stat_scale=0.7),
        Contract.linear(0.1, 0.95),
        Contract.logarithmic(0.05, 0.99),
        Contract.power_law(0.89, 50.0, 500.0, stat_shift=46.91),
    ])
    def test_monotone_and_round_trip(self, c):
        s = np.linspace(c.s_min, c.s_max, 1000)
        x = c.evaluate(s)
        assert np.all(np.diff(x) < 0)
        back = c.inverse(x)
        assert np.all(np.abs(back - s) <= 1e-9 * np.abs(s) + 1e-12)

    def test_shift_consistency(self):
        base = Contract.power_law(1.0, 1.0, 100.0)
        shifted = Contract.power_law(1.0, 4.0, 103.0, stat_shift=3.0)
        s = np.linspace(4.0, 103.0, 50)
        np.testing.assert_allclose(shifted.evaluate(s), base.evaluate(s - 3.0), rtol=1e-12)

    def test_representation_neutrality(self):
        on_s = Contract.power_law(2.0, 1.0, 100.0)
        on_s2 = Contract.power_law(1.0, 1.0, 1e4)
        s = np.linspace(1.0, 100.0, 200)
        np.testing.assert_allclose(on_s.evaluate(s), on_s2.evaluate(s ** 2), rtol=1e-12)


class TestValidation:
    @pytest.mark.parametrize("kw", [
        dict(family="power_law", s_min=1.0, s_max=1.0),
        dict(family="power_law", s_min=0.0, s_max=1.0),
        dict(family="power_law", s_min=1.0, s_max=2.0, exponent=-1.0),
        dict(family="linear", s_min=0.1, s_max=1.5),
        dict(family="exponential", s_min=0.0, s_max=1.0, rate_scale=0.0),
        dict(family="exponential", s_min=0.0, s_max=math.inf),
    ])
    def test_invalid(self, kw):
        with pytest.raises(ContractError):
            Contract(**kw)

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            Contract("cubic", 1.0, 2.0)


class TestRecords:
    def test_round_trip(self):
        c = Contract.power_law(0.89, 50.0, 500.0, rate_scale=3.0, stat_shift=46.91, rate_shift=0.5)
        assert contract_from_record(c.to_record()) == c

    def test_unknown_key(self):
        rec = Contract.linear(0.1, 0.9).to_record()
        rec["colour"] = 1
        with pytest.raises(ContractError, match="colour"):
            contract_from_record(rec)

    def test_tabulated_round_trip(self):
        t = TabulatedContract([1.0, 2.0, 4.0], [4.0, 2.0, 1.0])
        back = contract_from_record(t.to_record())
        np.testing.assert_allclose(back.stats, t.stats)
        np.testing.assert_allclose(back.rates, t.rates)


class TestTabulated:
    def test_power_law_points_are_exact(self):
        s = np.geomspace(1.0, 100.0, 5)
        t = TabulatedContract(s, 1.0 / s)
        q = np.geomspace(1.0, 100.0, 37)
        np.testing.assert_allclose(t.evaluate(q), 1.0 / q, rtol=1e-12)
        np.testing.assert_allclose(t.inverse(1.0 / q), q, rtol=1e-12)

    def test_extrapolates(self):
        t = TabulatedContract([1.0, 10.0], [1.0, 0.1])
        assert t.extended(100.0) == pytest.approx(0.01)

    def test_rejects_increasing(self):
        with pytest.raises(ContractError):
            TabulatedContract([1.0, 2.0], [1.0, 2.0])

    def test_utility_by_quadrature(self):
        t = TabulatedContract(np.geomspace(0.1, 10.0, 9), 1.0 / np.geomspace(0.1, 10.0, 9))
        exact = integrate.quad(lambda x: 1.0 / x, 1.0, 2.0)[0]
        assert t.utility(2.0) - t.utility(1.0) == pytest.approx(exact, rel=1e-6)


class TestStatKind:
    def test_default_aggregation(self):
        assert StatKind.QUEUE_DELAY.default_agg is AggKind.SUM
        assert StatKind.LOSS_RATE.default_agg is AggKind.SURVIVAL_PRODUCT
        assert StatKind.ECN_RATE.default_agg is AggKind.SURVIVAL_PRODUCT
        assert StatKind.MAX_PER_HOP_DELAY.default_agg is AggKind.MAX

    def test_survival_product(self):
        assert AggKind.SURVIVAL_PRODUCT.combine([0.001, 0.002]) == pytest.approx(0.003)
        assert AggKind.SURVIVAL_PRODUCT.combine([0.5, 0.5]) == pytest.approx(0.75)
        assert AggKind.SURVIVAL_PRODUCT.repeat(0.1, 3) == pytest.approx(1 - 0.9 ** 3)

    def test_repeat(self):
        assert AggKind.SUM.repeat(2.0, 3) == 6.0
        assert AggKind.MAX.repeat(2.0, 3) == 2.0

    def test_family_enum(self):
        assert Family("power_law") is Family.POWER_LAW
