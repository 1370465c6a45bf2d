import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expostdp.accountant import (
    DoublingSchedule,
    doubling_loss,
    doubling_rate_overhead,
    doubling_record,
    expost_loss,
)
from expostdp.laplace import PrivacyGrid

GRID = PrivacyGrid((0.1, 0.2, 0.4))


class TestExPostLoss:
    def test_bottom_is_infinite(self):
        rec = expost_loss(None, 0.7, GRID)
        assert rec.eps_total == math.inf
        assert rec.eps_generate == math.inf
        assert rec.risk_factor == math.inf
        assert rec.bottom

    def test_zero_test_loss(self):
        rec = expost_loss(1, 0.0, GRID)
        assert rec.eps_total == GRID[0]

    def test_simple_addition(self):
        rec = expost_loss(3, 0.5, GRID)
        assert rec.eps_total == pytest.approx(0.9, abs=1e-15)
        assert rec.risk_factor == pytest.approx(math.exp(0.9))

    @pytest.mark.parametrize("bad", [0, 4, -1])
    def test_index_out_of_range(self, bad):
        with pytest.raises(ValueError):
            expost_loss(bad, 0.1, GRID)

    def test_negative_test_loss_rejected(self):
        with pytest.raises(ValueError):
            expost_loss(1, -0.1, GRID)

    def test_monotone_in_stop_index(self):
        totals = [expost_loss(k, 0.5, GRID).eps_total for k in (1, 2, 3)]
        assert totals == sorted(totals)


def _doubling_oracle(k, delta, T, gamma, alpha, eps1):
    """High-precision evaluation of the doubling-loss formula."""
    mpmath.mp.dps = 50
    val = (2 * k * mpmath.mpf(delta) * mpmath.log(mpmath.mpf(T) / mpmath.mpf(gamma)) / mpmath.mpf(alpha)
           + (mpmath.mpf(2) ** k - 1) * mpmath.mpf(eps1))
    return float(val)


class TestDoublingLoss:
    @pytest.mark.parametrize("k,expected", [(1, 0.21194), (3, 0.63587)])
    def test_spot_values(self, k, expected):
        got = doubling_loss(k, 0.001, 20, 0.1, 0.05, 1e-5)
        oracle = _doubling_oracle(k, 0.001, 20, 0.1, 0.05, 1e-5)
        assert got == pytest.approx(oracle, rel=1e-12)
        assert got == pytest.approx(expected, abs=5e-6)

    def test_degenerate_zero(self):
        for k in range(1, 6):
            assert doubling_loss(k, 0.0, 5, 0.1, 0.05, 0.0) == 0.0

    def test_fallback_index_is_infinite(self):
        assert doubling_loss(21, 0.001, 20, 0.1, 0.05, 1e-5) == math.inf

    @pytest.mark.parametrize("k", [0, 22, -3])
    def test_out_of_range_rejected(self, k):
        with pytest.raises(ValueError):
            doubling_loss(k, 0.001, 20, 0.1, 0.05, 1e-5)

    def test_strictly_increasing_in_k(self):
        vals = [doubling_loss(k, 0.001, 20, 0.1, 0.05, 1e-5) for k in range(1, 21)]
        assert all(a < b for a, b in zip(vals, vals[1:]))


class TestDoublingRateOverhead:
    def test_half_is_four(self):
        assert doubling_rate_overhead(0.5) == 4.0

    def test_quarter(self):
        assert doubling_rate_overhead(0.25) == pytest.approx(16.0 / 3.0, rel=1e-15)

    def test_grid_minimum_at_half(self):
        rates = [0.01 * k for k in range(1, 100)]
        best = min(rates, key=doubling_rate_overhead)
        assert best == pytest.approx(0.5)

    @given(st.floats(min_value=1e-6, max_value=1 - 1e-6))
    @settings(max_examples=200, deadline=None)
    def test_never_below_four(self, r):
        assert doubling_rate_overhead(r) >= 4.0

    @pytest.mark.parametrize("r", [0.0, 1.0, -0.2, 1.5])
    def test_domain(self, r):
        with pytest.raises(ValueError):
            doubling_rate_overhead(r)


class TestDoublingSchedule:
    def test_levels(self):
        sched = DoublingSchedule(1e-4, 5)
        assert sched.epsilon_at(1) == 1e-4
        assert sched.epsilon_at(4) == pytest.approx(8e-4)

    def test_generation_loss_matches_closed_form(self):
        sched = DoublingSchedule(1e-4, 10)
        for k in range(1, 11):
            assert sched.generation_loss(k) == (2.0**k - 1.0) * 1e-4

    def test_record_total_matches_doubling_loss(self):
        sched = DoublingSchedule(1e-5, 12)
        for k in range(1, 13):
            rec = doubling_record(k, 0.002, sched, 0.1, 0.05)
            assert rec.eps_total == doubling_loss(k, 0.002, 12, 0.1, 0.05, 1e-5)
            assert rec.eps_total == rec.eps_test + rec.eps_generate

    def test_record_bottom(self):
        sched = DoublingSchedule(1e-5, 12)
        rec = doubling_record(13, 0.002, sched, 0.1, 0.05)
        assert rec.bottom and rec.eps_total == math.inf

    @pytest.mark.parametrize("bad", [dict(eps_start=0.0, steps=3), dict(eps_start=1.0, steps=0),
                                     dict(eps_start=1.0, steps=3, factor=1.0)])
    def test_validation(self, bad):
        with pytest.raises(ValueError):
            DoublingSchedule(**bad)
