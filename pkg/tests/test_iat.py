import math

import pytest

from expostdp.iat import IatConfig, iat_epsilon_for, run_iat
from expostdp.laplace import RandomSource


def _config(eps_a=1.0, threshold=0.0, delta=1.0, T=10, gamma=0.1):
    return IatConfig(eps_a, threshold, delta, T, gamma)


class TestRunIat:
    def test_empty_stream_is_bottom(self):
        result = run_iat(_config(T=0), iter(()), RandomSource(0))
        assert not result.halted and result.stop_index == 0

    def test_huge_budget_halts_immediately_on_passing_query(self):
        config = _config(eps_a=1e6, threshold=0.0, T=1)
        hits = sum(
            run_iat(config, iter([1.0]), RandomSource(42, t)).halted for t in range(1000)
        )
        assert hits == 1000

    def test_huge_budget_never_halts_below_threshold(self):
        config = _config(eps_a=1e6, threshold=0.0, T=10)
        hits = sum(
            run_iat(config, iter([-1.0] * 10), RandomSource(43, t)).halted for t in range(1000)
        )
        assert hits == 0

    def test_halt_reports_index_and_value(self):
        config = _config(eps_a=1e6, threshold=0.0, T=10)
        result = run_iat(config, iter([-1.0, -1.0, 2.5, -1.0]), RandomSource(1))
        assert result.halted and result.stop_index == 3 and result.value == 2.5

    def test_stream_never_pulled_past_halt(self):
        config = _config(eps_a=1e6, threshold=0.0, T=10)

        def stream():
            yield -1.0
            yield 5.0
            raise AssertionError("query materialized past the halt point")

        result = run_iat(config, stream(), RandomSource(2))
        assert result.halted and result.stop_index == 2

    def test_at_most_max_queries_pulled(self):
        pulled = []

        def stream():
            for i in range(100):
                pulled.append(i)
                yield -1e9

        config = _config(eps_a=1e6, T=4)
        result = run_iat(config, stream(), RandomSource(3))
        assert not result.halted and result.stop_index == 4
        assert len(pulled) == 4

    def test_short_stream_reports_actual_length(self):
        config = _config(eps_a=1e6, T=10)
        result = run_iat(config, iter([-1e9, -1e9]), RandomSource(4))
        assert not result.halted and result.stop_index == 2

    def test_accuracy_calibration(self):
        # All queries sit exactly at the accuracy margin below the threshold;
        # halting on any of them is the failure event, which must have
        # probability at most gamma.
        delta, T, gamma, alpha = 0.01, 50, 0.1, 0.2
        eps_a = iat_epsilon_for(delta, T, gamma, alpha)
        config = IatConfig(eps_a, -alpha / 2.0, delta, T, gamma)
        queries = [-alpha - 1e-12] * T
        runs = 1500
        bad = sum(run_iat(config, iter(queries), RandomSource(77, t)).halted for t in range(runs))
        bound = gamma + 3 * math.sqrt(gamma * (1 - gamma) / runs)
        assert bad / runs <= bound


class TestIatEpsilonFor:
    def test_spot_value(self):
        delta = (math.sqrt(1 / 0.005) + 1) ** 2 / 1e5
        assert iat_epsilon_for(delta, 1000, 0.1, 0.05) == pytest.approx(7.266, abs=5e-4)

    def test_vanishing_sensitivity(self):
        assert iat_epsilon_for(0.0, 1000, 0.1, 0.05) == 0.0
        assert iat_epsilon_for(1e-12, 1000, 0.1, 0.05) < 1e-8

    def test_inverse_homogeneity_in_alpha(self):
        base = iat_epsilon_for(0.01, 100, 0.1, 0.05)
        assert iat_epsilon_for(0.01, 100, 0.1, 0.10) == pytest.approx(base / 2.0, rel=1e-15)

    @pytest.mark.parametrize("kwargs", [
        dict(delta=-1.0, T=10, gamma=0.1, alpha=0.1),
        dict(delta=1.0, T=0, gamma=0.1, alpha=0.1),
        dict(delta=1.0, T=10, gamma=1.5, alpha=0.1),
        dict(delta=1.0, T=10, gamma=0.1, alpha=0.0),
    ])
    def test_domain(self, kwargs):
        with pytest.raises(ValueError):
            iat_epsilon_for(**kwargs)


class TestConfigValidation:
    @pytest.mark.parametrize("kwargs", [
        dict(eps_a=0.0), dict(eps_a=-1.0), dict(delta=0.0), dict(T=-1), dict(gamma=0.0), dict(gamma=1.0),
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            _config(**kwargs)
