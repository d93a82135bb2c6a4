import math

import numpy as np
import pytest
from scipy import special, stats

from pdldp.errors import DomainError, InsufficientDataError
from pdldp.harness import (
    EventSpec,
    SlopeFit,
    SweepConfig,
    chebyshev_test_functions,
    estimate_event_prob,
    fit_rate_slope,
    run_sweep,
    theoretical_event_rate,
    verdict,
)
from pdldp.measures import MeasureSpec, PartitionSpec
from pdldp.rates import rate_partition


class TestEventSpec:
    @pytest.mark.parametrize("text", ["p1_ge:0.1", "gem_x1_ge:0.5", "first_k_sum_ge:2:0.7", "weak_ball:0.05"])
    def test_round_trip(self, text):
        assert EventSpec.parse(text).describe() == text

    def test_partition_event_needs_cells(self):
        with pytest.raises(DomainError):
            EventSpec.parse("partition_cell_ge:0:0.5")
        cells = PartitionSpec.from_probs([0.5, 0.5])
        assert EventSpec.parse("partition_cell_ge:1:0.7", cells=cells).cell_index == 1

    @pytest.mark.parametrize("text", ["p1_ge:1.5", "p1_ge:x", "nope:0.1", "weak_ball:0", "first_k_sum_ge:0:0.5"])
    def test_rejects(self, text):
        with pytest.raises(DomainError):
            EventSpec.parse(text)


class TestEstimate:
    def test_certain_event(self):
        e = estimate_event_prob(EventSpec("p1_ge", 0.0), 2.0, 0.5, 1000, seed=1)
        assert e.probability == 1.0 and e.stderr == 0.0

    def test_first_stick_tail(self):
        n = 100_000
        e = estimate_event_prob(EventSpec("gem_x1_ge", 0.5), 2.0, 0.5, n, seed=2)
        exact = special.betainc(2.5, 0.5, 0.5)  # P(Beta(0.5, 2.5) >= 0.5)
        assert abs(e.probability - exact) < 4 * math.sqrt(exact * (1 - exact) / n)

    def test_top_two_sum_of_one(self):
        e = estimate_event_prob(EventSpec("first_k_sum_ge", 1.0, k=2), 2.0, 0.5, 1000, seed=3)
        assert e.count == 0

    def test_one_parameter_cell_tail(self):
        cells = PartitionSpec.from_probs([0.3, 0.7])
        n = 50_000
        e = estimate_event_prob(EventSpec("partition_cell_ge", 0.5, cells=cells), 4.0, 0.0, n, seed=4)
        exact = stats.beta(1.2, 2.8).sf(0.5)
        assert abs(e.probability - exact) < 4 * math.sqrt(exact * (1 - exact) / n)

    def test_two_parameter_cell_mean(self):
        # P(Xi(A) >= 0) = 1 and the subordinator route is used for alpha > 0
        cells = PartitionSpec.from_probs([0.3, 0.7])
        e = estimate_event_prob(EventSpec("partition_cell_ge", 0.0, cells=cells), 4.0, 0.5, 1000, seed=5)
        assert e.probability == 1.0

    def test_weak_ball_monotone_in_radius(self):
        probs = [estimate_event_prob(EventSpec("weak_ball", radius=r), 5.0, 0.3, 2000, seed=6).probability
                 for r in (0.02, 0.1, 0.5, 3.0)]
        assert probs == sorted(probs)
        assert probs[-1] == 1.0

    def test_weak_ball_centre_far_from_base(self):
        far = EventSpec("weak_ball", radius=0.05, center=MeasureSpec.parse("cells:0.1,1;0.9,0.1"))
        near = EventSpec("weak_ball", radius=0.05)
        p_far = estimate_event_prob(far, 20.0, 0.0, 2000, seed=7).probability
        p_near = estimate_event_prob(near, 20.0, 0.0, 2000, seed=7).probability
        assert p_far < p_near

    def test_minimum_samples(self):
        with pytest.raises(DomainError):
            estimate_event_prob(EventSpec("p1_ge", 0.1), 2.0, 0.5, 999, seed=0)

    def test_workers_deterministic(self):
        ev = EventSpec("p1_ge", 0.3)
        a = estimate_event_prob(ev, 5.0, 0.5, 4000, seed=8, workers=2)
        b = estimate_event_prob(ev, 5.0, 0.5, 4000, seed=8, workers=2)
        assert a == b

    def test_worker_split_changes_streams_not_law(self):
        ev = EventSpec("p1_ge", 0.3)
        a = estimate_event_prob(ev, 5.0, 0.5, 20_000, seed=9, workers=1)
        b = estimate_event_prob(ev, 5.0, 0.5, 20_000, seed=9, workers=3)
        assert abs(a.probability - b.probability) < 4 * math.hypot(a.stderr, b.stderr)


class TestChebyshev:
    def test_sup_norm_one(self):
        t = np.linspace(0, 1, 2001)
        for g in chebyshev_test_functions():
            assert np.max(np.abs(g(t))) == pytest.approx(1.0)


class TestFitRateSlope:
    def test_exact_line(self):
        t = [10, 20, 30, 40]
        fit = fit_rate_slope(t, [-0.1 * v for v in t], [0, 0, 0, 0])
        assert fit.rate == pytest.approx(0.1)
        assert fit.ci_high - fit.ci_low == pytest.approx(0.0, abs=1e-12)

    def test_prefactor_absorbed(self):
        t = np.array([10.0, 20, 30, 40])
        fit = fit_rate_slope(t, 2 - 0.1 * t, np.full(4, 0.01))
        assert fit.rate == pytest.approx(0.1)
        assert fit.intercept == pytest.approx(2.0)

    def test_noisy_ci_covers(self):
        rng = np.random.default_rng(0)
        t = np.array([20.0, 40, 60, 80, 100])
        se = np.full(5, 0.05)
        fit = fit_rate_slope(t, 1 - 0.1 * t + rng.normal(0, 0.05, 5), se)
        assert fit.ci_low <= 0.1 <= fit.ci_high

    def test_weights_favour_precise_points(self):
        t = [10, 20, 30, 40]
        y = [-1.0, -2.0, -3.0, -10.0]
        loose = fit_rate_slope(t, y, [0.01, 0.01, 0.01, 100.0])
        assert loose.rate == pytest.approx(0.1, rel=1e-3)

    def test_drops_empty_points(self):
        with pytest.raises(InsufficientDataError):
            fit_rate_slope([1, 2, 3], [-1.0, -2.0, -math.inf], [0.1, 0.1, math.inf])

    def test_too_few(self):
        with pytest.raises(InsufficientDataError):
            fit_rate_slope([20], [-2.0], [0.1])


class TestTheoreticalRate:
    def test_values(self):
        assert theoretical_event_rate(EventSpec("p1_ge", 0.1), 0.5) == pytest.approx(math.log(1 / 0.9))
        assert theoretical_event_rate(EventSpec("first_k_sum_ge", 0.1, k=3), 0.0) == pytest.approx(math.log(1 / 0.9))
        assert theoretical_event_rate(EventSpec("gem_x1_ge", 0.5), 0.5) == pytest.approx(math.log(2))
        assert theoretical_event_rate(EventSpec("weak_ball", radius=0.1), 0.5) is None

    @pytest.mark.parametrize("alpha", [0.0, 0.5])
    def test_partition_against_grid(self, alpha):
        cells = PartitionSpec.from_probs([0.2, 0.3, 0.5])
        ev = EventSpec("partition_cell_ge", 0.45, cells=cells, cell_index=0)
        # brute force over the 2-simplex restricted to x_0 >= 0.45
        best = math.inf
        for x0 in np.linspace(0.45, 0.99, 109):
            for f in np.linspace(0.001, 0.999, 999):
                x = np.array([x0, (1 - x0) * f, (1 - x0) * (1 - f)])
                best = min(best, rate_partition(x, alpha, cells))
        assert theoretical_event_rate(ev, alpha) == pytest.approx(best, rel=1e-4)

    def test_partition_below_mean_is_free(self):
        cells = PartitionSpec.from_probs([0.5, 0.5])
        assert theoretical_event_rate(EventSpec("partition_cell_ge", 0.3, cells=cells), 0.5) == 0.0


class TestSweep:
    def test_single_theta(self):
        with pytest.raises(InsufficientDataError):
            run_sweep(SweepConfig(EventSpec("p1_ge", 0.1), 0.5, (20,), 1000))

    def test_deterministic(self):
        cfg = SweepConfig(EventSpec("gem_x1_ge", 0.3), 0.5, (5, 10, 15), 5000, seed=3, workers=2)
        assert run_sweep(cfg) == run_sweep(cfg)

    def test_first_stick_slope(self):
        res = run_sweep(SweepConfig(EventSpec("gem_x1_ge", 0.2), 0.3, (10, 20, 30, 40), 100_000, seed=4))
        assert res.verdict == "PASS"
        assert res.theoretical_rate == pytest.approx(math.log(1 / 0.8))

    def test_unavailable_rate(self):
        res = run_sweep(SweepConfig(EventSpec("weak_ball", radius=0.5), 0.0, (2, 4, 6), 1000, seed=5))
        assert res.verdict == "UNAVAILABLE"

    def test_verdict_rule(self):
        fit = SlopeFit(0.1, 0.09, 0.11, 0.0, 0.005, 4)
        assert verdict(fit, 0.12, 1.25) == "PASS"
        assert verdict(fit, 0.14, 1.25) == "FAIL"
        assert verdict(fit, 0.12, 1.0) == "FAIL"

    def test_config_validation(self):
        with pytest.raises(DomainError):
            SweepConfig(EventSpec("p1_ge", 0.1), 0.5, (), 1000)
        with pytest.raises(DomainError):
            SweepConfig(EventSpec("p1_ge", 0.1), 0.5, (1, 2, 3), 1000, tolerance_factor=0.9)
