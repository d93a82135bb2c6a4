import math

import numpy as np
import pytest
from scipy import integrate, stats

from pdldp.errors import DomainError
from pdldp.perman import log_c_const
from pdldp.sampling import (
    RandomStream,
    StableSpec,
    beta_sample,
    gamma_sample,
    stable_density,
    stable_sample,
    tilted_stable_increment,
    worker_stream,
)

N = 100_000


class TestRandomStream:
    def test_same_key_same_sequence(self):
        a = RandomStream(42, 3).generator.random(10)
        b = RandomStream(42, 3).generator.random(10)
        assert np.array_equal(a, b)

    def test_distinct_ids_differ(self):
        a = RandomStream(42, 0).generator.random(10)
        b = RandomStream(42, 1).generator.random(10)
        assert not np.array_equal(a, b)

    def test_substreams_are_disjoint_and_reproducible(self):
        s = RandomStream(5, 2)
        a = s.substream(1).generator.random(8)
        assert np.array_equal(a, RandomStream(5, 2, 1).generator.random(8))
        assert not np.array_equal(a, s.substream(0).generator.random(8))

    def test_worker_streams_depend_on_tag_and_worker(self):
        draws = {
            (w, t): worker_stream(9, w, t).generator.random()
            for w in range(3) for t in range(3)
        }
        assert len(set(draws.values())) == 9

    def test_large_seed_accepted(self):
        RandomStream(2**64 - 1).generator.random()


class TestBetaGamma:
    def test_uniform_mean(self, check_mean):
        assert check_mean(beta_sample(1, 1, RandomStream(1), N), 0.5)

    def test_first_stick_mean(self, check_mean):
        assert check_mean(beta_sample(0.5, 2.5, RandomStream(2), N), 1 / 6)

    def test_beta_rejects_bad_parameters(self):
        with pytest.raises(DomainError):
            beta_sample(0, 1, RandomStream(0))

    def test_exponential_mean(self, check_mean):
        assert check_mean(gamma_sample(1.0, RandomStream(3), N), 1.0)

    def test_gamma_mean_and_variance(self, check_mean):
        x = gamma_sample(4.0, RandomStream(4), N)
        assert check_mean(x, 4.0)
        # squared deviations have mean = variance
        assert check_mean((x - 4.0) ** 2, 4.0)

    def test_gamma_rejects_bad_shape(self):
        with pytest.raises(DomainError):
            gamma_sample(-1.0, RandomStream(0))


class TestStableSpec:
    def test_domain(self):
        for bad in (0.0, 1.0, -0.2):
            with pytest.raises(DomainError):
                StableSpec(bad)
        with pytest.raises(DomainError):
            StableSpec(0.5, C=0.0)

    def test_laplace_scale(self):
        assert StableSpec(0.5).laplace_scale == pytest.approx(math.sqrt(math.pi))
        assert StableSpec(0.5, tempered=True).laplace_scale == pytest.approx(2 * math.sqrt(math.pi))

    def test_laplace_exponent_matches_levy_integral(self):
        spec = StableSpec(0.4, C=1.3)
        s = 2.0
        integral = integrate.quad(lambda x: (1 - math.exp(-s * x)) * spec.levy_density(x), 0, np.inf, limit=200)[0]
        assert spec.laplace_exponent(s) == pytest.approx(integral, rel=1e-7)


class TestUntemperedStable:
    @pytest.mark.parametrize("s", [0.5, 1.0, 3.0])
    def test_laplace_transform(self, s, check_mean):
        spec = StableSpec(0.6, C=0.8)
        x = stable_sample(spec, RandomStream(11), size=N)
        assert check_mean(np.exp(-s * x), math.exp(-spec.laplace_exponent(s)))

    def test_duration_scaling(self, check_mean):
        spec = StableSpec(0.3)
        x = stable_sample(spec, RandomStream(12), duration=2.5, size=N)
        assert check_mean(np.exp(-x), math.exp(-spec.laplace_exponent(1.0, 2.5)))


class TestStableDensity:
    def test_half_stable_closed_form(self):
        spec = StableSpec(0.5, C=1 / math.gamma(0.5))
        expected = math.exp(-0.25) / (2 * math.sqrt(math.pi))
        assert stable_density(spec, 1.0) == pytest.approx(expected, abs=1e-9)

    def test_half_stable_closed_form_on_grid(self):
        spec = StableSpec(0.5, C=1 / math.gamma(0.5))
        x = np.array([0.05, 0.3, 2.0, 40.0, 1e4])
        expected = x**-1.5 * np.exp(-1 / (4 * x)) / (2 * math.sqrt(math.pi))
        assert np.allclose(stable_density(spec, x), expected, atol=1e-9, rtol=1e-8)

    @pytest.mark.parametrize("beta", [0.0, 0.5, 1.0, 2.0])
    def test_negative_moments(self, beta):
        spec = StableSpec(0.5)
        g = lambda t: t**-beta * stable_density(spec, t)
        pieces = [(0, 0.1), (0.1, 1), (1, 10), (10, np.inf)]
        total = sum(integrate.quad(g, lo, hi, limit=400, epsabs=0, epsrel=1e-10)[0] for lo, hi in pieces)
        expected = 1.0 if beta == 0 else math.exp(-log_c_const(0.5, beta))
        assert total == pytest.approx(expected, rel=1e-6)

    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            stable_density(StableSpec(0.5), 0.0)


class TestTiltedStable:
    spec = StableSpec(0.5, tempered=True)

    def test_laplace_at_one(self, check_mean):
        x = tilted_stable_increment(self.spec, 1.0, RandomStream(21), size=N)
        assert check_mean(np.exp(-x), math.exp(2 * math.sqrt(math.pi) * (1 - math.sqrt(2))))

    def test_mgf_at_half(self, check_mean):
        x = tilted_stable_increment(self.spec, 1.0, RandomStream(22), size=N)
        assert check_mean(np.exp(0.5 * x), math.exp(2 * math.sqrt(math.pi) * (1 - math.sqrt(0.5))))

    @pytest.mark.parametrize("duration", [0.01, 7.0])
    def test_mean_matches_levy_measure(self, duration, check_mean):
        # E sigma(t) = t * Gamma(1 - alpha)
        x = tilted_stable_increment(self.spec, duration, RandomStream(23), size=N)
        assert check_mean(x, duration * math.gamma(0.5))

    def test_additivity_in_duration(self):
        a = tilted_stable_increment(self.spec, 0.7, RandomStream(24), size=10_000)
        b = tilted_stable_increment(self.spec, 1.3, RandomStream(25), size=10_000)
        c = tilted_stable_increment(self.spec, 2.0, RandomStream(26), size=10_000)
        assert stats.ks_2samp(a + b, c).pvalue > 1e-3

    def test_requires_tempered_spec(self):
        with pytest.raises(DomainError):
            tilted_stable_increment(StableSpec(0.5), 1.0, RandomStream(0))

    def test_rejects_zero_duration(self):
        with pytest.raises(DomainError):
            tilted_stable_increment(self.spec, 0.0, RandomStream(0))


class TestStreamIndependence:
    def test_cross_correlation(self):
        n = 100_000
        a = RandomStream(3, 0).generator.random(n)
        b = RandomStream(3, 1).generator.random(n)
        c = RandomStream(3, 0, block=1).generator.random(n)
        for x, y in ((a, b), (a, c), (b, c)):
            for lag in (0, 1, 7):
                r = np.corrcoef(x[: n - lag], y[lag:])[0, 1]
                assert abs(r) < 4 / math.sqrt(n)
