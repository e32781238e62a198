import math

import numpy as np
import pytest
from scipy import stats

from frackpp.diagnostics import clock_cdf, kernel_cdf, ks_summary, stable_cdf
from frackpp.exceptions import ParameterError
from frackpp.kernels import FracParams, KernelId, build_kernel_table
from frackpp.mittag_leffler import ml_eval
from frackpp.samplers import (
    RngStream,
    clock_table,
    sample_branch_time,
    sample_branch_times,
    sample_kernel_displacement,
    sample_kernel_displacements,
    sample_stable_feller,
    tilted_sampler,
)


def survival_fraction(alpha, h, n, seed):
    times = sample_branch_times(alpha, RngStream(seed), n)
    return float(np.mean(times >= h))


class TestStreams:
    def test_same_pair_same_draws(self):
        a = RngStream(7, 3).generator().random(5)
        b = RngStream(7, 3).generator().random(5)
        assert np.array_equal(a, b)

    def test_distinct_indices_differ(self):
        assert not np.array_equal(RngStream(7, 3).generator().random(5), RngStream(7, 4).generator().random(5))

    @pytest.mark.parametrize("seed,index", [(-1, 0), (0, 2**64), (1.5, 0)])
    def test_range(self, seed, index):
        with pytest.raises(ParameterError):
            RngStream(seed, index)

    def test_kernel_draws_reproducible(self):
        kid = KernelId(FracParams(0.6, 1.3, 0.2), 0.6, 0.9)
        a = sample_kernel_displacement(kid, RngStream(11, 2), 1000)
        b = sample_kernel_displacement(kid, RngStream(11, 2), 1000)
        assert np.array_equal(a, b)


class TestBranchClock:
    def test_exponential_half_life(self):
        n = 100_000
        frac = survival_fraction(1.0, math.log(2.0), n, 1)
        assert abs(frac - 0.5) <= 3 * math.sqrt(0.25 / n)

    def test_half_order_survival(self):
        n = 100_000
        p = 0.4275835761
        frac = survival_fraction(0.5, 1.0, n, 2)
        assert abs(frac - p) <= 3 * math.sqrt(p * (1 - p) / n)

    def test_short_horizon_survives(self):
        stream = RngStream(3).generator()
        outcomes = [sample_branch_time(0.7, 1e-6, stream) for _ in range(4000)]
        assert np.mean([o.survived for o in outcomes]) >= 0.999

    def test_outcome_inside_horizon(self):
        gen = RngStream(4).generator()
        for _ in range(500):
            out = sample_branch_time(0.4, 2.0, gen)
            assert out.survived or 0.0 < out.tau < 2.0

    def test_bad_horizon(self):
        with pytest.raises(ParameterError):
            sample_branch_time(0.5, 0.0, RngStream(0))
        with pytest.raises(ParameterError):
            sample_branch_times(1.5, RngStream(0), 3)

    @pytest.mark.parametrize("alpha", [0.3, 0.6, 0.9])
    def test_table_accuracy(self, alpha):
        assert clock_table(alpha).max_error <= 1e-10

    def test_exponential_ks(self):
        samples = sample_branch_times(1.0, RngStream(5), 100_000)
        assert stats.kstest(samples, "expon").pvalue >= 0.01

    def test_fractional_ks(self):
        samples = sample_branch_times(0.6, RngStream(6), 100_000)
        assert ks_summary(samples, clock_cdf(0.6))["passed"]


class TestStable:
    def test_gaussian_variance(self):
        lam = 0.8
        x = sample_stable_feller(2.0, 0.0, lam, RngStream(8), 1_000_000)
        assert abs(x.mean()) < 5 * math.sqrt(2 * lam / x.size)
        assert x.var() == pytest.approx(2 * lam, rel=0.01)

    def test_cauchy_quartiles(self):
        n = 200_000
        x = sample_stable_feller(1.0, 0.0, 1.0, RngStream(9), n)
        q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75])
        # quantile standard error sqrt(p(1-p)/n)/f(q), f = 1/(2 pi) at the quartiles
        se_quartile = math.sqrt(0.1875 / n) * 2 * math.pi
        assert abs(med) < 4 * math.sqrt(0.25 / n) * math.pi
        assert abs((q3 - q1) - 2.0) < 4 * math.sqrt(2) * se_quartile

    def test_skewed_against_fft(self):
        x = sample_stable_feller(1.5, 0.3, 0.7, RngStream(10), 100_000)
        assert ks_summary(x, stable_cdf(1.5, 0.3, 0.7))["passed"]

    def test_skewed_cauchy_against_fft(self):
        x = sample_stable_feller(1.0, 0.5, 1.3, RngStream(12), 100_000)
        assert ks_summary(x, stable_cdf(1.0, 0.5, 1.3))["passed"]

    def test_small_index_against_scipy(self):
        x = sample_stable_feller(0.7, -0.4, 1.0, RngStream(13), 100_000)
        assert ks_summary(x, stable_cdf(0.7, -0.4, 1.0))["passed"]

    def test_scaling(self):
        # lam enters as lam**(1/beta) on identical uniforms
        a = sample_stable_feller(1.4, 0.2, 1.0, RngStream(14), 50)
        b = sample_stable_feller(1.4, 0.2, 3.0, RngStream(14), 50)
        assert np.allclose(b, 3.0 ** (1 / 1.4) * a, rtol=1e-13)

    def test_negative_intensity(self):
        with pytest.raises(ParameterError):
            sample_stable_feller(1.5, 0.0, -1.0, RngStream(0), 3)


class TestKernelDisplacement:
    def test_gaussian_atom(self):
        kid = KernelId(FracParams(1.0, 2.0, 0.0), 1.0, 0.6)
        x = sample_kernel_displacement(kid, RngStream(15), 1_000_000)
        assert x.var() == pytest.approx(0.6, rel=0.01)

    def test_against_table(self):
        kid = KernelId(FracParams(0.7, 1.5, 0.0), 0.7, 0.8)
        x = sample_kernel_displacement(kid, RngStream(16), 100_000)
        assert ks_summary(x, kernel_cdf(kid))["passed"]

    def test_two_sample_against_table_draws(self):
        kid = KernelId(FracParams(0.5, 1.2, -0.4), 1.0, 1.0)
        sub = sample_kernel_displacement(kid, RngStream(17), 100_000)
        table = build_kernel_table(kid, n_points=2**18, tail_target=1e-2)
        inv = table.inverse_cdf(RngStream(18).generator().random(100_000))
        assert stats.ks_2samp(sub, inv).pvalue >= 0.01

    def test_near_delta(self):
        kid = KernelId(FracParams(0.6, 1.2, 0.0), 1.0, 1e-8)
        x = sample_kernel_displacement(kid, RngStream(19), 10_000)
        assert np.mean(np.abs(x) < 1e-2) >= 0.99

    def test_zero_duration_is_identity(self):
        out = sample_kernel_displacements(FracParams(0.6, 1.2, 0.0), 1.0, [0.0, 0.0], RngStream(20))
        assert np.array_equal(out, [0.0, 0.0])

    def test_bad_rho(self):
        with pytest.raises(ParameterError):
            sample_kernel_displacements(FracParams(0.6, 1.2, 0.0), 0.5, [1.0], RngStream(0))

    @pytest.mark.parametrize("alpha,rho", [(0.5, 1.0), (0.5, 0.5), (0.8, 0.8)])
    @pytest.mark.parametrize("t", [0.25, 1.0, 4.0])
    def test_tilted_normalizer(self, alpha, rho, t):
        s = t**alpha
        assert tilted_sampler(alpha, rho).normalizer(s) == pytest.approx(ml_eval(alpha, rho, -s).real, abs=1e-8)
