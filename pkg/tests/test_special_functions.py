import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats

from rpmsim.errors import DomainError
from rpmsim.rng import RngStream
from rpmsim.special_functions import (
    IGParams,
    beta_cdf,
    beta_sample,
    gamma_arrivals,
    gamma_cdf,
    gamma_log_quantile,
    gamma_quantile,
    half_stable_sample,
    ig_cdf,
    ig_log_quantile,
    ig_pdf,
    ig_quantile,
    ig_sample,
    upper_incomplete_gamma,
    xi,
)

# Frozen oracle values, computed with mpmath at 30 digits:
#   Gamma(-2, x): quadrature of t**-3 exp(-t) over [x, inf)
#   quantiles: 200-step bisection on the quadrature CDF
GAMMA_M2 = {
    1.0: 0.10969196719776013684,
    2.0: 0.0075333449494539732969,
    10.0: 3.5487625530843819600e-08,
    50.0: 1.4571637614921873670e-27,
}
XI = {1.0: 3.3537500563574017369, 10.0: 12.793172009501121054, 50.0: 52.945314697884321243}
GAMMA_Q_002_09 = 0.0029496744212501763446
IG_MEDIAN_1_1 = 0.67584130569523911919
IG_Q_002_099 = 0.41237142282525856539
IG_Q_2_01 = 0.71397023370613767574
BETA_CDF_09_12_05 = 0.59979257136562353096


class TestIncompleteGamma:
    @pytest.mark.parametrize("x", sorted(GAMMA_M2))
    def test_matches_quadrature_oracle(self, x):
        assert upper_incomplete_gamma(-2, x) == pytest.approx(GAMMA_M2[x], rel=1e-10)

    def test_against_live_quadrature(self):
        value, _ = integrate.quad(lambda t: t ** -3 * math.exp(-t), 3.0, np.inf, epsabs=0, epsrel=1e-13)
        assert upper_incomplete_gamma(-2, 3.0) == pytest.approx(value, rel=1e-10)

    def test_large_argument_asymptotics(self):
        x = 50.0
        # Gamma(a, x) ~ x**(a - 1) exp(-x) (1 + (a - 1) / x + ...)
        scaled = upper_incomplete_gamma(-2, x) * x ** 3 * math.exp(x)
        assert scaled == pytest.approx(1.0, rel=0.1)
        assert scaled * (x + 3) / x == pytest.approx(1.0, rel=0.01)

    def test_monotone_positive(self):
        assert upper_incomplete_gamma(-2, 1.0) > upper_incomplete_gamma(-2, 2.0) > 0

    def test_positive_shape_matches_scipy(self):
        assert upper_incomplete_gamma(2.5, 1.3) == pytest.approx(
            special.gammaincc(2.5, 1.3) * special.gamma(2.5), rel=1e-12)

    @pytest.mark.parametrize("x", [0.0, -1.0, math.inf, math.nan])
    def test_rejects_bad_x(self, x):
        with pytest.raises(DomainError):
            upper_incomplete_gamma(-2, x)

    def test_rejects_negative_fractional_shape(self):
        with pytest.raises(DomainError):
            upper_incomplete_gamma(-1.5, 1.0)


class TestXi:
    @pytest.mark.parametrize("theta", sorted(XI))
    def test_matches_oracle(self, theta):
        assert xi(theta) == pytest.approx(XI[theta], rel=1e-8)

    def test_matches_definition(self):
        theta = 1.0
        direct = 1.0 / (theta ** 2 * math.exp(theta) * GAMMA_M2[theta])
        assert xi(theta) == pytest.approx(direct, rel=1e-10)

    def test_grows_like_theta(self):
        assert 0.99 <= xi(1000.0) / 1000.0 <= 1.01

    @given(st.floats(1e-6, 1e6))
    def test_positive(self, theta):
        assert xi(theta) > 0

    @pytest.mark.parametrize("theta", [0.0, -2.0])
    def test_rejects_nonpositive(self, theta):
        with pytest.raises(DomainError):
            xi(theta)


class TestGammaQuantile:
    def test_exponential_case(self):
        assert gamma_quantile(1.0, 0.5) == pytest.approx(math.log(2.0), rel=1e-13)

    def test_small_shape_oracle(self):
        assert gamma_quantile(0.02, 0.9) == pytest.approx(GAMMA_Q_002_09, rel=1e-10)

    def test_lower_boundary(self):
        assert 0 < gamma_quantile(2.0, 1e-12) < 1e-5

    @pytest.mark.parametrize("shape", [1e-4, 0.01, 0.1, 1.0, 10.0, 300.0])
    @pytest.mark.parametrize("p", [1e-10, 1e-3, 0.2, 0.5, 0.8, 1 - 1e-6])
    def test_probability_space_accuracy(self, shape, p):
        t = gamma_log_quantile(shape, lower=p)
        if math.exp(t) == 0.0:
            # below double range P(a, x) = x**a / Gamma(a + 1) to first order
            assert shape * t - special.gammaln(shape + 1) == pytest.approx(math.log(p), rel=1e-10)
        elif p <= 0.5:
            got = special.gammainc(shape, math.exp(t))
            assert got == pytest.approx(p, rel=1e-10)
        else:
            got = special.gammaincc(shape, math.exp(t))
            assert got == pytest.approx(1 - p, rel=1e-8)

    def test_log_quantile_below_double_range(self):
        # shape 0.01 at p = 1e-40 sits near exp(-9200)
        t = gamma_log_quantile(0.01, lower=1e-40)
        expected = (math.log(1e-40) + special.gammaln(1.01)) / 0.01
        assert t == pytest.approx(expected, rel=1e-6)

    def test_upper_tail_input(self):
        a = gamma_log_quantile(0.5, upper=1e-30)
        assert special.gammaincc(0.5, math.exp(a)) == pytest.approx(1e-30, rel=1e-9)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
    def test_rejects_bad_p(self, p):
        with pytest.raises(DomainError):
            gamma_quantile(1.0, p)

    def test_rejects_bad_shape(self):
        with pytest.raises(DomainError):
            gamma_quantile(0.0, 0.5)

    @settings(max_examples=60, deadline=None)
    @given(st.sampled_from([0.01, 0.1, 1.0, 10.0]), st.floats(0.01, 0.99))
    def test_round_trip(self, shape, q):
        x = special.gammaincinv(shape, q)
        assert gamma_quantile(shape, gamma_cdf(shape, x)) == pytest.approx(x, rel=1e-8)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(1e-3, 50.0), st.floats(1e-6, 1 - 1e-6), st.floats(1e-6, 1 - 1e-6))
    def test_monotone_in_p(self, shape, p1, p2):
        if p1 == p2:
            return
        lo, hi = sorted((p1, p2))
        assert gamma_log_quantile(shape, lower=lo) <= gamma_log_quantile(shape, lower=hi)


class TestInverseGaussian:
    def test_density_integrates_to_one(self):
        p = IGParams(0.7, 1.3)
        total, _ = integrate.quad(lambda x: float(ig_pdf(p, x)), 0, np.inf)
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_cdf_matches_scipy_invgauss(self):
        p = IGParams(1.5, 0.8)
        x = np.linspace(0.1, 10, 25)
        ref = stats.invgauss.cdf(x, mu=p.mean / p.shape, scale=p.shape)
        np.testing.assert_allclose(ig_cdf(p, x), ref, rtol=1e-10)

    def test_median_oracle(self):
        assert ig_quantile(IGParams(1.0, 1.0), 0.5) == pytest.approx(IG_MEDIAN_1_1, rel=1e-10)

    def test_small_delta_oracle(self):
        assert ig_quantile(IGParams(0.02, 1.0), 0.99) == pytest.approx(IG_Q_002_099, rel=1e-10)

    def test_lower_tail_oracle(self):
        assert ig_quantile(IGParams(2.0, 1.0), 0.1) == pytest.approx(IG_Q_2_01, rel=1e-10)

    def test_extreme_tails(self):
        p = IGParams(0.02, 1.0)
        t = ig_log_quantile(p, upper=np.array([1e-300, 1e-12]))
        assert np.all(np.isfinite(t)) and t[0] > t[1]
        t = ig_log_quantile(p, lower=np.array([1e-300, 1e-12]))
        assert np.all(np.isfinite(t)) and t[0] < t[1]

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.01, 20.0), st.floats(0.01, 0.99))
    def test_round_trip(self, delta, p):
        params = IGParams(delta, 1.0)
        x = ig_quantile(params, p)
        assert ig_quantile(params, ig_cdf(params, x)) == pytest.approx(x, rel=1e-6)
        assert ig_cdf(params, x) == pytest.approx(p, rel=1e-10)

    def test_monotone(self):
        params = IGParams(0.3, 1.0)
        q = ig_quantile(params, np.linspace(0.01, 0.99, 99))
        assert np.all(np.diff(q) > 0)

    @pytest.mark.parametrize("p", [0.0, 1.0])
    def test_rejects_bad_p(self, p):
        with pytest.raises(DomainError):
            ig_quantile(IGParams(1.0), p)

    @pytest.mark.parametrize("delta,rate", [(0.0, 1.0), (1.0, -1.0), (math.inf, 1.0)])
    def test_rejects_bad_params(self, delta, rate):
        with pytest.raises(DomainError):
            IGParams(delta, rate)


class TestSamplers:
    def test_ig_mean(self):
        x = ig_sample(IGParams(1.0, 1.0), RngStream(11), size=100_000)
        se = x.std() / math.sqrt(len(x))
        assert abs(x.mean() - 1.0) < 3 * se

    def test_ig_convolution(self):
        two = ig_sample(IGParams(2.0, 1.0), RngStream(12), size=20_000)
        ones = ig_sample(IGParams(1.0, 1.0), RngStream(13), size=(20_000, 2)).sum(axis=1)
        res = stats.ks_2samp(two, ones)
        crit = 1.63 * math.sqrt(2 / 20_000)
        assert res.statistic < crit

    def test_ig_matches_cdf(self):
        p = IGParams(0.5, 2.0)
        x = ig_sample(p, RngStream(14), size=50_000)
        assert stats.kstest(x, lambda v: ig_cdf(p, v)).pvalue > 0.001

    def test_ig_huge_delta_is_finite(self):
        x = ig_sample(IGParams(1e200, 1.0), RngStream(1), size=100)
        assert np.all(np.isfinite(x)) and np.all(x > 0)

    def test_ig_deterministic(self):
        a = ig_sample(IGParams(1.0), RngStream(5, 2), size=10)
        b = ig_sample(IGParams(1.0), RngStream(5, 2), size=10)
        np.testing.assert_array_equal(a, b)

    def test_half_stable_tail(self):
        x = half_stable_sample(RngStream(21), size=100_000)
        # P(1 / W**2 < 1) = P(|W| > 1) = 2 (1 - Phi(1))
        target = 2 * (1 - special.ndtr(1.0))
        frac = np.mean(x < 1)
        assert abs(frac - target) < 3 * math.sqrt(target * (1 - target) / len(x))
        assert np.all(x > 0)

    def test_half_stable_median(self):
        x = half_stable_sample(RngStream(22), size=100_000)
        q = special.ndtri(0.75)
        assert np.median(x) == pytest.approx(1 / q ** 2, rel=0.03)

    @pytest.mark.parametrize("a,b", [(1.0, 1.0), (0.9, 1.1)])
    def test_beta_mean(self, a, b):
        x = beta_sample(a, b, RngStream(31), size=100_000)
        se = x.std() / math.sqrt(len(x))
        assert abs(x.mean() - a / (a + b)) < 3 * se

    def test_beta_open_interval(self):
        x = beta_sample(0.01, 0.01, RngStream(32), size=10_000)
        assert np.all((x > 0) & (x < 1))

    def test_beta_rejects(self):
        with pytest.raises(DomainError):
            beta_sample(0.0, 1.0, RngStream(1))

    def test_gamma_arrivals(self):
        g = gamma_arrivals(100_000, RngStream(41))
        assert np.all(np.diff(g) > 0) and g[0] > 0
        assert abs(g[-1] / len(g) - 1) < 3 / math.sqrt(len(g))
        np.testing.assert_array_equal(g[:10], gamma_arrivals(10, RngStream(41)))

    def test_gamma_arrivals_rejects(self):
        with pytest.raises(DomainError):
            gamma_arrivals(0, RngStream(1))


class TestBetaCdf:
    def test_uniform(self):
        assert beta_cdf(1, 1, 0.3) == pytest.approx(0.3)

    def test_oracle(self):
        assert beta_cdf(0.9, 1.2, 0.5) == pytest.approx(BETA_CDF_09_12_05, rel=1e-10)

    @given(st.floats(0.01, 50), st.floats(0.01, 50))
    def test_endpoints(self, a, b):
        assert beta_cdf(a, b, 1.0) == 1.0
        assert beta_cdf(a, b, 1.5) == 1.0
        assert beta_cdf(a, b, -0.5) == 0.0


class TestRngStream:
    def test_rejects_bad_seed(self):
        with pytest.raises(DomainError):
            RngStream(-1)
        with pytest.raises(DomainError):
            RngStream(2 ** 64)

    def test_streams_differ(self):
        a = RngStream(3, 0).generator().random(5)
        b = RngStream(3, 1).generator().random(5)
        assert not np.array_equal(a, b)

    def test_distinct_streams_uncorrelated(self):
        a = RngStream(3, 0).generator().standard_normal(50_000)
        b = RngStream(3, 1).generator().standard_normal(50_000)
        assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(50_000)
