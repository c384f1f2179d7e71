import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from momimpute.randcore import RngStream, derive_stream, normal_quantile, sample, t_quantile


def mp_t_cdf(x, df):
    """Student-t CDF via the regularized incomplete beta function in mpmath."""
    mpmath.mp.dps = 40
    x = mpmath.mpf(x)
    df = mpmath.mpf(df)
    tail = mpmath.betainc(df / 2, mpmath.mpf(1) / 2, 0, df / (df + x * x), regularized=True) / 2
    return float(1 - tail if x > 0 else tail)


def mp_normal_quantile(p):
    mpmath.mp.dps = 40
    return float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(p) - 1))


class TestStreams:
    def test_same_path_same_draws(self):
        root = RngStream(7)
        a = derive_stream(root, 3).normal(size=100)
        b = derive_stream(root, 3).normal(size=100)
        np.testing.assert_array_equal(a, b)

    def test_path_extension(self):
        assert derive_stream(RngStream(1), 7).path == (7,)
        assert derive_stream(RngStream(1, (2,)), 0).path == (2, 0)

    def test_children_uncorrelated(self):
        root = RngStream(2024)
        a = derive_stream(root, 0).normal(size=100_000)
        b = derive_stream(root, 1).normal(size=100_000)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.01

    def test_root_seed_changes_draws(self):
        assert RngStream(1).normal() != RngStream(2).normal()

    def test_negative_index_rejected(self):
        with pytest.raises(ValueError):
            derive_stream(RngStream(1), -1)

    def test_order_independence(self):
        root = RngStream(99)
        forward = [root.child(i).normal() for i in range(5)]
        backward = [root.child(i).normal() for i in reversed(range(5))][::-1]
        assert forward == backward


class TestSample:
    def test_degenerate_normal(self, stream):
        assert all(sample("normal", stream, 0.0, 0.0) == 0.0 for _ in range(20))

    def test_tuple_form(self, stream):
        assert sample(("bernoulli", 1.0), stream) == 1.0

    @pytest.mark.parametrize(
        "dist,params",
        [("normal", (0, -1)), ("exponential", (0,)), ("bernoulli", (1.5,)), ("chi_square", (0,))],
    )
    def test_parameter_errors(self, stream, dist, params):
        with pytest.raises(ValueError):
            sample(dist, stream, *params)

    def test_unknown_distribution(self, stream):
        with pytest.raises(ValueError):
            sample("poisson", stream, 1.0)

    def test_exponential_mean(self):
        draws = RngStream(11).exponential(1.0, 1_000_000)
        assert abs(draws.mean() - 1.0) < 0.005

    def test_chi_square_mean(self):
        draws = RngStream(12).chi_square(5, 1_000_000)
        assert abs(draws.mean() - 5.0) < 0.01

    # first two moments within 4 standard errors; the variance SE uses the
    # fourth central moment of each distribution
    @pytest.mark.parametrize(
        "name,draw,mean,var,mu4",
        [
            ("normal", lambda s, k: s.normal(1.5, 4.0, k), 1.5, 4.0, 3 * 16.0),
            ("exponential", lambda s, k: s.exponential(2.0, k), 0.5, 0.25, 9 / 16),
            ("bernoulli", lambda s, k: s.bernoulli(np.full(k, 0.3)), 0.3, 0.21,
             0.3 * 0.7 * (1 - 3 * 0.3 * 0.7)),
            ("chi_square", lambda s, k: s.chi_square(4, k), 4.0, 8.0, 12 * 4 * (4 + 4)),
        ],
    )
    def test_moments(self, name, draw, mean, var, mu4):
        k = 1_000_000
        x = np.asarray(draw(RngStream(31).child(len(name)), k), dtype=float)
        assert abs(x.mean() - mean) < 4 * math.sqrt(var / k)
        assert abs(x.var(ddof=1) - var) < 4 * math.sqrt((mu4 - var**2) / k)


class TestQuantiles:
    def test_normal_limit(self):
        assert t_quantile(math.inf, 0.975) == pytest.approx(mp_normal_quantile(0.975), abs=1e-12)
        assert t_quantile(math.inf, 0.975) == pytest.approx(1.959963984540054, abs=1e-12)

    def test_cauchy_quartile(self):
        assert t_quantile(1, 0.75) == pytest.approx(math.tan(math.pi / 4), abs=1e-10)

    @pytest.mark.parametrize("df", [0.5, 1, 2, 9, 29, 1e3, 1e8])
    def test_median(self, df):
        assert t_quantile(df, 0.5) == 0.0

    @pytest.mark.parametrize("df", [0.7, 1, 2.5, 4, 9, 29, 150, 1e5])
    @pytest.mark.parametrize("prob", [1e-6, 0.01, 0.05, 0.3, 0.8, 0.95, 0.975, 0.999999])
    def test_cdf_inverts(self, df, prob):
        x = t_quantile(df, prob)
        assert mp_t_cdf(x, df) == pytest.approx(prob, abs=1e-10)

    @pytest.mark.parametrize("df,prob", [(0, 0.5), (-1, 0.5), (5, 0.0), (5, 1.0), (5, 1.2)])
    def test_domain_errors(self, df, prob):
        with pytest.raises(ValueError):
            t_quantile(df, prob)

    def test_normal_quantile_domain(self):
        with pytest.raises(ValueError):
            normal_quantile(1.0)

    @given(st.floats(min_value=0.3, max_value=500), st.floats(0.01, 0.98), st.floats(0.001, 0.01))
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_prob(self, df, p, dp):
        assert t_quantile(df, p) < t_quantile(df, p + dp)

    def test_converges_to_normal_monotonically(self):
        z = normal_quantile(0.95)
        qs = [t_quantile(df, 0.95) for df in (1, 3, 10, 30, 100, 1e3, 1e5)]
        assert all(a > b for a, b in zip(qs, qs[1:]))
        assert all(q > z for q in qs)
        assert qs[-1] - z < 1e-4
