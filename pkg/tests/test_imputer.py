import math

import numpy as np
import pytest
from scipy import stats

from momimpute.datagen import IncompleteDataset, MissingnessMechanism, apply_missingness, \
    generate_sample, sim2_model
from momimpute.errors import InsufficientRespondents, RankDeficient
from momimpute.estimators import Estimand, mme_point
from momimpute.imputer import (
    ParameterDraw,
    PosteriorSpec,
    draw_parameters,
    fit_posterior,
    impute,
    make_replicate,
)
from momimpute.pooling import pool
from momimpute.randcore import RngStream


def dataset(x, y, delta=None):
    x = np.asarray(x, dtype=float)
    delta = np.ones(len(y), dtype=int) if delta is None else delta
    return IncompleteDataset.from_arrays(x, y, delta)


class TestFitPosterior:
    def test_simple_regression_closed_form(self):
        pts = [(1.0, 2.0), (2.0, 4.0), (3.0, 6.3)]
        post = fit_posterior(dataset([[x] for x, _ in pts], [y for _, y in pts]))
        slope = sum(x * y for x, y in pts) / sum(x * x for x, _ in pts)  # 28.9 / 14
        assert post.beta_hat[0] == pytest.approx(slope, rel=1e-13)
        rss = sum((yy - slope * xx) ** 2 for xx, yy in pts)
        assert post.sigma2_hat == pytest.approx(rss / 2, rel=1e-12)
        assert post.resid_df == 2
        assert post.xtx_inv[0, 0] == pytest.approx(1 / 14)

    def test_matches_normal_equations(self, small_dataset):
        post = fit_posterior(small_dataset)
        Xr, yr = small_dataset.x[:3], small_dataset.y[:3]
        xtx_inv = np.linalg.inv(Xr.T @ Xr)
        np.testing.assert_allclose(post.beta_hat, xtx_inv @ Xr.T @ yr, rtol=1e-12)
        np.testing.assert_allclose(post.xtx_inv, xtx_inv, rtol=1e-12)
        np.testing.assert_array_equal(post.xtx_inv, post.xtx_inv.T)

    def test_r_equals_p(self):
        with pytest.raises(InsufficientRespondents):
            fit_posterior(dataset([[1, 1.0], [1, 2.0]], [1.0, 2.0]))

    def test_exact_fit(self):
        with pytest.raises(InsufficientRespondents):
            fit_posterior(dataset([[1, 1.0], [1, 2.0], [1, 3.0]], [1.0, 2.0, 3.0]))

    def test_rank_deficient(self):
        with pytest.raises(RankDeficient):
            fit_posterior(dataset([[1, 2.0]] * 4, [1.0, 2.0, 0.5, 3.0]))

    def test_nonrespondents_ignored(self, small_dataset):
        post = fit_posterior(small_dataset)
        other = IncompleteDataset.from_arrays(
            small_dataset.x * np.array([1.0, 1.0]),
            np.r_[small_dataset.y_obs, 99.0, -99.0], small_dataset.delta)
        np.testing.assert_array_equal(post.beta_hat, fit_posterior(other).beta_hat)

    def test_large_sample_consistency(self):
        X, y = generate_sample(sim2_model(), 100_000, RngStream(20))
        post = fit_posterior(dataset(X, y))
        np.testing.assert_allclose(post.beta_hat, [3.0, -1.0], atol=0.02)


@pytest.fixture
def toy_post():
    xtx_inv = np.array([[0.5, -0.1], [-0.1, 0.2]])
    return PosteriorSpec(np.array([1.0, -2.0]), xtx_inv, sigma2_hat=1.5, resid_df=8)


class TestDrawParameters:
    def test_degenerate(self, toy_post):
        post = PosteriorSpec(toy_post.beta_hat, toy_post.xtx_inv, 1e-300, 8)
        d = draw_parameters(post, RngStream(1))
        np.testing.assert_allclose(d.beta_star, post.beta_hat, atol=1e-140)
        assert 0 < d.sigma2_star < 1e-290

    def test_beta_mean(self, toy_post):
        N = 100_000
        root = RngStream(21)
        draws = [draw_parameters(toy_post, root.child(i)) for i in range(N)]
        betas = np.array([d.beta_star for d in draws])
        mean_s2 = toy_post.sigma2_hat * 8 / 6
        se = np.sqrt(mean_s2 * np.diag(toy_post.xtx_inv) / N)
        assert np.all(np.abs(betas.mean(axis=0) - toy_post.beta_hat) < 4 * se)

    def test_sigma2_mean(self, toy_post):
        N = 100_000
        root = RngStream(22)
        s2 = np.array([draw_parameters(toy_post, root.child(i)).sigma2_star for i in range(N)])
        df = toy_post.resid_df
        mean = toy_post.sigma2_hat * df / (df - 2)
        sd = math.sqrt(2 * mean**2 / (df - 4))
        assert abs(s2.mean() - mean) < 4 * sd / math.sqrt(N)

    def test_beta_marginal_is_student_t(self, toy_post):
        N = 100_000
        root = RngStream(23)
        b0 = np.array([draw_parameters(toy_post, root.child(i)).beta_star[0] for i in range(N)])
        scale = math.sqrt(toy_post.sigma2_hat * toy_post.xtx_inv[0, 0])
        ks = stats.kstest(b0, stats.t(df=toy_post.resid_df, loc=1.0, scale=scale).cdf)
        assert ks.statistic < 1.63 / math.sqrt(N)


class TestReplicates:
    def test_noiseless(self, small_dataset):
        b = np.array([0.5, 2.0])
        rep = make_replicate(small_dataset, ParameterDraw(b, 0.0), RngStream(1))
        np.testing.assert_array_equal(rep.y_over, small_dataset.x @ b)

    def test_respondents_kept(self, small_dataset):
        rep = make_replicate(small_dataset, ParameterDraw(np.array([9.0, 9.0]), 4.0), RngStream(2))
        np.testing.assert_array_equal(rep.y_completed[:3], small_dataset.y_obs)
        np.testing.assert_array_equal(rep.y_completed[3:], rep.y_over[3:])
        assert not np.isnan(rep.y_over).any()

    def test_predictive_mean_large_df(self):
        X, y = generate_sample(sim2_model(), 40, RngStream(30))
        data = apply_missingness((X, y), MissingnessMechanism.mcar(0.6), RngStream(31))
        post = fit_posterior(data)
        M = 10_000
        imps = impute(data, M, RngStream(32), post=post)
        df = post.resid_df
        mean_s2 = post.sigma2_hat * df / (df - 2)
        lev = np.einsum("ij,jk,ik->i", data.x, post.xtx_inv, data.x)
        se = np.sqrt(mean_s2 * (1 + lev) / M)
        assert np.all(np.abs(imps.y_over.mean(axis=0) - data.x @ post.beta_hat) < 4 * se)

    def test_replicate_reproducible_alone(self, small_dataset):
        s = RngStream(25)
        imps = impute(small_dataset, 6, s)
        post = fit_posterior(small_dataset)
        j = 4
        d = draw_parameters(post, s.child(j).child(0))
        rep = make_replicate(small_dataset, d, s.child(j).child(1), index=j)
        np.testing.assert_array_equal(rep.y_over, imps.y_over[j])
        assert imps.replicate(j).draw.sigma2_star == d.sigma2_star

    def test_immutable(self, small_dataset):
        imps = impute(small_dataset, 3, RngStream(26))
        with pytest.raises(ValueError):
            imps.y_over[0, 0] = 1.0


class TestCongruence:
    @pytest.mark.parametrize("est", [Estimand.mean(), Estimand.proportion_below(1.0)])
    def test_pooled_mean_equals_closed_form(self, est):
        X, y = generate_sample(sim2_model(), 200, RngStream(27))
        data = apply_missingness((X, y), MissingnessMechanism.mcar(0.6), RngStream(28))
        M = 25
        imps = impute(data, M, RngStream(29))
        per = np.array([mme_point(est, rep.y_completed) for rep in imps])
        g = est.g
        closed = (g(data.y_obs).sum() + g(imps.y_over[:, data.r:]).mean(axis=0).sum()) / data.n
        assert per.mean() == pytest.approx(closed, rel=1e-13, abs=1e-15)

    def test_respondent_overimputations_not_in_point_estimate(self, small_dataset):
        imps = impute(small_dataset, 5, RngStream(33))
        base = pool(Estimand.mean(), imps.y_completed, imps.y_over, small_dataset.r)
        tampered = np.array(imps.y_over)
        tampered[:, : small_dataset.r] += 1e6
        other = pool(Estimand.mean(), imps.y_completed, tampered, small_dataset.r)
        assert (other.eta_mi, other.w_m, other.b_m, other.c_m) == \
               (base.eta_mi, base.w_m, base.b_m, base.c_m)
