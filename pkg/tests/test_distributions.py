"""Tests for the random variate generators."""

import numpy as np
import pytest
from scipy import integrate, special, stats

from regimecast.distributions import (
    GigParams,
    Side,
    WishartParams,
    gig_logpdf,
    make_rng,
    sample_gamma,
    sample_gig,
    sample_mvn,
    sample_truncated_normal,
    sample_wishart,
    spawn_rngs,
    truncated_normal_logpdf,
    wishart_logpdf,
)
from regimecast.errors import InvalidArgumentError

KS_LEVEL = 1e-3


def gig_numeric_cdf(params: GigParams):
    """CDF by cumulative trapezoid of the density on a log grid."""
    grid = np.logspace(-6, 4, 40001)
    dens = np.exp(gig_logpdf(grid, params))
    cdf = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
    cdf /= cdf[-1]
    return lambda x: np.interp(x, grid, cdf)


class TestStreams:
    def test_same_seed_same_stream(self):
        assert np.array_equal(make_rng(7).random(5), make_rng(7).random(5))

    def test_spawned_streams_are_reproducible_and_distinct(self):
        first = [g.random(3) for g in spawn_rngs(11, 3)]
        second = [g.random(3) for g in spawn_rngs(11, 3)]
        for a, b in zip(first, second):
            assert np.array_equal(a, b)
        assert not np.array_equal(first[0], first[1])


class TestMvn:
    def test_zero_factor_returns_mean(self, rng):
        mean = np.array([1.0, -2.0])
        assert np.array_equal(sample_mvn(mean, np.zeros((2, 2)), rng), mean)

    def test_non_finite_input_rejected(self, rng):
        with pytest.raises(InvalidArgumentError):
            sample_mvn(np.array([np.nan, 0.0]), np.eye(2), rng)

    def test_shape_mismatch_rejected(self, rng):
        with pytest.raises(InvalidArgumentError):
            sample_mvn(np.zeros(3), np.eye(2), rng)

    def test_empirical_covariance(self, rng):
        target = np.array([[2.0, 1.0], [1.0, 2.0]])
        chol = np.linalg.cholesky(target)
        draws = np.array([sample_mvn(np.zeros(2), chol, rng) for _ in range(50_000)])
        rel = np.linalg.norm(np.cov(draws.T) - target) / np.linalg.norm(target)
        assert rel < 0.02


class TestWishart:
    def test_empirical_mean_is_shape_times_inverse_rate(self, rng):
        rate = np.array([[2.0, 0.5], [0.5, 1.0]])
        params = WishartParams(3.0, rate)
        draws = sample_wishart(params, rng, size=100_000)
        expected = 3.0 * np.linalg.inv(rate)
        rel = np.linalg.norm(draws.mean(axis=0) - expected) / np.linalg.norm(expected)
        assert rel < 0.02

    @pytest.mark.parametrize("shape,rate", [
        (1.5, np.array([[1.0]])),
        (4.0, np.array([[0.5]])),
        (10.0, np.array([[3.0]])),
    ])
    def test_scalar_case_is_gamma(self, rng, shape, rate):
        draws = sample_wishart(WishartParams(shape, rate), rng, size=100_000)[:, 0, 0]
        result = stats.kstest(draws, stats.gamma(a=shape, scale=1.0 / rate[0, 0]).cdf)
        assert result.pvalue > KS_LEVEL

    def test_draws_are_spd(self, rng):
        draws = sample_wishart(WishartParams(2.5, np.eye(3)), rng, size=200)
        assert np.all(np.linalg.eigvalsh(draws) > 0)

    def test_shape_too_small(self, rng):
        with pytest.raises(InvalidArgumentError):
            sample_wishart(WishartParams(0.9, np.eye(3)), rng)

    def test_logpdf_matches_gamma_for_m1(self):
        value = wishart_logpdf(np.array([[0.7]]), WishartParams(2.0, np.array([[1.5]])))
        assert value == pytest.approx(stats.gamma.logpdf(0.7, a=2.0, scale=1 / 1.5), rel=1e-10)


class TestGig:
    @pytest.mark.parametrize("p,chi,psi", [(-0.9, 2.0, 0.2), (0.5, 1.0, 1.0), (2.0, 0.5, 3.0)])
    def test_ks_against_numeric_cdf(self, rng, p, chi, psi):
        params = GigParams(p, chi, psi)
        draws = sample_gig(params, rng, size=100_000)
        result = stats.kstest(draws, gig_numeric_cdf(params))
        assert result.pvalue > KS_LEVEL

    @pytest.mark.parametrize("p,chi,psi", [(-0.9, 2.0, 0.2), (0.0, 1.0, 2.0), (3.0, 0.1, 0.5)])
    def test_density_integrates_to_one(self, p, chi, psi):
        total, _ = integrate.quad(lambda x: np.exp(gig_logpdf(x, GigParams(p, chi, psi))), 0, np.inf, limit=200)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_mean_matches_bessel_ratio(self, rng):
        p, chi, psi = 0.0, 2.0, 2.0
        omega = np.sqrt(chi * psi)
        expected = np.sqrt(chi / psi) * special.kv(p + 1, omega) / special.kv(p, omega)
        draws = sample_gig(GigParams(p, chi, psi), rng, size=200_000)
        assert draws.mean() == pytest.approx(expected, rel=0.01)

    def test_chi_zero_is_gamma(self, rng):
        draws = sample_gig(GigParams(1.5, 0.0, 4.0), rng, size=100_000)
        result = stats.kstest(draws, stats.gamma(a=1.5, scale=0.5).cdf)
        assert result.pvalue > KS_LEVEL

    def test_psi_zero_is_inverse_gamma(self, rng):
        draws = sample_gig(GigParams(-2.0, 3.0, 0.0), rng, size=100_000)
        result = stats.kstest(draws, stats.invgamma(a=2.0, scale=1.5).cdf)
        assert result.pvalue > KS_LEVEL

    def test_vector_parameters_mix_boundaries(self, rng):
        chi = np.array([0.0, 1.0, 2.0])
        draws = sample_gig(GigParams(np.array([1.0, -0.5, 0.5]), chi, np.array([2.0, 1.0, 1.0])), rng)
        assert draws.shape == (3,)
        assert np.all(draws > 0)

    @pytest.mark.parametrize("p,chi,psi", [(-1.0, 0.0, 1.0), (1.0, 1.0, 0.0), (0.5, -1.0, 1.0), (0.5, np.nan, 1.0)])
    def test_invalid_parameters(self, rng, p, chi, psi):
        with pytest.raises(InvalidArgumentError):
            sample_gig(GigParams(p, chi, psi), rng)

    def test_tiny_shape_stays_positive(self, rng):
        draws = sample_gig(GigParams(1e-3, 0.0, 2.0), rng, size=10_000)
        assert np.all(draws > 0)

    def test_mean_matches_quadrature_for_small_order(self, rng):
        params = GigParams(-0.9, 1.0, 0.2)
        expected, _ = integrate.quad(lambda x: x * np.exp(gig_logpdf(x, params)), 0, np.inf, limit=200)
        draws = sample_gig(params, rng, size=1_000_000)
        assert draws.mean() == pytest.approx(expected, rel=0.01)

    def test_reciprocal_mean_matches_quadrature(self, rng):
        params = GigParams(0.5, 1.0, 1.0)
        expected, _ = integrate.quad(lambda x: np.exp(gig_logpdf(x, params)) / x, 0, np.inf, limit=200)
        draws = sample_gig(params, rng, size=1_000_000)
        assert np.mean(1.0 / draws) == pytest.approx(expected, rel=0.01)

    def test_repeated_vector_parameters_keep_their_distributions(self, rng):
        n = 50_000
        first, second = GigParams(-0.9, 2.0, 0.2), GigParams(2.0, 0.5, 3.0)
        p = np.tile([first.p, second.p], n)
        chi = np.tile([first.chi, second.chi], n)
        psi = np.tile([first.psi, second.psi], n)
        draws = sample_gig(GigParams(p, chi, psi), rng)
        assert stats.kstest(draws[0::2], gig_numeric_cdf(first)).pvalue > KS_LEVEL
        assert stats.kstest(draws[1::2], gig_numeric_cdf(second)).pvalue > KS_LEVEL


class TestTruncatedNormal:
    @pytest.mark.parametrize("mu", [-1.0, 0.5, 3.0])
    def test_positive_side_ks(self, rng, mu):
        draws = sample_truncated_normal(mu, Side.POSITIVE, rng, size=100_000)
        cdf = lambda x: 1.0 - stats.norm.sf(x - mu) / stats.norm.sf(-mu)
        assert np.all(draws > 0)
        assert stats.kstest(draws, cdf).pvalue > KS_LEVEL

    @pytest.mark.parametrize("mu", [-2.0, 0.0, 1.5])
    def test_nonpositive_side_ks(self, rng, mu):
        draws = sample_truncated_normal(mu, Side.NONPOSITIVE, rng, size=100_000)
        cdf = lambda x: np.minimum(stats.norm.cdf(x - mu) / stats.norm.cdf(-mu), 1.0)
        assert np.all(draws <= 0)
        assert stats.kstest(draws, cdf).pvalue > KS_LEVEL

    def test_far_tail(self, rng):
        mu = -8.0
        draws = sample_truncated_normal(mu, Side.POSITIVE, rng, size=10_000)
        expected = mu + np.exp(stats.norm.logpdf(mu) - stats.norm.logcdf(mu))
        assert np.all(draws > 0)
        assert draws.mean() == pytest.approx(expected, abs=0.005)

    def test_boolean_sides_follow_mask(self, rng):
        mu = np.array([0.3, -0.3, 2.0, -2.0])
        positive = np.array([True, False, False, True])
        draws = sample_truncated_normal(mu, positive, rng)
        assert np.all((draws > 0) == positive)

    def test_logpdf_outside_support(self):
        assert truncated_normal_logpdf(-0.1, 0.0, Side.POSITIVE) == -np.inf
        assert truncated_normal_logpdf(0.5, 0.0, Side.POSITIVE) == pytest.approx(np.log(2) + stats.norm.logpdf(0.5))


def test_gamma_rate_parameterization(rng):
    draws = sample_gamma(2.0, 4.0, rng, size=100_000)
    assert draws.mean() == pytest.approx(0.5, rel=0.01)
