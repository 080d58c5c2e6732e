"""Tests for the Gibbs sampler blocks, identification and full chains."""

from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate, special

from regimecast import sampler
from regimecast.config import ModelConfig, Settings
from regimecast.dgp import TrueParams, simulate_msvecm
from regimecast.distributions import GigParams, gig_logpdf, spawn_rngs
from regimecast.errors import NumericalError
from regimecast.model import CointegrationBasis, DesignData, RegimeParams, build_design
from regimecast.sampler import (
    ChainState,
    HierarchyState,
    build_hyperparams,
    coefficient_posterior,
    draw_cointegration,
    draw_common_mean,
    draw_common_scale,
    draw_regime_coefficients,
    draw_sigma,
    draw_sigma_precision,
    draw_tau,
    enforce_identification,
    gibbs_sweep,
    identification_statistics,
    initialize_chain,
    run_chain,
    run_chains,
    swap_labels,
    unvec,
    vec,
)
from regimecast.statefilter import StatePath, TransitionParams


@pytest.fixture
def fixture_design(fixture_params, fixture_data, small_config):
    data, states = fixture_data
    return build_design(data, fixture_params.basis, small_config), StatePath.from_states(states)


def one_variable_design(dy, x):
    dy = np.asarray(dy, dtype=float).reshape(-1, 1)
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    return DesignData(dy=dy, x=x, w=x, y_lag=x)


def chain_with_intercepts(small_config, low, high, s):
    K, m = small_config.K, small_config.m
    regimes = []
    for value in (low, high):
        a = np.zeros((m, K))
        a[small_config.ident_var, -1] = value
        regimes.append(RegimeParams.from_sigma(a, np.eye(m) * (1.0 + value ** 2)))
    return ChainState(
        regimes=tuple(regimes),
        hierarchy=HierarchyState(np.zeros(small_config.k), np.ones(small_config.k), np.eye(m)),
        basis=CointegrationBasis.zeros(m, small_config.r),
        transition=TransitionParams([-1.0, 0.5], [0.3]),
        states=StatePath.from_states(s),
    )


def test_vec_is_column_major():
    matrix = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    assert np.array_equal(vec(matrix), [1.0, 4.0, 2.0, 5.0, 3.0, 6.0])
    assert np.array_equal(unvec(vec(matrix), 2, 3), matrix)


class TestHyperParams:
    def test_wishart_rate_from_residual_variances(self, fixture_data, small_config):
        data, _ = fixture_data
        hyper = build_hyperparams(data, small_config)
        s, q = small_config.s_shape, small_config.q_shape
        assert hyper.s_shape == s and hyper.q_shape == q
        diag = np.diag(hyper.q_matrix)
        assert np.allclose(hyper.q_matrix, np.diag(diag))
        override = build_hyperparams(data, small_config.model_copy(update={"q_denominator": 2 * q}))
        assert np.allclose(np.diag(override.q_matrix), 0.5 * diag)

    def test_initial_chain(self, fixture_data, small_config):
        data, _ = fixture_data
        hyper = build_hyperparams(data, small_config)
        chain, design = initialize_chain(data, hyper, small_config)
        growth = design.dy[:, small_config.ident_var]
        assert np.array_equal(chain.states.s, (growth > np.median(growth)).astype(int))
        assert np.allclose(chain.hierarchy.s_common, hyper.q_shape * np.linalg.inv(hyper.q_matrix))
        assert np.array_equal(chain.basis.xi, np.zeros((2, 1)))
        assert np.array_equal(chain.regimes[0].a, chain.regimes[1].a)


class TestCoefficientStep:
    def test_scalar_conjugate_posterior(self, rng):
        x = rng.normal(size=50)
        dy = 0.7 * x + rng.normal(scale=0.5, size=50)
        sigma2, prior_mean, prior_var = 0.25, 0.2, 3.0
        mean, chol = coefficient_posterior(
            dy[:, None], x[:, None], np.array([[1.0 / sigma2]]), np.array([prior_mean]), np.array([prior_var])
        )
        precision = x @ x / sigma2 + 1.0 / prior_var
        expected = (x @ dy / sigma2 + prior_mean / prior_var) / precision
        assert mean[0] == pytest.approx(expected, abs=1e-10)
        assert chol[0, 0] ** 2 == pytest.approx(precision, abs=1e-10)

    def test_scalar_draws_match_posterior_moments(self, rng):
        x = rng.normal(size=50)
        dy = 0.7 * x + rng.normal(size=50)
        design = one_variable_design(dy, x)
        states = StatePath.from_states(np.zeros(50, dtype=int))
        hierarchy = HierarchyState(np.array([0.0]), np.array([2.0]), np.eye(1))
        draws = np.array([
            draw_regime_coefficients(design, states, 0, np.eye(1), hierarchy, rng)[0, 0] for _ in range(20_000)
        ])
        precision = x @ x + 0.5
        mean = (x @ dy) / precision
        sd = np.sqrt(1.0 / precision)
        assert abs(draws.mean() - mean) < 3 * sd / np.sqrt(draws.size)
        assert draws.std() == pytest.approx(sd, rel=0.03)

    def test_tiny_tau_pins_draw_to_common_mean(self, fixture_design, small_config, rng):
        design, states = fixture_design
        a = rng.normal(size=small_config.k)
        hierarchy = HierarchyState(a, np.full(small_config.k, 1e-14), np.eye(3))
        draw = draw_regime_coefficients(design, states, 1, np.eye(3), hierarchy, rng)
        assert np.allclose(draw, unvec(a, 3, small_config.K), atol=1e-4)

    def test_empty_regime_draws_from_prior(self, fixture_design, small_config, rng):
        design, _ = fixture_design
        states = StatePath.from_states(np.zeros(design.T_eff, dtype=int))
        a = np.linspace(-1.0, 1.0, small_config.k)
        tau = np.full(small_config.k, 0.5)
        hierarchy = HierarchyState(a, tau, np.eye(3))
        draws = np.array([
            vec(draw_regime_coefficients(design, states, 1, np.eye(3), hierarchy, rng)) for _ in range(4000)
        ])
        assert np.allclose(draws.mean(axis=0), a, atol=0.06)
        assert np.allclose(draws.var(axis=0), tau, rtol=0.1)

    def test_indefinite_covariance_names_its_block(self, fixture_design, small_config, rng):
        design, states = fixture_design
        hierarchy = HierarchyState(np.zeros(small_config.k), np.ones(small_config.k), np.eye(3))
        with pytest.raises(NumericalError) as info:
            draw_regime_coefficients(design, states, 0, np.diag([1.0, -1.0, 1.0]), hierarchy, rng)
        assert info.value.block == "sigma"


class TestCointegrationStep:
    def test_tight_prior_pins_xi_at_zero(self, fixture_design, fixture_params, rng):
        design, states = fixture_design
        basis = draw_cointegration(design, fixture_params.regimes, states, 1e-12, rng)
        assert np.max(np.abs(basis.xi)) < 1e-4

    def test_zero_loadings_return_the_prior(self, fixture_design, fixture_params, rng):
        design, states = fixture_design
        regimes = []
        for params in fixture_params.regimes:
            a = params.a.copy()
            a[:, :1] = 0.0
            regimes.append(RegimeParams.from_sigma(a, params.sigma))
        draws = np.array([draw_cointegration(design, regimes, states, 2.0, rng).xi.ravel() for _ in range(4000)])
        assert np.allclose(draws.mean(axis=0), 0.0, atol=0.1)
        assert np.allclose(draws.var(axis=0), 2.0, rtol=0.1)

    def test_recovers_known_basis(self):
        rng = np.random.default_rng(5)
        a = np.hstack([np.array([[-0.3], [0.1]]), 0.2 * np.eye(2), np.zeros((2, 1))])
        regime = RegimeParams.from_sigma(a, 0.1 * np.eye(2))
        truth = TrueParams(
            regimes=(regime, regime),
            basis=CointegrationBasis(np.array([[0.5]])),
            transition=TransitionParams([-3.0, 3.0], [0.0]),
            initial_levels=np.zeros((2, 2)),
            P=1,
        )
        data, states = simulate_msvecm(truth, 1000, rng)
        config = ModelConfig(m=2, r=1, P=1, n_draws=2, n_burn=0)
        design = build_design(data, CointegrationBasis.zeros(2, 1), config)
        path = StatePath.from_states(states)
        draws = np.array([draw_cointegration(design, truth.regimes, path, 1.0, rng).xi[0, 0] for _ in range(500)])
        assert abs(draws.mean() - 0.5) < 3 * draws.std()
        assert abs(draws.mean() - 0.5) < 0.05


class TestHierarchySteps:
    def test_common_mean_moments(self, rng):
        n = 200_000
        a0, a1, tau = np.full(n, 1.0), np.full(n, 3.0), np.full(n, 0.8)
        draws = draw_common_mean(a0, a1, tau, rng)
        assert draws.mean() == pytest.approx(2.0, abs=0.01)
        assert draws.var() == pytest.approx(0.4, rel=0.02)

    def test_tau_at_boundary_draws_from_prior(self, rng):
        n = 1_000_000
        zeros = np.zeros(n)
        draws = draw_tau(zeros, zeros, zeros, 0.1, 0.1, rng)
        assert np.all(draws > 0)
        assert draws.mean() == pytest.approx(1.0, abs=0.02)

    def test_tau_interior_mean(self, rng):
        n = 50_000
        d0, d1 = 1.0, 1.0
        a, a0, a1 = np.zeros(n), np.full(n, 0.5), np.zeros(n)
        draws = draw_tau(a, a0, a1, d0, d1, rng)
        p, chi, psi = d0 - 1.0, 0.25, 2.0 * d1
        omega = np.sqrt(chi * psi)
        expected = np.sqrt(chi / psi) * special.kv(p + 1, omega) / special.kv(p, omega)
        assert draws.mean() == pytest.approx(expected, rel=0.02)

    def test_tau_mean_matches_quadrature_at_default_hyperparameters(self, rng):
        n = 1_000_000
        d0 = d1 = 0.1
        draws = draw_tau(np.zeros(n), np.ones(n), -np.ones(n), d0, d1, rng)
        params = GigParams(d0 - 1.0, 2.0, 2.0 * d1)
        expected, _ = integrate.quad(lambda x: x * np.exp(gig_logpdf(x, params)), 0, np.inf, limit=200)
        assert draws.mean() == pytest.approx(expected, rel=0.01)

    def test_tiny_distance_is_floored(self, rng):
        draws = draw_tau(np.zeros(3), np.full(3, 1e-8), np.zeros(3), 0.1, 0.1, rng)
        assert np.all(np.isfinite(draws)) and np.all(draws > 0)


class TestCovarianceSteps:
    def test_empty_regime_precision_has_prior_mean(self, fixture_design, small_config, rng):
        design, _ = fixture_design
        states = StatePath.from_states(np.zeros(design.T_eff, dtype=int))
        s_common = np.array([[2.0, 0.3, 0.0], [0.3, 1.0, 0.0], [0.0, 0.0, 0.5]])
        s = small_config.s_shape
        draws = np.array([
            draw_sigma_precision(design, states, 1, np.zeros((3, small_config.K)), s_common, s, rng)
            for _ in range(20_000)
        ])
        expected = s * np.linalg.inv(s_common)
        assert np.linalg.norm(draws.mean(axis=0) - expected) / np.linalg.norm(expected) < 0.03

    def test_one_variable_conjugate_gamma(self, rng):
        n = 100
        resid = rng.normal(scale=2.0, size=n)
        design = one_variable_design(resid, np.zeros(n))
        states = StatePath.from_states(np.zeros(n, dtype=int))
        s_shape, s_common = 2.5, 1.5
        draws = np.array([
            draw_sigma_precision(design, states, 0, np.zeros((1, 1)), np.array([[s_common]]), s_shape, rng)[0, 0]
            for _ in range(20_000)
        ])
        shape, rate = s_shape + n / 2, s_common + resid @ resid / 2
        sd = np.sqrt(shape) / rate
        assert abs(draws.mean() - shape / rate) < 3 * sd / np.sqrt(draws.size)
        assert abs(1.0 / draws.mean() - 4.0) < 1.5

    def test_covariance_is_the_inverse_precision(self, fixture_design, small_config):
        design, _ = fixture_design
        states = StatePath.from_states(np.zeros(design.T_eff, dtype=int))
        args = (design, states, 0, np.zeros((3, small_config.K)), np.eye(3), small_config.s_shape)
        sigma = draw_sigma(*args, np.random.default_rng(3))
        precision = draw_sigma_precision(*args, np.random.default_rng(3))
        assert np.allclose(sigma @ precision, np.eye(3), atol=1e-8)
        assert np.allclose(sigma, sigma.T)

    def test_common_scale_mean(self, rng):
        q_matrix = np.diag([4.0, 2.0])
        sigma_invs = [np.array([[1.0, 0.2], [0.2, 1.0]]), np.eye(2) * 0.5]
        draws = np.array([draw_common_scale(sigma_invs, q_matrix, 1.0, 3.0, rng) for _ in range(20_000)])
        expected = (1.0 + 2 * 3.0) * np.linalg.inv(q_matrix + sum(sigma_invs))
        assert np.linalg.norm(draws.mean(axis=0) - expected) / np.linalg.norm(expected) < 0.02


class TestIdentification:
    def test_ordered_chain_is_kept(self, fixture_design, small_config):
        design, states = fixture_design
        chain = chain_with_intercepts(small_config, -0.5, 0.5, states.s)
        same, swapped = enforce_identification(chain, design, small_config)
        assert not swapped
        assert same is chain

    def test_reversed_chain_is_swapped(self, fixture_design, small_config):
        design, states = fixture_design
        chain = chain_with_intercepts(small_config, 0.5, -0.5, states.s)
        fixed, swapped = enforce_identification(chain, design, small_config)
        assert swapped
        stat0, stat1 = identification_statistics(fixed, design, small_config)
        assert stat0 < stat1
        assert np.array_equal(fixed.states.s, 1 - chain.states.s)
        assert np.array_equal(fixed.states.zstar, -chain.states.zstar)
        assert np.allclose(fixed.transition.c0, [-0.5, 1.0])
        assert np.allclose(fixed.transition.gamma, [-0.3])
        assert fixed.regimes[0] is chain.regimes[1]

    def test_double_swap_is_identity(self, fixture_design, small_config):
        _, states = fixture_design
        chain = chain_with_intercepts(small_config, 0.5, -0.5, states.s)
        twice = swap_labels(swap_labels(chain))
        assert np.array_equal(twice.states.s, chain.states.s)
        assert np.allclose(twice.transition.stacked, chain.transition.stacked)
        assert twice.regimes[0] is chain.regimes[0]

    def test_fitted_mean_statistic(self, fixture_design, small_config):
        design, states = fixture_design
        config = small_config.model_copy(update={"ident_statistic": "fitted_mean"})
        chain = chain_with_intercepts(small_config, -0.5, 0.5, states.s)
        stat0, stat1 = identification_statistics(chain, design, config)
        # coefficients are zero except the intercept, so the fitted mean is the intercept
        assert stat0 == pytest.approx(-0.5)
        assert stat1 == pytest.approx(0.5)


class TestSweep:
    def test_sweeps_are_deterministic(self, fixture_data, small_config):
        data, _ = fixture_data
        hyper = build_hyperparams(data, small_config)
        chain0, design = initialize_chain(data, hyper, small_config)
        results = []
        for _ in range(2):
            rng = np.random.default_rng(1)
            chain = chain0
            for _ in range(5):
                chain = gibbs_sweep(chain, design, hyper, small_config, rng)
            results.append(chain)
        assert np.array_equal(results[0].hierarchy.tau, results[1].hierarchy.tau)
        assert np.array_equal(results[0].states.s, results[1].states.s)
        assert np.array_equal(results[0].regimes[1].a, results[1].regimes[1].a)

    def test_tiny_tau_forces_homogeneous_regimes(self, fixture_data, small_config):
        data, _ = fixture_data
        hyper = build_hyperparams(data, small_config)
        chain, design = initialize_chain(data, hyper, small_config)
        chain = replace(chain, hierarchy=replace(chain.hierarchy, tau=np.full(small_config.k, 1e-12)))
        rng = np.random.default_rng(2)
        for _ in range(100):
            chain = gibbs_sweep(chain, design, hyper, small_config, rng, frozen=frozenset({"tau"}))
        assert np.max(np.abs(chain.regimes[0].a - chain.regimes[1].a)) < 1e-3

    def test_frozen_blocks_are_untouched(self, fixture_data, small_config):
        data, _ = fixture_data
        hyper = build_hyperparams(data, small_config)
        chain, design = initialize_chain(data, hyper, small_config)
        frozen = frozenset({"xi", "s_common"})
        new = gibbs_sweep(chain, design, hyper, small_config, np.random.default_rng(3), frozen=frozen)
        assert np.array_equal(new.basis.xi, chain.basis.xi)
        assert np.array_equal(new.hierarchy.s_common, chain.hierarchy.s_common)


class TestRunChain:
    def test_retention_bookkeeping(self, fixture_data, small_config):
        data, _ = fixture_data
        draws = run_chain(data, small_config.model_copy(update={"n_draws": 10, "n_burn": 5}), 0, progress=False)
        assert draws.n_draws == 5
        thinned = run_chain(data, small_config.model_copy(update={"n_draws": 11, "n_burn": 5, "thin": 2}), 0,
                            progress=False)
        assert thinned.n_draws == 3
        assert draws.seed == 0

    def test_draws_respect_constraints(self, fixture_data, small_config):
        data, _ = fixture_data
        draws = run_chain(data, small_config, 3, progress=False)
        assert draws.n_draws == small_config.n_retained
        assert np.all(np.linalg.eigvalsh(draws.sigma) > 0)
        assert np.all(np.linalg.eigvalsh(draws.s_common) > 0)
        assert np.all(draws.tau > 0)
        i = small_config.ident_var
        assert np.all(draws.coefficients[:, 0, i, -1] <= draws.coefficients[:, 1, i, -1])
        assert draws.states.shape == (draws.n_draws, data.T - small_config.P - 1)
        assert set(np.unique(draws.states)) <= {0, 1}

    def test_linear_variant(self, fixture_data, small_config):
        data, _ = fixture_data
        config = small_config.model_copy(update={"variant": "linear"})
        draws = run_chain(data, config, 4, progress=False)
        assert np.array_equal(draws.coefficients[:, 0], draws.coefficients[:, 1])
        assert np.array_equal(draws.sigma[:, 0], draws.sigma[:, 1])
        assert not draws.states.any()
        assert np.all(draws.tau == config.linear_prior_var)
        assert not draws.a.any()

    def test_fixed_transition_variant(self, fixture_data, small_config):
        data, _ = fixture_data
        draws = run_chain(data, small_config.model_copy(update={"variant": "ftp"}), 5, progress=False)
        assert not draws.gamma.any()
        assert np.any(draws.c0 != 0)

    def test_reject_mode_keeps_ordering(self, fixture_data, small_config):
        data, _ = fixture_data
        config = small_config.model_copy(update={"identification": "reject"})
        draws = run_chain(data, config, 6, progress=False)
        i = config.ident_var
        assert np.all(draws.coefficients[:, 0, i, -1] <= draws.coefficients[:, 1, i, -1])
        assert draws.notes["swaps"] == 0
        assert "rejections" in draws.notes

    def test_same_seed_same_draws(self, fixture_data, small_config):
        data, _ = fixture_data
        first = run_chain(data, small_config, 9, progress=False)
        second = run_chain(data, small_config, 9, progress=False)
        for name in ("coefficients", "sigma", "tau", "xi", "c0", "gamma", "states"):
            assert np.array_equal(getattr(first, name), getattr(second, name))

    def test_non_finite_block_aborts_with_its_name(self, fixture_data, small_config, monkeypatch):
        data, _ = fixture_data

        def broken(design, regimes, states, zeta, rng):
            return CointegrationBasis(np.full((design.m - design.r, design.r), np.nan))

        monkeypatch.setattr(sampler, "draw_cointegration", broken)
        with pytest.raises(NumericalError) as info:
            run_chain(data, small_config, 0, progress=False)
        assert info.value.block == "xi"
        assert "sweep 0" in str(info.value)

    def test_multiple_chains_concatenate_in_order(self, fixture_data, small_config, monkeypatch):
        data, _ = fixture_data
        monkeypatch.setattr(Settings, "THREADS", 1)
        draws = run_chains(data, small_config, 4, n_chains=2)
        n = small_config.n_retained
        assert draws.n_draws == 2 * n
        assert draws.seed == 4
        second = run_chain(data, small_config, spawn_rngs(4, 2)[1], progress=False)
        assert np.array_equal(draws.tau[n:], second.tau)
        assert np.array_equal(draws.states[n:], second.states)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(5))
def test_state_recovery_on_fixture(fixture_params, seed):
    data, states = simulate_msvecm(fixture_params, 300, np.random.default_rng(seed))
    config = ModelConfig(m=3, r=1, P=1, n_draws=3000, n_burn=1000)
    draws = run_chain(data, config, seed, progress=False)
    mode = (draws.states.mean(axis=0) > 0.5).astype(int)
    assert np.mean(mode == states) >= 0.9


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(5))
def test_shrinkage_selects_heterogeneous_coefficients(seed):
    """Two of twelve coefficients differ across regimes: the loading of the
    first equation (vec index 0) and the intercept of the second (index 11)."""
    lags = np.array([[0.2, 0.0, 0.1, 0.0], [0.0, 0.2, 0.0, 0.1]])
    sigma = np.array([[0.5, 0.1], [0.1, 0.5]])
    regimes = (
        RegimeParams.from_sigma(np.hstack([[[-0.1], [0.05]], lags, [[0.0], [-0.4]]]), sigma),
        RegimeParams.from_sigma(np.hstack([[[-0.5], [0.05]], lags, [[0.0], [0.6]]]), sigma),
    )
    truth = TrueParams(
        regimes=regimes,
        basis=CointegrationBasis(np.array([[-1.0]])),
        transition=TransitionParams([-1.0, 1.0], [0.0]),
        initial_levels=np.zeros((3, 2)),
        P=2,
    )
    data, _ = simulate_msvecm(truth, 300, np.random.default_rng(100 + seed))
    config = ModelConfig(m=2, r=1, P=2, n_draws=6000, n_burn=1000)
    draws = run_chain(data, config, seed, progress=False)
    median_tau = np.median(draws.tau, axis=0)
    heterogeneous = median_tau[[0, 11]]
    homogeneous = np.delete(median_tau, [0, 11])
    assert np.median(heterogeneous) >= 10 * np.median(homogeneous)


@pytest.mark.slow
def test_prior_distance_has_variance_tau(fixture_design, small_config):
    design, _ = fixture_design
    rng = np.random.default_rng(17)
    states = StatePath.from_states(np.zeros(design.T_eff, dtype=int))
    tau = np.geomspace(1e-3, 10.0, small_config.k)
    hierarchy = HierarchyState(np.linspace(-2.0, 2.0, small_config.k), tau, np.eye(3))
    n = 100_000
    distance = np.empty((n, small_config.k))
    for i in range(n):
        a0 = vec(draw_regime_coefficients(design, states, 1, np.eye(3), hierarchy, rng))
        a1 = vec(draw_regime_coefficients(design, states, 1, np.eye(3), hierarchy, rng))
        distance[i] = (a0 - a1) / np.sqrt(2.0)
    assert np.allclose(distance.var(axis=0), tau, rtol=0.02)


@pytest.mark.slow
def test_homogeneous_regimes_drive_tau_to_zero(fixture_params):
    same = replace(fixture_params, regimes=(fixture_params.regimes[0], fixture_params.regimes[0]))
    data, _ = simulate_msvecm(same, 300, np.random.default_rng(5))
    config = ModelConfig(m=3, r=1, P=1, n_draws=5000, n_burn=2500)
    draws = run_chain(data, config, 5, progress=False)
    median_log_tau = np.median(np.log(draws.tau), axis=0)
    assert np.mean(median_log_tau < -5) >= 0.9
