"""
Gibbs sampler for the hierarchical two-regime VECM.

One sweep cycles through:
  1. A_j | rest            Gaussian, prior N(a, diag(tau))
  2. Xi | rest             Gaussian, prior N(0, zeta I)
  3. a | A_0, A_1, tau     N((a_0 + a_1)/2, diag(tau)/2)
  4. tau | a, A_0, A_1     GIG(d0 - 1, sum_j (a_j - a)^2, 2 d1)
  5. Sigma_j^-1 | rest     Wishart(S + e'e/2, s + N_j/2)
  6. S | Sigma_0, Sigma_1  Wishart(Q + sum_j Sigma_j^-1, q + 2 s)
  7. S_1..S_T | rest       forward filtering, backward sampling
  8. z*, Gamma | S, w      probit data augmentation
and then fixes the regime labels. The design matrix is rebuilt right after
step 2 because w_t = b'y_{t-1} depends on Xi.

The linear variant runs steps 1, 2, 5 and 6 on a single regime with the
fixed prior N(0, linear_prior_var I); both regime slots hold the same draw.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg
from tqdm import tqdm

from regimecast.config import ModelConfig, Settings
from regimecast.distributions import (
    GigParams,
    WishartParams,
    make_rng,
    sample_gamma,
    sample_gig,
    sample_wishart,
    spawn_rngs,
)
from regimecast.draws import PosteriorDraws
from regimecast.errors import DecompositionError, DimensionError, NumericalError
from regimecast.model import (
    CointegrationBasis,
    Dataset,
    DesignData,
    RegimeParams,
    build_design,
    ols_residual_variances,
    regime_log_likelihoods,
)
from regimecast.statefilter import (
    StatePath,
    TransitionParams,
    draw_transition_params,
    ergodic_distribution,
    ffbs_sample,
    hamilton_filter,
    transition_matrices,
)

logger = logging.getLogger(__name__)

CHI_FLOOR = 1e-10
TAU_FLOOR = 1e-12
VARIANCE_FLOOR = 1e-8


# ========================================
# STATE TYPES
# ========================================

@dataclass(frozen=True)
class HierarchyState:
    """
    Common distribution of the regime coefficients.

    Attributes:
        a: k-vector common mean (vec(A) order)
        tau: k-vector of positive variances, Omega = diag(tau)
        s_common: m x m common Wishart scale S
    """

    a: np.ndarray
    tau: np.ndarray
    s_common: np.ndarray


@dataclass(frozen=True)
class ChainState:
    """Everything one Gibbs sweep conditions on and updates."""

    regimes: Tuple[RegimeParams, RegimeParams]
    hierarchy: HierarchyState
    basis: CointegrationBasis
    transition: TransitionParams
    states: StatePath


@dataclass(frozen=True)
class HyperParams:
    """
    Fixed prior hyperparameters derived from the config and the data.

    Attributes:
        s_shape: shape s of the Wishart prior on Sigma_j^-1
        q_shape: shape q of the Wishart prior on S
        q_matrix: rate Q = (100 s / q_den) diag(sigma_hat^2)
    """

    d0: float
    d1: float
    zeta: float
    v_gamma: float
    s_shape: float
    q_shape: float
    q_matrix: np.ndarray


@dataclass
class SweepStats:
    """Counters accumulated over a chain."""

    swaps: int = 0
    rejections: int = 0
    empty_regime_sweeps: int = 0
    precision_floors: int = 0

    def as_notes(self) -> dict:
        return {
            "swaps": self.swaps,
            "rejections": self.rejections,
            "empty_regime_sweeps": self.empty_regime_sweeps,
            "precision_floors": self.precision_floors,
        }


def build_hyperparams(data: Dataset, config: ModelConfig) -> HyperParams:
    """
    Hyperparameters with Q from univariate AR(P) residual variances.

    Zero variances (constant series) are floored so Q stays SPD.
    """
    sigma_hat2 = ols_residual_variances(data, config.P)
    if np.any(sigma_hat2 <= 0):
        floor = VARIANCE_FLOOR * max(float(np.max(sigma_hat2)), 1.0)
        logger.warning("Flooring %d zero residual variance(s) at %.3g", int(np.sum(sigma_hat2 <= 0)), floor)
        sigma_hat2 = np.maximum(sigma_hat2, floor)
    s, q = config.s_shape, config.q_shape
    q_den = config.q_denominator if config.q_denominator is not None else q
    return HyperParams(
        d0=config.d0,
        d1=config.d1,
        zeta=config.zeta,
        v_gamma=config.v_gamma,
        s_shape=s,
        q_shape=q,
        q_matrix=np.diag(100.0 * s / q_den * sigma_hat2),
    )


def vec(matrix: np.ndarray) -> np.ndarray:
    """Column-major stacking."""
    return np.asarray(matrix).reshape(-1, order="F")


def unvec(vector: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return np.asarray(vector).reshape((rows, cols), order="F")


# ========================================
# STEP 1: REGIME COEFFICIENTS
# ========================================

def coefficient_posterior(
    dy: np.ndarray,
    x: np.ndarray,
    sigma_inv: np.ndarray,
    prior_mean: np.ndarray,
    prior_var: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Posterior of vec(A) for dy_t = A x_t + e_t, e_t ~ N(0, Sigma).

    precision = (X'X kron Sigma^-1) + diag(1/prior_var)
    mean = precision^-1 (vec(Sigma^-1 DY'X) + prior_mean / prior_var)

    Returns:
        (posterior mean, lower Cholesky factor of the posterior precision)

    Raises:
        DecompositionError: precision not positive definite
    """
    precision = np.kron(x.T @ x, sigma_inv)
    precision[np.diag_indices_from(precision)] += 1.0 / prior_var
    rhs = vec(sigma_inv @ dy.T @ x) + prior_mean / prior_var
    if not (np.all(np.isfinite(precision)) and np.all(np.isfinite(rhs))):
        raise DecompositionError("coefficient posterior is not finite")
    try:
        chol = linalg.cholesky(precision, lower=True)
    except linalg.LinAlgError as e:
        raise DecompositionError("coefficient posterior precision is not positive definite") from e
    mean = linalg.cho_solve((chol, True), rhs)
    return mean, chol


def _draw_from_precision(mean: np.ndarray, chol: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(mean.size)
    return mean + linalg.solve_triangular(chol.T, z, lower=False)


def draw_regime_coefficients(
    design: DesignData,
    states: StatePath,
    regime_idx: Optional[int],
    sigma_j: np.ndarray,
    hierarchy: HierarchyState,
    rng: np.random.Generator,
    stats: Optional[SweepStats] = None,
) -> np.ndarray:
    """
    Draw A_j from its Gaussian conditional.

    Uses the observations with S_t = regime_idx (all of them when
    regime_idx is None). An empty regime gives a draw from N(a, diag(tau)).
    If the precision cannot be factorized, tau is floored at 1e-12 and the
    draw is retried.

    Returns:
        m x K matrix
    """
    m, K = design.m, design.K
    rows = slice(None) if regime_idx is None else states.s == regime_idx
    dy, x = design.dy[rows], design.x[rows]
    sigma_inv = _inverse_spd(sigma_j, "sigma")
    try:
        mean, chol = coefficient_posterior(dy, x, sigma_inv, hierarchy.a, hierarchy.tau)
    except DecompositionError:
        logger.warning("Regime %s coefficient precision not SPD; flooring tau at %.0e", regime_idx, TAU_FLOOR)
        if stats is not None:
            stats.precision_floors += 1
        mean, chol = coefficient_posterior(dy, x, sigma_inv, hierarchy.a, np.maximum(hierarchy.tau, TAU_FLOOR))
    return unvec(_draw_from_precision(mean, chol, rng), m, K)


# ========================================
# STEP 2: COINTEGRATION SPACE
# ========================================

def draw_cointegration(
    design: DesignData,
    regimes: Sequence[RegimeParams],
    states: StatePath,
    zeta: float,
    rng: np.random.Generator,
) -> CointegrationBasis:
    """
    Draw Xi given the regime parameters and the state path.

    With y_{t-1} = (y1', y2')' split after the first r entries, moving the
    known terms left gives
        r_t = dy_t - A_{S_t} x_t + lambda_{S_t} w_t - lambda_{S_t} y1
            = lambda_{S_t} Xi' y2 + e_t,
    a regression on kron(lambda_{S_t}, y2') in vec(Xi) with prior N(0, zeta I).

    Raises:
        NumericalError: singular posterior precision
    """
    r, m = design.r, design.m
    y1 = design.y_lag[:, :r]
    y2 = design.y_lag[:, r:]
    v = (m - r) * r
    precision = np.eye(v) / zeta
    rhs = np.zeros(v)
    for j, params in enumerate(regimes):
        rows = states.s == j
        if not np.any(rows):
            continue
        lam = params.a[:, :r]
        sigma_inv = params.precision()
        # r_t for every row of the regime: dy - A x + lam w - lam y1
        resid = design.dy[rows] - design.x[rows] @ params.a.T + (design.w[rows] - y1[rows]) @ lam.T
        y2_j = y2[rows]
        lsl = lam.T @ sigma_inv @ lam
        precision += np.kron(lsl, y2_j.T @ y2_j)
        rhs += vec(y2_j.T @ (resid @ sigma_inv @ lam))
    try:
        chol = linalg.cholesky(precision, lower=True)
    except linalg.LinAlgError as e:
        raise NumericalError("cointegration posterior precision is singular", block="xi") from e
    mean = linalg.cho_solve((chol, True), rhs)
    draw = _draw_from_precision(mean, chol, rng)
    return CointegrationBasis(unvec(draw, m - r, r))


# ========================================
# STEPS 3-4: HIERARCHY
# ========================================

def draw_common_mean(a0: np.ndarray, a1: np.ndarray, tau: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """a ~ N((a0 + a1)/2, diag(tau)/2)."""
    a0, a1, tau = (np.asarray(v, dtype=float) for v in (a0, a1, tau))
    return 0.5 * (a0 + a1) + np.sqrt(0.5 * tau) * rng.standard_normal(a0.shape)


def draw_tau(a: np.ndarray, a0: np.ndarray, a1: np.ndarray, d0: float, d1: float, rng: np.random.Generator) -> np.ndarray:
    """
    tau_j ~ GIG(d0 - 1, (a0_j - a_j)^2 + (a1_j - a_j)^2, 2 d1), independently.

    At chi = 0 exactly the draw comes from the Gamma(d0, d1) prior; positive
    chi below 1e-10 is raised to 1e-10.
    """
    a, a0, a1 = (np.asarray(v, dtype=float) for v in (a, a0, a1))
    chi = (a0 - a) ** 2 + (a1 - a) ** 2
    out = np.empty(chi.shape)
    at_boundary = chi == 0
    if np.any(at_boundary):
        out[at_boundary] = sample_gamma(d0, d1, rng, size=int(np.sum(at_boundary)))
    inside = ~at_boundary
    if np.any(inside):
        chi_in = np.maximum(chi[inside], CHI_FLOOR)
        out[inside] = sample_gig(GigParams(np.full(chi_in.shape, d0 - 1.0), chi_in, np.full(chi_in.shape, 2.0 * d1)), rng)
    return np.maximum(out, np.finfo(float).tiny)


# ========================================
# STEPS 5-6: COVARIANCES
# ========================================

def draw_sigma_precision(
    design: DesignData,
    states: StatePath,
    regime_idx: Optional[int],
    a_j: np.ndarray,
    s_common: np.ndarray,
    s_shape: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Sigma_j^-1 ~ W(S + e'e/2, s + N_j/2) over the rows with S_t = j."""
    rows = slice(None) if regime_idx is None else states.s == regime_idx
    resid = design.dy[rows] - design.x[rows] @ a_j.T
    n_j = resid.shape[0]
    return sample_wishart(WishartParams(s_shape + 0.5 * n_j, s_common + 0.5 * resid.T @ resid), rng)


def draw_sigma(
    design: DesignData,
    states: StatePath,
    regime_idx: Optional[int],
    a_j: np.ndarray,
    s_common: np.ndarray,
    s_shape: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw Sigma_j (the inverse of the Wishart draw)."""
    sigma_inv = draw_sigma_precision(design, states, regime_idx, a_j, s_common, s_shape, rng)
    return _inverse_spd(sigma_inv, "sigma")


def draw_common_scale(
    sigma_invs: Sequence[np.ndarray],
    q_matrix: np.ndarray,
    q_shape: float,
    s_shape: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """S ~ W(Q + sum_j Sigma_j^-1, q + n s) with n the number of regimes."""
    rate = np.asarray(q_matrix, dtype=float) + sum(sigma_invs)
    return sample_wishart(WishartParams(q_shape + len(sigma_invs) * s_shape, rate), rng)


def _inverse_spd(matrix: np.ndarray, block: str) -> np.ndarray:
    try:
        chol = linalg.cholesky(matrix, lower=True)
    except linalg.LinAlgError as e:
        raise NumericalError(f"{block} draw is not positive definite", block=block) from e
    out = linalg.cho_solve((chol, True), np.eye(matrix.shape[0]))
    return 0.5 * (out + out.T)


# ========================================
# IDENTIFICATION
# ========================================

def identification_statistics(chain: ChainState, design: DesignData, config: ModelConfig) -> Tuple[float, float]:
    """
    Per-regime statistic of the ident_var equation.

    "intercept" reads the constant of that equation; "fitted_mean" averages
    the fitted values A_j x_t over the periods assigned to regime j (all
    periods when j is empty). Without an intercept the fitted mean is used.
    """
    i = config.ident_var
    if config.ident_statistic == "intercept" and config.include_intercept:
        return tuple(float(p.a[i, -1]) for p in chain.regimes)
    out = []
    for j, params in enumerate(chain.regimes):
        rows = chain.states.s == j
        x = design.x[rows] if np.any(rows) else design.x
        out.append(float(np.mean(x @ params.a[i])))
    return tuple(out)


def swap_labels(chain: ChainState) -> ChainState:
    """Exchange the regime labels of every regime-indexed block."""
    return replace(
        chain,
        regimes=(chain.regimes[1], chain.regimes[0]),
        states=chain.states.relabeled(),
        transition=chain.transition.relabeled(),
    )


def enforce_identification(chain: ChainState, design: DesignData, config: ModelConfig) -> Tuple[ChainState, bool]:
    """
    Order the regimes so that regime 0 has the lower statistic.

    Returns:
        (chain, whether the labels were swapped)
    """
    stat0, stat1 = identification_statistics(chain, design, config)
    if stat0 > stat1:
        return swap_labels(chain), True
    return chain, False


# ========================================
# SWEEP
# ========================================

def _check_finite(block: str, *arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NumericalError(f"non-finite values in block {block!r}", block=block)


def initial_distribution(config: ModelConfig, pmats: np.ndarray) -> np.ndarray:
    if config.initial_distribution == "ergodic":
        return ergodic_distribution(pmats)
    return np.array([0.5, 0.5])


def gibbs_sweep(
    chain: ChainState,
    design: DesignData,
    hyper: HyperParams,
    config: ModelConfig,
    rng: np.random.Generator,
    frozen: FrozenSet[str] = frozenset(),
    stats: Optional[SweepStats] = None,
) -> ChainState:
    """
    One pass through steps 1-8 followed by label identification.

    Args:
        chain: current state
        design: regression form for any basis; rebased to chain.basis here
        frozen: blocks to hold fixed ("coefficients", "xi", "a", "tau",
                "sigma", "s_common", "states", "transition")

    Raises:
        NumericalError: a block produced non-finite values or failed to factorize
    """
    stats = stats if stats is not None else SweepStats()
    linear = config.variant == "linear"
    design = design.rebase(chain.basis)
    states = chain.states
    hierarchy = chain.hierarchy
    regimes = chain.regimes
    n_regimes = 1 if linear else 2

    # 1. regime coefficients
    if "coefficients" not in frozen:
        coeffs = []
        for j in range(n_regimes):
            a_j = draw_regime_coefficients(
                design, states, None if linear else j, regimes[j].sigma, hierarchy, rng, stats
            )
            _check_finite("coefficients", a_j)
            coeffs.append(a_j)
        if linear:
            coeffs.append(coeffs[0])
        regimes = tuple(replace(regimes[j], a=coeffs[j]) for j in range(2))

    # 2. cointegration space, then refresh the design
    basis = chain.basis
    if "xi" not in frozen:
        basis = draw_cointegration(design, regimes[:n_regimes], states, hyper.zeta, rng)
        _check_finite("xi", basis.xi)
        design = design.rebase(basis)

    a0, a1 = vec(regimes[0].a), vec(regimes[1].a)

    # 3-4. common mean and shrinkage scales
    a, tau = hierarchy.a, hierarchy.tau
    if not linear:
        if "a" not in frozen:
            a = draw_common_mean(a0, a1, tau, rng)
            _check_finite("a", a)
        if "tau" not in frozen:
            tau = draw_tau(a, a0, a1, hyper.d0, hyper.d1, rng)
            _check_finite("tau", tau)

    # 5. covariances
    sigma_invs = [regimes[j].precision() for j in range(n_regimes)]
    if "sigma" not in frozen:
        sigma_invs = []
        new = []
        for j in range(n_regimes):
            sigma_inv = draw_sigma_precision(
                design, states, None if linear else j, regimes[j].a, hierarchy.s_common, hyper.s_shape, rng
            )
            _check_finite("sigma", sigma_inv)
            sigma_invs.append(sigma_inv)
            sigma = _inverse_spd(sigma_inv, "sigma")
            try:
                new.append(RegimeParams.from_sigma(regimes[j].a, sigma))
            except DecompositionError as e:
                raise NumericalError(str(e), block="sigma") from e
        if linear:
            new.append(new[0])
        regimes = tuple(new)

    # 6. common scale
    s_common = hierarchy.s_common
    if "s_common" not in frozen:
        s_common = draw_common_scale(sigma_invs, hyper.q_matrix, hyper.q_shape, hyper.s_shape, rng)
        _check_finite("s_common", s_common)
    hierarchy = HierarchyState(a=a, tau=tau, s_common=s_common)

    # 7-8. regime path and transition parameters
    transition = chain.transition
    if not linear:
        if "states" not in frozen:
            pmats = transition_matrices(transition, design.w)
            loglik = regime_log_likelihoods(design, regimes)
            filtered, _ = hamilton_filter(loglik, pmats, initial_distribution(config, pmats))
            states = StatePath(ffbs_sample(filtered, pmats, rng), states.zstar)
        if "transition" not in frozen:
            transition, zstar = draw_transition_params(
                states, design.w, hyper.v_gamma, rng, transition, fix_gamma=config.variant == "ftp"
            )
            _check_finite("transition", transition.c0, transition.gamma)
            states = StatePath(states.s, zstar)
        n1 = int(states.s.sum())
        if n1 == 0 or n1 == states.s.size:
            stats.empty_regime_sweeps += 1

    new_chain = ChainState(regimes=regimes, hierarchy=hierarchy, basis=basis, transition=transition, states=states)
    if linear:
        return new_chain

    identified, swapped = enforce_identification(new_chain, design, config)
    if swapped:
        if config.identification == "reject":
            stats.rejections += 1
            return chain
        stats.swaps += 1
    return identified


# ========================================
# CHAINS
# ========================================

def initialize_chain(data: Dataset, hyper: HyperParams, config: ModelConfig) -> Tuple[ChainState, DesignData]:
    """
    Starting values.

    States split the ident_var growth rates at their median (above = 1);
    both A_j are the equation-wise least squares fit on the full sample;
    tau = 1, Xi = 0, Gamma = 0 and S = q Q^-1. The linear variant starts
    from a = 0, tau = linear_prior_var and a single regime.
    """
    m, r = config.m, config.r
    basis = CointegrationBasis.zeros(m, r)
    design = build_design(data, basis, config)
    coef, *_ = np.linalg.lstsq(design.x, design.dy, rcond=None)
    a_ols = coef.T
    resid = design.dy - design.x @ coef
    dof = max(design.T_eff - design.K, 1)
    sigma = resid.T @ resid / dof
    sigma += np.eye(m) * VARIANCE_FLOOR * max(float(np.trace(sigma)) / m, 1.0)
    params = RegimeParams.from_sigma(a_ols, sigma)

    k = config.k
    if config.variant == "linear":
        s = np.zeros(design.T_eff, dtype=np.int64)
        hierarchy_a, hierarchy_tau = np.zeros(k), np.full(k, config.linear_prior_var)
    else:
        growth = design.dy[:, config.ident_var]
        s = (growth > np.median(growth)).astype(np.int64)
        hierarchy_a, hierarchy_tau = vec(a_ols), np.ones(k)

    s_common = hyper.q_shape * linalg.inv(hyper.q_matrix)
    chain = ChainState(
        regimes=(params, params),
        hierarchy=HierarchyState(a=hierarchy_a, tau=hierarchy_tau, s_common=s_common),
        basis=basis,
        transition=TransitionParams.zeros(r),
        states=StatePath.from_states(s),
    )
    return chain, design


def _progress_disabled() -> bool:
    return not logging.getLogger("regimecast").isEnabledFor(logging.INFO)


def run_chain(
    data: Dataset,
    config: ModelConfig,
    rng: Union[np.random.Generator, int, None] = None,
    progress: bool = True,
) -> PosteriorDraws:
    """
    Run n_draws sweeps and keep every `thin`-th draw after n_burn.

    Args:
        rng: generator, or an integer seed recorded with the draws

    Raises:
        NumericalError: non-finite state; the message names the block and sweep
    """
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = rng if isinstance(rng, np.random.Generator) else make_rng(rng)
    if data.m != config.m:
        raise DimensionError(f"data have {data.m} variables, config has m={config.m}")

    hyper = build_hyperparams(data, config)
    chain, design = initialize_chain(data, hyper, config)
    stats = SweepStats()

    n_keep = config.n_retained
    m, K, k, r = config.m, config.K, config.k, config.r
    T_eff = design.T_eff
    out = {
        "coefficients": np.empty((n_keep, 2, m, K)),
        "sigma": np.empty((n_keep, 2, m, m)),
        "a": np.empty((n_keep, k)),
        "tau": np.empty((n_keep, k)),
        "s_common": np.empty((n_keep, m, m)),
        "xi": np.empty((n_keep, m - r, r)),
        "c0": np.empty((n_keep, 2)),
        "gamma": np.empty((n_keep, r)),
        "states": np.empty((n_keep, T_eff), dtype=np.int64),
    }

    logger.info(
        "Running %s chain: %d sweeps, %d burn-in, thin %d (T_eff=%d, k=%d)",
        config.variant, config.n_draws, config.n_burn, config.thin, T_eff, k,
    )
    kept = 0
    bar = tqdm(range(config.n_draws), desc=f"{config.variant} r={r}", disable=not progress or _progress_disabled(), leave=False)
    for sweep in bar:
        try:
            chain = gibbs_sweep(chain, design, hyper, config, rng, stats=stats)
        except NumericalError as e:
            logger.error("Chain aborted at sweep %d in block %s: %s", sweep, e.block, e)
            raise NumericalError(f"sweep {sweep}: {e}", block=e.block, t=e.t) from e
        if sweep < config.n_burn or (sweep - config.n_burn) % config.thin:
            continue
        out["coefficients"][kept] = [p.a for p in chain.regimes]
        out["sigma"][kept] = [p.sigma for p in chain.regimes]
        out["a"][kept] = chain.hierarchy.a
        out["tau"][kept] = chain.hierarchy.tau
        out["s_common"][kept] = chain.hierarchy.s_common
        out["xi"][kept] = chain.basis.xi
        out["c0"][kept] = chain.transition.c0
        out["gamma"][kept] = chain.transition.gamma
        out["states"][kept] = chain.states.s
        kept += 1

    if stats.empty_regime_sweeps:
        logger.warning("%d sweeps left one regime without observations", stats.empty_regime_sweeps)
    if stats.rejections:
        logger.info("Identification rejected %d sweeps", stats.rejections)
    return PosteriorDraws(
        **out,
        names=data.names,
        dates=design.dates,
        config=config,
        seed=None if seed is None else int(seed),
        notes=stats.as_notes(),
    )


def _run_chain_worker(args) -> PosteriorDraws:
    data, config, rng = args
    return run_chain(data, config, rng, progress=False)


def run_chains(data: Dataset, config: ModelConfig, seed: Optional[int], n_chains: int = 1) -> PosteriorDraws:
    """
    Independent chains on spawned streams, concatenated in chain order.

    Worker processes are capped by Settings.THREADS; with one chain or one
    worker the chains run in this process.
    """
    if n_chains == 1:
        draws = run_chain(data, config, make_rng(seed))
        draws.seed = seed
        return draws
    rngs = spawn_rngs(seed, n_chains)
    workers = max(1, min(Settings.THREADS, n_chains))
    jobs = [(data, config, rng) for rng in rngs]
    if workers == 1:
        parts: List[PosteriorDraws] = [run_chain(data, config, rng) for rng in rngs]
    else:
        logger.info("Running %d chains on %d worker processes", n_chains, workers)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chain_worker, jobs))
    draws = PosteriorDraws.concat(parts)
    draws.seed = seed
    return draws
