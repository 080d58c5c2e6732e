"""
Regime path inference under probit time-varying transition probabilities.

- transition_matrix / transition_matrices: P_t from (c0, gamma) and w_t
- hamilton_filter: forward recursion in log space with per-step normalization
- ffbs_sample: backward sampling of the state path from filtered probabilities
- draw_transition_params: probit data augmentation for (c00, c01, gamma)

Direction convention: Phi(c_{0i} + gamma' w_t) is the probability of moving
into regime 1 (recession) from regime i. The initial distribution applies to
the first effective period; P_1 is never used.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import linalg, stats
from scipy.special import logsumexp

from regimecast.distributions import sample_mvn, sample_truncated_normal
from regimecast.errors import DimensionError, NumericalError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransitionParams:
    """
    Probit coefficients of the transition equation.

    Attributes:
        c0: (c_00, c_01), regime-specific intercepts
        gamma: r-vector of loadings on the cointegration errors
    """

    c0: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "c0", np.asarray(self.c0, dtype=float).reshape(2))
        object.__setattr__(self, "gamma", np.atleast_1d(np.asarray(self.gamma, dtype=float)))

    @classmethod
    def zeros(cls, r: int) -> "TransitionParams":
        return cls(np.zeros(2), np.zeros(r))

    @property
    def stacked(self) -> np.ndarray:
        """Gamma = (c00, c01, gamma')'."""
        return np.concatenate([self.c0, self.gamma])

    def relabeled(self) -> "TransitionParams":
        """
        Parameters after swapping the regime labels.

        Pr(S'_t=1|S'_{t-1}=i) = 1 - Phi(c_{0,1-i} + gamma'w) = Phi(-c_{0,1-i} - gamma'w).
        """
        return TransitionParams(-self.c0[::-1], -self.gamma)


@dataclass(frozen=True)
class StatePath:
    """
    Regime indicators and latent probit utilities.

    Attributes:
        s: length-T_eff array over {0, 1}
        zstar: length-(T_eff - 1) latent utilities for periods 2..T_eff;
               positive exactly when s_t = 1
    """

    s: np.ndarray
    zstar: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "s", np.asarray(self.s, dtype=np.int64))
        object.__setattr__(self, "zstar", np.asarray(self.zstar, dtype=float))

    @classmethod
    def from_states(cls, s: np.ndarray) -> "StatePath":
        """Path with utilities +-1 consistent with the transitions."""
        s = np.asarray(s, dtype=np.int64)
        return cls(s, np.where(s[1:] == 1, 1.0, -1.0))

    def relabeled(self) -> "StatePath":
        return StatePath(1 - self.s, -self.zstar)

    @property
    def counts(self) -> Tuple[int, int]:
        n1 = int(self.s.sum())
        return self.s.size - n1, n1


# ========================================
# TRANSITION PROBABILITIES
# ========================================

def transition_matrix(params: TransitionParams, w_t: np.ndarray) -> np.ndarray:
    """
    2 x 2 matrix P_t with rows (1 - p_i, p_i), p_i = Phi(c_{0i} + gamma' w_t).
    """
    p_enter = stats.norm.cdf(params.c0 + float(np.dot(params.gamma, np.atleast_1d(w_t))))
    return np.column_stack([1.0 - p_enter, p_enter])


def transition_matrices(params: TransitionParams, w: np.ndarray) -> np.ndarray:
    """P_t for every row of the T x r matrix w; shape (T, 2, 2)."""
    w = np.atleast_2d(w)
    index = w @ params.gamma
    p_enter = stats.norm.cdf(params.c0[None, :] + index[:, None])
    return np.stack([1.0 - p_enter, p_enter], axis=2)


def ergodic_distribution(pmats: np.ndarray) -> np.ndarray:
    """Stationary distribution of the time-averaged transition matrix."""
    p_bar = np.mean(pmats, axis=0)
    p01, p10 = p_bar[0, 1], p_bar[1, 0]
    if p01 + p10 <= 0:
        return np.array([0.5, 0.5])
    pi1 = p01 / (p01 + p10)
    return np.array([1.0 - pi1, pi1])


# ========================================
# FILTERING AND SAMPLING
# ========================================

def hamilton_filter(loglik: np.ndarray, pmats: np.ndarray, init: np.ndarray) -> Tuple[np.ndarray, float]:
    """
    Filtered regime probabilities and the log marginal likelihood.

    xi_{t|t}(j) is proportional to f_t(j) * sum_i p_{ij,t} xi_{t-1|t-1}(i);
    at t = 0 the prediction is `init`.

    Args:
        loglik: T x 2 regime log likelihoods
        pmats: T x 2 x 2 transition matrices (row = previous state)
        init: distribution of the first state

    Returns:
        (filtered T x 2, total log likelihood)

    Raises:
        NumericalError: a period where no regime has positive probability
    """
    loglik = np.asarray(loglik, dtype=float)
    T = loglik.shape[0]
    if pmats.shape != (T, 2, 2):
        raise DimensionError(f"pmats must have shape {(T, 2, 2)}, got {pmats.shape}")
    filtered = np.empty((T, 2))
    total = 0.0
    predicted = np.asarray(init, dtype=float)
    with np.errstate(divide="ignore"):
        for t in range(T):
            if t > 0:
                predicted = filtered[t - 1] @ pmats[t]
            log_joint = np.log(predicted) + loglik[t]
            norm = logsumexp(log_joint)
            if not np.isfinite(norm):
                raise NumericalError(f"filter underflow: no regime has positive probability at t={t}", block="states", t=t)
            filtered[t] = np.exp(log_joint - norm)
            total += norm
    return filtered, float(total)


def ffbs_sample(filtered: np.ndarray, pmats: np.ndarray, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """
    Draw regime paths backwards from the filtered probabilities.

    S_T ~ xi_{T|T}; then Pr(S_t = i | S_{t+1} = j) is proportional to
    p_{ij,t+1} xi_{t|t}(i).

    Args:
        size: number of independent paths; None returns one path

    Returns:
        int array of shape (T,) or (size, T)
    """
    T = filtered.shape[0]
    n = 1 if size is None else size
    u = rng.random((n, T))
    paths = np.empty((n, T), dtype=np.int64)
    paths[:, T - 1] = (u[:, T - 1] < filtered[T - 1, 1]).astype(np.int64)
    for t in range(T - 2, -1, -1):
        nxt = paths[:, t + 1]
        # unnormalized weights of S_t = 0 and S_t = 1 given S_{t+1}
        w0 = pmats[t + 1, 0, nxt] * filtered[t, 0]
        w1 = pmats[t + 1, 1, nxt] * filtered[t, 1]
        paths[:, t] = (u[:, t] * (w0 + w1) < w1).astype(np.int64)
    return paths[0] if size is None else paths


# ========================================
# PROBIT STEP
# ========================================

def probit_design(s: np.ndarray, w: np.ndarray, with_gamma: bool = True) -> np.ndarray:
    """Rows (1{S_{t-1}=0}, 1{S_{t-1}=1}, w_t') for t = 2..T."""
    prev = np.asarray(s)[:-1]
    columns = [(prev == 0).astype(float), (prev == 1).astype(float)]
    design = np.column_stack(columns)
    if with_gamma:
        design = np.hstack([design, np.atleast_2d(w)[1:]])
    return design


def draw_transition_params(
    states: StatePath,
    w: np.ndarray,
    v_gamma: float,
    rng: np.random.Generator,
    current: Optional[TransitionParams] = None,
    fix_gamma: bool = False,
) -> Tuple[TransitionParams, np.ndarray]:
    """
    One data-augmentation step for the probit transition equation.

    First z*_t | Gamma, S is drawn from N(c_{0,S_{t-1}} + gamma'w_t, 1)
    truncated to (0, inf) when S_t = 1 and (-inf, 0] when S_t = 0. Then
    Gamma | z* is drawn from its Gaussian posterior under N(0, v_gamma I).

    Args:
        states: current regime path
        w: T_eff x r cointegration errors
        current: parameters conditioning the z* draw (zeros if None)
        fix_gamma: pin gamma at 0 (fixed transition probabilities)

    Returns:
        (new parameters, new z*)

    Raises:
        NumericalError: posterior precision not positive definite
    """
    w = np.atleast_2d(np.asarray(w, dtype=float))
    s = states.s
    if w.shape[0] != s.size:
        raise DimensionError(f"w has {w.shape[0]} rows for {s.size} states")
    r = w.shape[1]
    if current is None:
        current = TransitionParams.zeros(r)

    design = probit_design(s, w, with_gamma=not fix_gamma)
    coef = current.c0 if fix_gamma else current.stacked
    mean = design @ coef
    zstar = sample_truncated_normal(mean, s[1:] == 1, rng)

    precision = design.T @ design + np.eye(design.shape[1]) / v_gamma
    try:
        chol = linalg.cholesky(precision, lower=True)
    except linalg.LinAlgError as e:
        raise NumericalError("transition posterior precision is singular", block="transition") from e
    post_mean = linalg.cho_solve((chol, True), design.T @ zstar)
    # draw = mean + L^-T z has covariance precision^-1
    z = rng.standard_normal(design.shape[1])
    draw = post_mean + linalg.solve_triangular(chol.T, z, lower=False)

    if fix_gamma:
        return TransitionParams(draw, np.zeros(r)), zstar
    return TransitionParams(draw[:2], draw[2:]), zstar


def draw_transition_prior(r: int, v_gamma: float, rng: np.random.Generator) -> TransitionParams:
    """A draw of Gamma from N(0, v_gamma I)."""
    draw = sample_mvn(np.zeros(r + 2), np.sqrt(v_gamma) * np.eye(r + 2), rng)
    return TransitionParams(draw[:2], draw[2:])
