"""
Forward simulation of the two-regime VECM with probit transitions.

Used for test fixtures, recovery studies and the `simulate` command.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from regimecast.data_loader import quarterly_dates
from regimecast.errors import DimensionError, ExplosivePathError, InvalidArgumentError
from regimecast.model import CointegrationBasis, Dataset, RegimeParams
from regimecast.statefilter import TransitionParams, transition_matrix

logger = logging.getLogger(__name__)

SPECTRAL_RADIUS_MAX = 1.02
OVERFLOW_BOUND = 1e10


def levels_companion(params: RegimeParams, basis: CointegrationBasis, P: int) -> np.ndarray:
    """
    Companion matrix of the levels VAR(P+1) implied by one regime.

    Phi_1 = I + lambda b' + B_1, Phi_p = B_p - B_{p-1}, Phi_{P+1} = -B_P.
    """
    lam, lags, _ = params.split(basis.r, P)
    m = lam.shape[0]
    phis = [np.eye(m) + lam @ basis.b.T + lags[0]]
    phis += [lags[p] - lags[p - 1] for p in range(1, P)]
    phis.append(-lags[P - 1])
    order = P + 1
    companion = np.zeros((m * order, m * order))
    companion[:m] = np.hstack(phis)
    companion[m:, :-m] = np.eye(m * (order - 1))
    return companion


@dataclass(frozen=True)
class TrueParams:
    """
    Parameters of a simulated MS-VECM.

    Attributes:
        regimes: (regime 0, regime 1)
        basis: cointegration basis b = (I_r, Xi')'
        transition: probit transition parameters
        initial_levels: (P+1) x m pre-sample levels, oldest first
        P: lags of the differences
        include_intercept: whether A_j carries a constant column
    """

    regimes: Tuple[RegimeParams, RegimeParams]
    basis: CointegrationBasis
    transition: TransitionParams
    initial_levels: np.ndarray
    P: int
    include_intercept: bool = True
    names: Optional[Sequence[str]] = None

    def __post_init__(self):
        m, r = self.basis.m, self.basis.r
        K = r + m * self.P + int(self.include_intercept)
        for j, params in enumerate(self.regimes):
            if params.a.shape != (m, K):
                raise DimensionError(f"A_{j} must be {(m, K)}, got {params.a.shape}")
            if params.h.shape != (m, m):
                raise DimensionError(f"H_{j} must be {(m, m)}, got {params.h.shape}")
        if np.shape(self.initial_levels) != (self.P + 1, m):
            raise DimensionError(f"initial_levels must be {(self.P + 1, m)}, got {np.shape(self.initial_levels)}")
        if self.transition.gamma.size != r:
            raise DimensionError(f"gamma must have {r} entries")
        for j in range(2):
            radius = self.spectral_radius(j)
            if radius > SPECTRAL_RADIUS_MAX:
                raise InvalidArgumentError(f"regime {j} is explosive: spectral radius {radius:.4f} > {SPECTRAL_RADIUS_MAX}")

    @property
    def m(self) -> int:
        return self.basis.m

    @property
    def r(self) -> int:
        return self.basis.r

    def spectral_radius(self, j: int) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(levels_companion(self.regimes[j], self.basis, self.P)))))

    def variable_names(self) -> Tuple[str, ...]:
        if self.names is not None:
            return tuple(self.names)
        return tuple(f"y{i + 1}" for i in range(self.m))


def simulate_msvecm(
    params: TrueParams,
    T: int,
    rng: np.random.Generator,
    state_rng: Optional[np.random.Generator] = None,
    initial_state: int = 0,
    start: str = "1990-Q1",
) -> Tuple[Dataset, np.ndarray]:
    """
    Simulate T level observations.

    The first P+1 rows are the initial levels; each later row t draws
    S_t from P_t(S_{t-1}) with w_t = b'y_{t-1}, then
    dy_t = A_{S_t} x_t + H_{S_t} eta_t. S before the first simulated row
    is `initial_state`.

    Shocks come from `rng` and the regime uniforms from `state_rng`
    (defaults to `rng`); both are drawn up front so that fixing one stream
    fixes its draws regardless of the other.

    Returns:
        (levels dataset, states of the T - P - 1 simulated rows)

    Raises:
        ExplosivePathError: some |y| exceeds 1e10
    """
    P, m = params.P, params.m
    n_sim = T - P - 1
    if n_sim < 1:
        raise DimensionError(f"need T > P + 1 = {P + 1}, got T={T}")
    state_rng = rng if state_rng is None else state_rng
    eta = rng.standard_normal((n_sim, m))
    uniforms = state_rng.random(n_sim)

    y = np.empty((T, m))
    y[:P + 1] = params.initial_levels
    b = params.basis.b
    states = np.empty(n_sim, dtype=np.int64)
    prev = initial_state
    for i in range(n_sim):
        t = P + 1 + i
        w = b.T @ y[t - 1]
        p_enter = transition_matrix(params.transition, w)[prev, 1]
        s = int(uniforms[i] < p_enter)
        lagged = [y[t - p] - y[t - p - 1] for p in range(1, P + 1)]
        x = np.concatenate([w] + lagged + ([np.ones(1)] if params.include_intercept else []))
        regime = params.regimes[s]
        y[t] = y[t - 1] + regime.a @ x + regime.h @ eta[i]
        if not np.all(np.abs(y[t]) <= OVERFLOW_BOUND):
            raise ExplosivePathError(f"simulated levels exceed {OVERFLOW_BOUND:g} at t={t}", block="simulate", t=t)
        states[i] = s
        prev = s

    dataset = Dataset(y, params.variable_names(), quarterly_dates(T, start))
    logger.debug("Simulated %d periods, %d in regime 1", n_sim, int(states.sum()))
    return dataset, states


def default_test_params() -> TrueParams:
    """
    Canonical small fixture: m=3, r=1, P=1 with an intercept.

    b = (1, -1, 0)'. Loadings lambda_0 = (-0.15, 0.05, 0) and
    lambda_1 = (-0.45, 0.05, 0.25) differ in two entries; the lag matrix
    B_1 = [[.20, .05, 0], [0, .30, 0], [.05, 0, .20]] is shared.
    Intercepts c_0 = (.10, -.05, .05), c_1 = (-.10, .30, .05), so the second
    equation identifies regime 1. Sigma_0 = 0.25 [[1, .3, 0], [.3, 1, 0],
    [0, 0, 1]] and Sigma_1 = 4 Sigma_0. Transitions use c0 = (-1.5, 1.0),
    gamma = 0.2. Pre-sample levels are zero.
    """
    basis = CointegrationBasis(np.array([[-1.0], [0.0]]))
    b1 = np.array([[0.20, 0.05, 0.0], [0.0, 0.30, 0.0], [0.05, 0.0, 0.20]])
    sigma0 = 0.25 * np.array([[1.0, 0.3, 0.0], [0.3, 1.0, 0.0], [0.0, 0.0, 1.0]])
    lam = (np.array([[-0.15], [0.05], [0.0]]), np.array([[-0.45], [0.05], [0.25]]))
    intercept = (np.array([[0.10], [-0.05], [0.05]]), np.array([[-0.10], [0.30], [0.05]]))
    regimes = tuple(
        RegimeParams.from_sigma(np.hstack([lam[j], b1, intercept[j]]), sigma0 * (1.0 if j == 0 else 4.0))
        for j in range(2)
    )
    return TrueParams(
        regimes=regimes,
        basis=basis,
        transition=TransitionParams(np.array([-1.5, 1.0]), np.array([0.2])),
        initial_levels=np.zeros((2, 3)),
        P=1,
        include_intercept=True,
    )
