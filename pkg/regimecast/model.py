"""
MS-VECM data containers and regression form.

This module handles:
- The level dataset and the per-regime parameter containers
- Building the VECM regression form  dy_t = A_j x_t + H_j eta_t  with
  x_t = (w_t', dy_{t-1}', ..., dy_{t-P}' [, 1])'  and  w_t = b' y_{t-1}
- The linear normalization b = (I_r, Xi')'
- Regime-conditional Gaussian log likelihoods
- Residual variances of univariate AR(P) fits (scale of the Wishart prior)

Indexing: levels are rows 0..T-1. The effective sample is rows P+1..T-1
(levels index t = P+2..T in 1-based terms), so every regression row has P
lagged differences and the lagged level available without padding.
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
from scipy import linalg

from regimecast.config import ModelConfig
from regimecast.errors import (
    DecompositionError,
    DegenerateDataWarning,
    DimensionError,
    NumericalError,
)

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class Dataset:
    """
    T x m panel of level observations.

    Attributes:
        levels: T x m matrix y_t
        names: m variable labels, in model ordering
        dates: T period identifiers (quarterly data use "YYYY-Qq")
    """

    levels: np.ndarray
    names: Tuple[str, ...]
    dates: Tuple[str, ...]

    def __post_init__(self):
        levels = np.array(self.levels, dtype=float)
        levels.setflags(write=False)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "dates", tuple(str(d) for d in self.dates))
        if levels.ndim != 2:
            raise DimensionError(f"levels must be a T x m matrix, got shape {levels.shape}")
        if len(self.names) != levels.shape[1]:
            raise DimensionError(f"{len(self.names)} names for {levels.shape[1]} columns")
        if len(self.dates) != levels.shape[0]:
            raise DimensionError(f"{len(self.dates)} dates for {levels.shape[0]} rows")
        if not np.all(np.isfinite(levels)):
            raise DimensionError("dataset contains missing or non-finite values")

    @property
    def T(self) -> int:
        return self.levels.shape[0]

    @property
    def m(self) -> int:
        return self.levels.shape[1]

    def head(self, n: int) -> "Dataset":
        """First n observations (data available at forecast origin n)."""
        return Dataset(self.levels[:n], self.names, self.dates[:n])

    def column(self, name: str) -> np.ndarray:
        return self.levels[:, self.names.index(name)]


@dataclass(frozen=True)
class CointegrationBasis:
    """
    Free coefficients Xi of the normalized long-run matrix b = (I_r, Xi')'.

    xi has shape (m - r) x r; b has full column rank r by construction.
    """

    xi: np.ndarray

    def __post_init__(self):
        xi = np.atleast_2d(np.array(self.xi, dtype=float))
        object.__setattr__(self, "xi", xi)

    @classmethod
    def zeros(cls, m: int, r: int) -> "CointegrationBasis":
        return cls(np.zeros((m - r, r)))

    @property
    def r(self) -> int:
        return self.xi.shape[1]

    @property
    def m(self) -> int:
        return self.xi.shape[0] + self.xi.shape[1]

    @property
    def b(self) -> np.ndarray:
        return np.vstack([np.eye(self.r), self.xi])


@dataclass(frozen=True)
class RegimeParams:
    """
    Coefficients and covariance of one regime.

    Attributes:
        a: m x K matrix A_j; columns are the loadings lambda_j (r), then
           B_1..B_P (m each), then the intercept
        sigma: m x m covariance Sigma_j
        h: lower Cholesky factor with sigma = h h'
    """

    a: np.ndarray
    sigma: np.ndarray
    h: np.ndarray

    @classmethod
    def from_sigma(cls, a: np.ndarray, sigma: np.ndarray) -> "RegimeParams":
        sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
        return cls(np.atleast_2d(np.asarray(a, dtype=float)), sigma, cholesky_lower(sigma, "sigma"))

    def split(self, r: int, P: int):
        """Return (lambda_j, [B_1..B_P], intercept or None)."""
        m = self.a.shape[0]
        lam = self.a[:, :r]
        lags = [self.a[:, r + p * m: r + (p + 1) * m] for p in range(P)]
        intercept = self.a[:, r + P * m] if self.a.shape[1] > r + P * m else None
        return lam, lags, intercept

    def precision(self) -> np.ndarray:
        """Sigma_j^-1 through the Cholesky factor."""
        m = self.sigma.shape[0]
        return linalg.cho_solve((self.h, True), np.eye(m))


@dataclass(frozen=True)
class DesignData:
    """
    Regression form of the data for one cointegration basis.

    Attributes:
        dy: T_eff x m matrix of dy_t
        x: T_eff x K regressors (w_t, lagged differences, optional 1)
        w: T_eff x r cointegration errors b' y_{t-1}
        y_lag: T_eff x m lagged levels y_{t-1}
        dates: T_eff dates of the effective sample
    """

    dy: np.ndarray
    x: np.ndarray
    w: np.ndarray
    y_lag: np.ndarray
    dates: Tuple[str, ...] = field(default=())

    @property
    def T_eff(self) -> int:
        return self.dy.shape[0]

    @property
    def m(self) -> int:
        return self.dy.shape[1]

    @property
    def r(self) -> int:
        return self.w.shape[1]

    @property
    def K(self) -> int:
        return self.x.shape[1]

    @property
    def z(self) -> np.ndarray:
        """Regressors other than the cointegration errors."""
        return self.x[:, self.r:]

    def rebase(self, basis: CointegrationBasis) -> "DesignData":
        """Same data under a new basis: only the w columns change."""
        if basis.r != self.r:
            raise DimensionError(f"basis rank {basis.r} differs from design rank {self.r}")
        w = self.y_lag @ basis.b
        x = np.hstack([w, self.z])
        return DesignData(self.dy, x, w, self.y_lag, self.dates)


# ========================================
# DESIGN CONSTRUCTION
# ========================================

def build_design(data: Dataset, basis: CointegrationBasis, config: ModelConfig) -> DesignData:
    """
    Regression form of the VECM for the given basis.

    The effective sample starts at level row P+1 (0-based) so that the P
    lagged differences and y_{t-1} exist. K = r + m P (+1 with intercept).

    Raises:
        DimensionError: T <= P + 2, or basis/config/data dimensions disagree
    """
    y = data.levels
    T, m = y.shape
    P = config.P
    if m != config.m:
        raise DimensionError(f"data have m={m} variables but config says m={config.m}")
    if basis.xi.shape != (m - config.r, config.r):
        raise DimensionError(f"xi must be {(m - config.r, config.r)}, got {basis.xi.shape}")
    if T <= P + 2:
        raise DimensionError(f"need T > P + 2 observations, got T={T} with P={P}")

    diffs = np.diff(y, axis=0)  # diffs[i] = y[i+1] - y[i]
    rows = np.arange(P + 1, T)
    dy = diffs[rows - 1]
    y_lag = y[rows - 1]
    w = y_lag @ basis.b
    lagged = [diffs[rows - 1 - p] for p in range(1, P + 1)]
    columns = [w] + lagged
    if config.include_intercept:
        columns.append(np.ones((rows.size, 1)))
    x = np.hstack(columns)
    dates = tuple(data.dates[i] for i in rows)
    return DesignData(dy=dy, x=x, w=w, y_lag=y_lag, dates=dates)


def forecast_regressors(data: Dataset, basis: CointegrationBasis, P: int, include_intercept: bool) -> np.ndarray:
    """x_{T+1} built from the last P+1 levels of `data`."""
    y = data.levels
    if y.shape[0] < P + 1:
        raise DimensionError(f"need at least P + 1 = {P + 1} observations")
    diffs = np.diff(y[-(P + 1):], axis=0)[::-1]  # dy_T, dy_{T-1}, ...
    parts = [basis.b.T @ y[-1], diffs.reshape(-1)]
    if include_intercept:
        parts.append(np.ones(1))
    return np.concatenate(parts)


def coefficient_labels(names: Sequence[str], r: int, P: int, include_intercept: bool) -> list:
    """Column labels of A_j: ec1..ecr, then VAR.Lp per lag, then const."""
    labels = [f"ec{i + 1}" for i in range(r)]
    for p in range(1, P + 1):
        labels.extend(f"{name}.L{p}" for name in names)
    if include_intercept:
        labels.append("const")
    return labels


# ========================================
# LIKELIHOOD
# ========================================

def cholesky_lower(matrix: np.ndarray, what: str = "matrix") -> np.ndarray:
    try:
        return linalg.cholesky(matrix, lower=True)
    except linalg.LinAlgError as e:
        raise DecompositionError(f"{what} is not symmetric positive definite") from e


def log_likelihood_regime(dy_t: np.ndarray, x_t: np.ndarray, params: RegimeParams) -> float:
    """
    log N(dy_t; A_j x_t, Sigma_j) through the Cholesky factor.

    Raises:
        DimensionError: shapes disagree
        DecompositionError: sigma not SPD
    """
    dy_t = np.atleast_1d(np.asarray(dy_t, dtype=float))
    x_t = np.atleast_1d(np.asarray(x_t, dtype=float))
    if params.a.shape != (dy_t.size, x_t.size):
        raise DimensionError(f"A has shape {params.a.shape}, expected {(dy_t.size, x_t.size)}")
    chol = cholesky_lower(params.sigma, "sigma")
    resid = dy_t - params.a @ x_t
    u = linalg.solve_triangular(chol, resid, lower=True)
    return float(-0.5 * dy_t.size * LOG_2PI - np.sum(np.log(np.diag(chol))) - 0.5 * u @ u)


def regime_log_likelihoods(design: DesignData, regimes: Sequence[RegimeParams]) -> np.ndarray:
    """T_eff x n_regimes matrix of log N(dy_t; A_j x_t, Sigma_j)."""
    out = np.empty((design.T_eff, len(regimes)))
    m = design.m
    for j, params in enumerate(regimes):
        chol = cholesky_lower(params.sigma, f"sigma of regime {j}")
        resid = design.dy - design.x @ params.a.T
        u = linalg.solve_triangular(chol, resid.T, lower=True)
        out[:, j] = -0.5 * m * LOG_2PI - np.sum(np.log(np.diag(chol))) - 0.5 * np.sum(u * u, axis=0)
    return out


# ========================================
# PRIOR SCALES
# ========================================

def ols_residual_variances(data: Dataset, P: int) -> np.ndarray:
    """
    Residual variance of a univariate AR(P) with intercept per variable.

    Fit by least squares on levels; variance = RSS / (n - P - 1).

    Returns:
        m-vector of variances; constant series report 0 and raise a
        DegenerateDataWarning.

    Raises:
        NumericalError: rank-deficient regressors for a non-constant series
    """
    y = data.levels
    T, m = y.shape
    if T <= P + 2:
        raise DimensionError(f"need T > P + 2 observations, got T={T} with P={P}")
    n = T - P
    out = np.empty(m)
    for i in range(m):
        series = y[:, i]
        if np.ptp(series) == 0:
            warnings.warn(f"series {data.names[i]!r} is constant; residual variance is 0", DegenerateDataWarning, stacklevel=2)
            out[i] = 0.0
            continue
        regressors = np.column_stack([np.ones(n)] + [series[P - p: T - p] for p in range(1, P + 1)])
        target = series[P:]
        coef, _, rank, _ = np.linalg.lstsq(regressors, target, rcond=None)
        if rank < P + 1:
            raise NumericalError(
                f"AR({P}) regressors for {data.names[i]!r} are rank deficient (rank {rank} < {P + 1})",
                block="ols_residual_variances",
            )
        resid = target - regressors @ coef
        out[i] = float(resid @ resid) / (n - P - 1)
    return out
