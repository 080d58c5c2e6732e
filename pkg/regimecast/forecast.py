"""
One-step-ahead density forecasts and their real-time evaluation.

This module handles:
- The Rao-Blackwellized predictive mixture of the regime-switching VECM
- Log predictive scores of the target variable
- Benchmarks: conjugate Minnesota BVAR in levels, flat-prior AR(1), random walk
- The recursive exercise over a vintage store and its LPS report

The VECM predicts dy_{T+1}; it is scored at realized level minus y_T, which
equals the level density because the shift has unit Jacobian.
"""

import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg, stats
from scipy.special import logsumexp
from tqdm import tqdm

from regimecast.config import RunConfig, Settings, parse_model_id
from regimecast.data_loader import VintageStore
from regimecast.distributions import spawn_rngs
from regimecast.draws import PosteriorDraws
from regimecast.errors import (
    DegenerateDataError,
    DimensionError,
    InvalidArgumentError,
    NonFiniteDensityWarning,
    NumericalError,
)
from regimecast.model import Dataset, forecast_regressors, ols_residual_variances
from regimecast.sampler import run_chain
from regimecast.statefilter import transition_matrix

logger = logging.getLogger(__name__)

VECM_KINDS = {"tvp": "MS-VECM-TVP", "ftp": "MS-VECM-FTP", "linear": "VECM"}
BENCHMARK_KINDS = {"bvar": "BVAR", "ar1": "AR(1)", "rw": "RW"}


# ========================================
# PREDICTIVE DENSITIES
# ========================================

@dataclass(frozen=True)
class PredictiveMixture:
    """
    Predictive density of dy_{T+1}: an equal-weight average over draws of
    two-component Gaussian mixtures.

    Attributes:
        weights: (n, 2) Pr(S_{T+1} = j) per draw
        means: (n, 2, m) component means A_j x_{T+1}
        covs: (n, 2, m, m) component covariances Sigma_j
    """

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        n = self.weights.shape[0]
        if self.means.shape[:2] != (n, 2) or self.covs.shape[:2] != (n, 2):
            raise DimensionError("weights, means and covs must share the draw and regime axes")
        if np.any(self.weights < 0) or np.any(self.weights > 1):
            raise InvalidArgumentError("regime probabilities must lie in [0, 1]")

    @property
    def n_draws(self) -> int:
        return self.weights.shape[0]

    def mean(self) -> np.ndarray:
        """Predictive mean of dy_{T+1}."""
        return np.einsum("nj,nji->i", self.weights, self.means) / self.n_draws


@dataclass(frozen=True)
class UnivariatePredictive:
    """Student-t (df set) or Gaussian (df None) predictive of a level."""

    loc: float
    scale: float
    df: Optional[float] = None

    def logpdf(self, x: float) -> float:
        if self.df is None:
            return float(stats.norm.logpdf(x, loc=self.loc, scale=self.scale))
        return float(stats.t.logpdf(x, df=self.df, loc=self.loc, scale=self.scale))


def predictive_mixture(draws: PosteriorDraws, data: Dataset) -> PredictiveMixture:
    """
    Mixture over retained draws, conditioning on each draw's S_T.

    Per draw: w_{T+1} = b'y_T, weights are row S_T of P_{T+1}, component
    means A_j x_{T+1} and covariances Sigma_j. The linear variant puts all
    weight on its single regime.

    Raises:
        DimensionError: no draws, or data and draws disagree
    """
    if draws.n_draws == 0:
        raise DimensionError("no posterior draws")
    if data.m != draws.m or tuple(data.names) != tuple(draws.names):
        raise DimensionError(f"data variables {data.names} do not match draws {draws.names}")
    if draws.dates and data.dates[-1] != draws.dates[-1]:
        raise DimensionError(f"draws end at {draws.dates[-1]} but data end at {data.dates[-1]}")
    config = draws.config
    n, m = draws.n_draws, draws.m
    weights = np.empty((n, 2))
    means = np.empty((n, 2, m))
    linear = config.variant == "linear"
    for i in range(n):
        x = forecast_regressors(data, draws.basis(i), config.P, config.include_intercept)
        if linear:
            weights[i] = (1.0, 0.0)
        else:
            pmat = transition_matrix(draws.transition(i), x[:config.r])
            weights[i] = pmat[draws.states[i, -1]]
        means[i] = draws.coefficients[i] @ x
    return PredictiveMixture(weights, means, np.array(draws.sigma))


def log_predictive_score(mix: PredictiveMixture, realized: float, target_index: int) -> float:
    """
    log[(1/n) sum_i sum_j w_ij N(realized; mu_ij, Sigma_ij[target, target])].

    A density that is zero or non-finite gives -inf with a warning.
    """
    m = mix.means.shape[2]
    if not 0 <= target_index < m:
        raise InvalidArgumentError(f"target index {target_index} out of range for m={m}")
    loc = mix.means[:, :, target_index]
    scale = np.sqrt(mix.covs[:, :, target_index, target_index])
    with np.errstate(divide="ignore", invalid="ignore"):
        log_dens = stats.norm.logpdf(realized, loc=loc, scale=scale)
        score = logsumexp(log_dens, b=mix.weights) - math.log(mix.n_draws)
    if not np.isfinite(score):
        warnings.warn(f"predictive density at {realized!r} is not positive and finite", NonFiniteDensityWarning, stacklevel=2)
        return -math.inf
    return float(score)


# ========================================
# BENCHMARKS
# ========================================

@dataclass(frozen=True)
class BvarPosterior:
    """Normal-inverse-Wishart posterior of a levels VAR with an intercept."""

    b_mean: np.ndarray
    omega: np.ndarray
    scale: np.ndarray
    df: float
    lags: int


def minnesota_prior(
    sigma_hat2: np.ndarray, lags: int, tightness: float, decay: float, intercept_var: float
) -> Tuple[np.ndarray, np.ndarray, float, np.ndarray]:
    """
    Conjugate Minnesota prior (B0, diag(Omega0), nu0, S0).

    Own first lags center on one, every other coefficient on zero. Lag l of
    variable j gets prior variance tightness^2 / (l^(2 decay) sigma_j^2) times
    the error variance; the intercept gets intercept_var.
    """
    m = sigma_hat2.size
    k = m * lags + 1
    b0 = np.zeros((k, m))
    b0[:m, :m] = np.eye(m)
    omega0 = np.empty(k)
    for lag in range(1, lags + 1):
        omega0[(lag - 1) * m: lag * m] = tightness ** 2 / (lag ** (2.0 * decay) * sigma_hat2)
    omega0[-1] = intercept_var
    nu0 = m + 2.0
    s0 = (nu0 - m - 1.0) * np.diag(sigma_hat2)
    return b0, omega0, nu0, s0


def _var_regressors(levels: np.ndarray, lags: int) -> Tuple[np.ndarray, np.ndarray]:
    T = levels.shape[0]
    y = levels[lags:]
    x = np.hstack([levels[lags - l: T - l] for l in range(1, lags + 1)] + [np.ones((T - lags, 1))])
    return y, x


def bvar_posterior(
    data: Dataset,
    lags: int = 5,
    tightness: float = 0.2,
    decay: float = 1.0,
    intercept_var: float = 100.0,
) -> BvarPosterior:
    """
    Omega_n = (Omega0^-1 + X'X)^-1, B_n = Omega_n (Omega0^-1 B0 + X'Y),
    S_n = S0 + E'E + (B_n - B0)' Omega0^-1 (B_n - B0), nu_n = nu0 + n.

    Raises:
        DimensionError: fewer than lags + 2 observations
        NumericalError: ill-conditioned posterior scale
    """
    if data.T < lags + 2:
        raise DimensionError(f"BVAR({lags}) needs at least {lags + 2} observations, got {data.T}")
    sigma_hat2 = ols_residual_variances(data, lags)
    sigma_hat2 = np.where(sigma_hat2 > 0, sigma_hat2, max(float(np.max(sigma_hat2)), 1.0) * 1e-8)
    b0, omega0, nu0, s0 = minnesota_prior(sigma_hat2, lags, tightness, decay, intercept_var)
    y, x = _var_regressors(data.levels, lags)

    prior_precision = np.diag(1.0 / omega0)
    try:
        chol = linalg.cholesky(prior_precision + x.T @ x, lower=True)
    except linalg.LinAlgError as e:
        raise NumericalError("BVAR posterior precision is not positive definite", block="bvar") from e
    omega_n = linalg.cho_solve((chol, True), np.eye(x.shape[1]))
    b_n = linalg.cho_solve((chol, True), prior_precision @ b0 + x.T @ y)
    resid = y - x @ b_n
    dev = b_n - b0
    s_n = s0 + resid.T @ resid + dev.T @ prior_precision @ dev
    s_n = 0.5 * (s_n + s_n.T)
    if not np.all(np.isfinite(s_n)) or np.linalg.cond(s_n) > 1e14:
        raise NumericalError("BVAR posterior scale is ill-conditioned", block="bvar")
    return BvarPosterior(b_mean=b_n, omega=omega_n, scale=s_n, df=nu0 + y.shape[0], lags=lags)


def bvar_fit_predict(
    data: Dataset,
    target_index: int,
    lags: int = 5,
    tightness: float = 0.2,
    decay: float = 1.0,
    intercept_var: float = 100.0,
) -> UnivariatePredictive:
    """
    Student-t marginal predictive of the target level at T+1.

    df = nu_n - m + 1, location x'B_n, squared scale
    S_n[i, i] (1 + x' Omega_n x) / df.
    """
    post = bvar_posterior(data, lags, tightness, decay, intercept_var)
    m = data.m
    x = np.concatenate([data.levels[-l] for l in range(1, lags + 1)] + [np.ones(1)])
    df = post.df - m + 1.0
    loc = float(x @ post.b_mean[:, target_index])
    scale2 = post.scale[target_index, target_index] * (1.0 + x @ post.omega @ x) / df
    return UnivariatePredictive(loc=loc, scale=math.sqrt(scale2), df=df)


def ar1_posterior(series: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float, np.ndarray]:
    """
    Flat-prior regression y_t = c + rho y_{t-1} + e_t.

    Returns:
        (coefficient mean (c, rho), (X'X)^-1, s^2, X)

    Raises:
        DegenerateDataError: constant series
    """
    series = np.asarray(series, dtype=float)
    if np.ptp(series) == 0:
        raise DegenerateDataError("AR(1) on a constant series", block="ar1")
    x = np.column_stack([np.ones(series.size - 1), series[:-1]])
    y = series[1:]
    xtx = x.T @ x
    try:
        xtx_inv = linalg.inv(xtx)
    except linalg.LinAlgError as e:
        raise DegenerateDataError("AR(1) regressors are collinear", block="ar1") from e
    coef = xtx_inv @ x.T @ y
    resid = y - x @ coef
    s2 = float(resid @ resid) / (y.size - 2)
    if s2 <= 0:
        raise DegenerateDataError("AR(1) fits the series exactly", block="ar1")
    return coef, xtx_inv, s2, x


def univariate_predict(series: np.ndarray, kind: str) -> UnivariatePredictive:
    """
    One-step predictive of a single series.

    ar1: Student-t with n - 2 degrees of freedom and squared scale
         s^2 (1 + x'(X'X)^-1 x).
    rw:  N(y_T, var(dy)) with the sample variance of the differences.

    Raises:
        DimensionError: fewer than 10 observations
        DegenerateDataError: constant series
    """
    series = np.asarray(series, dtype=float)
    if series.size < 10:
        raise DimensionError(f"univariate benchmarks need at least 10 observations, got {series.size}")
    if kind == "rw":
        var = float(np.var(np.diff(series), ddof=1))
        if var <= 0:
            raise DegenerateDataError("random walk on a series with constant differences", block="rw")
        return UnivariatePredictive(loc=float(series[-1]), scale=math.sqrt(var))
    if kind == "ar1":
        coef, xtx_inv, s2, x = ar1_posterior(series)
        x_next = np.array([1.0, series[-1]])
        scale2 = s2 * (1.0 + x_next @ xtx_inv @ x_next)
        return UnivariatePredictive(loc=float(x_next @ coef), scale=math.sqrt(scale2), df=float(x.shape[0] - 2))
    raise InvalidArgumentError(f"unknown univariate benchmark {kind!r}")


# ========================================
# RECURSIVE EXERCISE
# ========================================

@dataclass(frozen=True)
class ModelSpec:
    """A model of the forecast study: kind in tvp|ftp|linear (with rank r) or bvar|ar1|rw."""

    kind: str
    r: Optional[int] = None

    @classmethod
    def parse(cls, text: str) -> "ModelSpec":
        try:
            kind, rank = parse_model_id(text)
        except ValueError as e:
            raise InvalidArgumentError(str(e)) from e
        return cls(kind, rank)

    @property
    def id(self) -> str:
        return f"{self.kind}:{self.r}" if self.r is not None else self.kind

    @property
    def display_name(self) -> str:
        if self.kind in VECM_KINDS:
            return f"{VECM_KINDS[self.kind]} r={self.r}"
        return BENCHMARK_KINDS[self.kind]


def score_model(
    spec: ModelSpec,
    data: Dataset,
    realized: np.ndarray,
    target_index: int,
    config: RunConfig,
    rng: np.random.Generator,
) -> float:
    """Estimate one model on `data` and score the realized target level."""
    y_next = float(realized[target_index])
    if spec.kind == "bvar":
        pred = bvar_fit_predict(
            data, target_index, config.bvar_lags, config.bvar_tightness, config.bvar_decay, config.bvar_intercept_var
        )
        return pred.logpdf(y_next)
    if spec.kind in ("ar1", "rw"):
        return univariate_predict(data.levels[:, target_index], spec.kind).logpdf(y_next)

    n_draws = config.forecast_n_draws or config.n_draws
    n_burn = config.forecast_n_burn if config.forecast_n_burn is not None else min(config.n_burn, n_draws - 1)
    model_config = config.model_part(variant=spec.kind, r=spec.r, n_draws=n_draws, n_burn=n_burn)
    draws = run_chain(data, model_config, rng, progress=False)
    mix = predictive_mixture(draws, data)
    return log_predictive_score(mix, y_next - float(data.levels[-1, target_index]), target_index)


def _score_job(job) -> Tuple[int, int, float]:
    origin_idx, model_idx, spec, data, realized, target_index, config, rng = job
    return origin_idx, model_idx, score_model(spec, data, realized, target_index, config, rng)


class LpsReport:
    """
    Log predictive scores per forecast origin and model.

    `frame` columns: origin, model, name, lps, rel_lps, cum_rel_lps, where
    rel_lps is the difference to the benchmark at the same origin and
    cum_rel_lps its running sum per model.
    """

    COLUMNS = ["origin", "model", "name", "lps", "rel_lps", "cum_rel_lps"]

    def __init__(self, records: List[Dict], models: Sequence[ModelSpec], benchmark: str = "bvar", target: str = ""):
        ids = [s.id for s in models]
        if benchmark not in ids:
            logger.warning("Benchmark %r not among the models; scores are relative to %r", benchmark, ids[0])
            benchmark = ids[0]
        self.benchmark = benchmark
        self.target = target
        self.models = list(models)
        frame = pd.DataFrame(records, columns=["origin", "model", "name", "lps"])
        bench = frame[frame["model"] == benchmark].set_index("origin")["lps"]
        frame["rel_lps"] = frame["lps"] - frame["origin"].map(bench)
        order = {mid: i for i, mid in enumerate(ids)}
        frame = frame.assign(_order=frame["model"].map(order)).sort_values(["_order", "origin"], kind="stable")
        frame["cum_rel_lps"] = frame.groupby("model", sort=False)["rel_lps"].cumsum()
        self.frame = frame.drop(columns="_order").reset_index(drop=True)[self.COLUMNS]

    def origins(self) -> List[str]:
        return sorted(self.frame["origin"].unique())

    def cumulative(self) -> pd.DataFrame:
        """Final cumulative LPS and relative LPS per model, in model order."""
        grouped = self.frame.groupby("model", sort=False)
        out = pd.DataFrame({"name": grouped["name"].first(), "cum_lps": grouped["lps"].sum(), "cum_rel_lps": grouped["rel_lps"].sum()})
        return out.reindex([s.id for s in self.models]).dropna(how="all")

    def summary(self) -> Dict:
        """Table-shaped summary: one row per model with its cumulative scores."""
        cum = self.cumulative()
        rows = [
            {"model": mid, "name": row["name"], "cum_lps": _json_float(row["cum_lps"]), "cum_rel_lps": _json_float(row["cum_rel_lps"])}
            for mid, row in cum.iterrows()
        ]
        return {
            "benchmark": self.benchmark,
            "target": self.target,
            "n_origins": len(self.origins()),
            "first_origin": self.origins()[0] if rows else None,
            "last_origin": self.origins()[-1] if rows else None,
            "models": rows,
        }

    def write(self, csv_path: Union[str, Path], json_path: Optional[Union[str, Path]] = None):
        self.frame.to_csv(csv_path, index=False, float_format="%.17g", lineterminator="\n")
        if json_path is not None:
            with open(json_path, "w", encoding="utf-8") as f:
                json.dump(self.summary(), f, indent=2, sort_keys=True)


def _json_float(value: float):
    return None if not np.isfinite(value) else float(value)


def run_recursive_exercise(
    vintages: VintageStore,
    models: Sequence[Union[str, ModelSpec]],
    config: RunConfig,
    seed: Optional[int] = None,
    benchmark: str = "bvar",
    progress: bool = True,
) -> LpsReport:
    """
    Score every model at every vintage that has a realized value.

    Each (origin, model) pair gets its own generator from one seed sequence,
    so results do not depend on the number of worker processes
    (Settings.THREADS).
    """
    specs = [m if isinstance(m, ModelSpec) else ModelSpec.parse(m) for m in models]
    if not specs:
        raise InvalidArgumentError("no models to evaluate")
    labels = vintages.labels()
    origins = []
    for label in labels:
        realized = vintages.realized(label, config.evaluation)
        if realized is None:
            logger.warning("Skipping vintage %s: no realized value for the next period", label)
            continue
        origins.append((label, vintages.vintages[label], realized))
    if not origins:
        raise InvalidArgumentError("no forecast origin has a realized value")

    first = origins[0][1]
    try:
        target_index = config.target_index(first.names)
    except ValueError as e:
        raise InvalidArgumentError(str(e)) from e
    target = first.names[target_index]
    rngs = spawn_rngs(seed, len(origins) * len(specs))
    jobs = [
        (o, k, spec, data, realized, target_index, config, rngs[o * len(specs) + k])
        for o, (_, data, realized) in enumerate(origins)
        for k, spec in enumerate(specs)
    ]
    logger.info("Recursive exercise: %d origins x %d models, target %s", len(origins), len(specs), target)

    workers = max(1, min(Settings.THREADS, len(jobs)))
    disable = not progress or not logger.isEnabledFor(logging.INFO)
    if workers == 1:
        results = [_score_job(job) for job in tqdm(jobs, desc="forecast", disable=disable)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(tqdm(pool.map(_score_job, jobs), total=len(jobs), desc="forecast", disable=disable))

    records = []
    for o, k, lps in sorted(results, key=lambda res: (res[0], res[1])):
        origin_date = origins[o][1].dates[-1]
        records.append({"origin": origin_date, "model": specs[k].id, "name": specs[k].display_name, "lps": lps})
    return LpsReport(records, specs, benchmark=benchmark, target=target)
