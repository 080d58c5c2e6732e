"""
Convergence diagnostics and posterior report tables.

Every table is a tidy pandas DataFrame so the `report` command can write it
as CSV; percentile columns follow the 16/50/84 convention, and the covariance
summary adds quartiles and the range.
"""

import logging
from typing import Optional

import numpy as np
import pandas as pd
from scipy import stats
from statsmodels.tsa.stattools import acf

from regimecast.draws import BLOCKS, PosteriorDraws
from regimecast.errors import DimensionError, InvalidArgumentError
from regimecast.model import CointegrationBasis, Dataset, build_design

logger = logging.getLogger(__name__)

MIN_DRAWS = 200
MAX_LAG = 100
PERCENTILES = (16, 50, 84)


def inefficiency_factor(series: np.ndarray, max_lag: Optional[int] = None) -> float:
    """
    1 + 2 sum_{l=1}^{L} rho_l with L = min(100, n / 10).

    A constant trace has no autocorrelation to speak of and reports 1.
    """
    series = np.asarray(series, dtype=float)
    n = series.size
    lags = max_lag if max_lag is not None else min(MAX_LAG, n // 10)
    if lags < 1 or np.ptp(series) == 0:
        return 1.0
    rho = acf(series, nlags=lags, fft=True)
    return float(1.0 + 2.0 * np.sum(rho[1:]))


def _percentile_columns(values: np.ndarray, axis: int = 0) -> dict:
    q = np.percentile(values, PERCENTILES, axis=axis)
    return {f"p{p}": q[i] for i, p in enumerate(PERCENTILES)}


def compute_diagnostics(draws: PosteriorDraws) -> pd.DataFrame:
    """
    One row per scalar parameter: block, parameter, mean, sd, p16, p50, p84,
    inefficiency.

    Raises:
        InvalidArgumentError: fewer than 200 retained draws
    """
    if draws.n_draws < MIN_DRAWS:
        raise InvalidArgumentError(f"diagnostics need at least {MIN_DRAWS} draws, got {draws.n_draws}")
    labels = draws.labels()
    frames = []
    for block in BLOCKS:
        if block == "states":
            continue
        values = draws.block(block)
        frame = pd.DataFrame({
            "block": block,
            "parameter": labels[block],
            "mean": values.mean(axis=0),
            "sd": values.std(axis=0, ddof=1),
            **_percentile_columns(values),
            "inefficiency": [inefficiency_factor(values[:, i]) for i in range(values.shape[1])],
        })
        frames.append(frame)
    table = pd.concat(frames, ignore_index=True)
    worst = table.loc[table["inefficiency"].idxmax()]
    logger.info("Largest inefficiency factor %.1f (%s)", worst["inefficiency"], worst["parameter"])
    return table


# ========================================
# REPORT TABLES
# ========================================

def regime_probabilities(draws: PosteriorDraws) -> pd.DataFrame:
    """Posterior probability of regime 1 per effective-sample date."""
    return pd.DataFrame({"date": list(draws.dates), "p_regime1": draws.states.mean(axis=0)})


def _w_paths(draws: PosteriorDraws, data: Dataset) -> np.ndarray:
    """(n, T_eff, r) cointegration errors of every draw."""
    design = build_design(data, CointegrationBasis.zeros(draws.m, draws.r), draws.config)
    if tuple(design.dates) != tuple(draws.dates):
        raise DimensionError("data do not cover the sample the draws were estimated on")
    y1 = design.y_lag[:, :draws.r]
    y2 = design.y_lag[:, draws.r:]
    return y1[None, :, :] + np.einsum("ti,nic->ntc", y2, draws.xi)


def transition_probability_paths(draws: PosteriorDraws, data: Dataset) -> pd.DataFrame:
    """
    Percentiles over draws of Pr(S_t=1|S_{t-1}=0) (p01) and
    Pr(S_t=0|S_{t-1}=1) (p10) per date.
    """
    w = _w_paths(draws, data)
    index = np.einsum("ntc,nc->nt", w, draws.gamma)
    p01 = stats.norm.cdf(draws.c0[:, [0]] + index)
    p10 = stats.norm.sf(draws.c0[:, [1]] + index)
    columns = {"date": list(draws.dates)}
    for name, values in (("p01", p01), ("p10", p10)):
        for key, q in _percentile_columns(values).items():
            columns[f"{name}_{key}"] = q
    return pd.DataFrame(columns)


def cointegration_error_paths(draws: PosteriorDraws, data: Dataset) -> pd.DataFrame:
    """Long table: date, relation, p16, p50, p84 of w_t."""
    w = _w_paths(draws, data)
    frames = []
    for c in range(draws.r):
        frame = pd.DataFrame({"date": list(draws.dates), "relation": f"ec{c + 1}", **_percentile_columns(w[:, :, c])})
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def _vec_coefficients(draws: PosteriorDraws, j: int) -> np.ndarray:
    """(n, k) draws of vec(A_j), column-major like the common mean a."""
    n = draws.n_draws
    return draws.coefficients[:, j].transpose(0, 2, 1).reshape(n, draws.m * draws.K)


def tau_summary(draws: PosteriorDraws) -> pd.DataFrame:
    """Per coefficient: posterior medians of tau, log tau and |a_0 - a_1|."""
    a0, a1 = _vec_coefficients(draws, 0), _vec_coefficients(draws, 1)
    return pd.DataFrame({
        "parameter": draws.labels()["tau"],
        "tau_median": np.median(draws.tau, axis=0),
        "log_tau_median": np.median(np.log(draws.tau), axis=0),
        "abs_diff_median": np.median(np.abs(a0 - a1), axis=0),
    })


def coefficient_distance_summary(draws: PosteriorDraws) -> pd.DataFrame:
    """
    Per regime and coefficient: posterior mean of a_{j,i} - a_i.

    Signed, in vec order, so a positive distance means regime j sits above
    the common mean.
    """
    labels = draws.labels()["a"]
    frames = []
    for j in range(2):
        distance = _vec_coefficients(draws, j) - draws.a
        frames.append(pd.DataFrame({
            "regime": j,
            "parameter": labels,
            "mean_distance": distance.mean(axis=0),
            "sd_distance": distance.std(axis=0),
        }))
    return pd.concat(frames, ignore_index=True)


def covariance_summary(draws: PosteriorDraws) -> pd.DataFrame:
    """
    Per regime: distribution over draws of scalar summaries of Sigma_j.

    Quantities are det, log det, trace, log trace, log of the largest
    eigenvalue and each variance. Columns: min, p16, p25, p50, p75, p84, max.
    """
    rows = []
    for j in range(2):
        sigma = draws.sigma[:, j]
        trace = np.trace(sigma, axis1=1, axis2=2)
        _, log_det = np.linalg.slogdet(sigma)
        quantities = {
            "det": np.exp(log_det),
            "log_det": log_det,
            "trace": trace,
            "log_trace": np.log(trace),
            "log_max_eig": np.log(np.linalg.eigvalsh(sigma)[:, -1]),
        }
        for i, name in enumerate(draws.names):
            quantities[f"var[{name}]"] = sigma[:, i, i]
        for quantity, values in quantities.items():
            q = np.percentile(values, (16, 25, 50, 75, 84))
            rows.append({
                "regime": j, "quantity": quantity, "min": np.min(values),
                "p16": q[0], "p25": q[1], "p50": q[2], "p75": q[3], "p84": q[4], "max": np.max(values),
            })
    return pd.DataFrame(rows)
