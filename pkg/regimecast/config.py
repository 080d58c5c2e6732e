"""
Configuration Module for regimecast

This module handles:
- Loading environment variables (thread cap, log level)
- The model configuration (lags, rank, prior hyperparameters, MCMC lengths)
- The flat JSON run configuration used by the command line

Two layers:
- `Settings` holds process-wide knobs read from the environment once.
- `ModelConfig` / `RunConfig` are validated pydantic models that travel with
  every estimation run and are echoed into its manifest.
"""

import json
import logging
import os
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, model_validator

logger = logging.getLogger(__name__)

# Load environment variables from .env file
load_dotenv()


def _env_int(name: str, default: int) -> int:
    """Integer environment variable; 0 when it is set but not an integer."""
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        return 0


class Settings:
    """
    Process-wide settings read from the environment.

    Centralizes everything that is not part of a model run so it is easy to
    change in one place.
    """

    # === Parallelism ===
    # Caps worker processes for multiple chains and forecast origins
    THREADS = _env_int("REGIMECAST_THREADS", 1)

    # === Logging ===
    LOG_LEVEL = os.getenv("REGIMECAST_LOG_LEVEL", "INFO").upper()

    # === Empirical defaults ===
    # Ordering matters: the cointegration normalization puts the first r
    # variables on the left-hand side of the long-run relations.
    DEFAULT_VARIABLES = ("HICPXE", "UNEMP", "HICP-EXPEC", "UTILIZ", "OIL", "I3M")
    DEFAULT_TRANSFORMS = {"UTILIZ": "log", "OIL": "log"}

    @classmethod
    def validate(cls) -> bool:
        """Check the environment-derived settings before a run."""
        if cls.THREADS < 1:
            logger.warning("REGIMECAST_THREADS must be an integer >= 1, got %r", os.getenv("REGIMECAST_THREADS"))
            return False
        if not isinstance(logging.getLevelName(cls.LOG_LEVEL), int):
            logger.warning("Unknown REGIMECAST_LOG_LEVEL %r", cls.LOG_LEVEL)
            return False
        return True

    @classmethod
    def print_config(cls):
        """Log the current settings."""
        logger.info("regimecast settings: threads=%d log_level=%s", cls.THREADS, cls.LOG_LEVEL)
        logger.info("default variables: %s", ", ".join(cls.DEFAULT_VARIABLES))


VECM_MODEL_KINDS = ("tvp", "ftp", "linear")
BENCHMARK_MODEL_KINDS = ("bvar", "ar1", "rw")


def parse_model_id(text: str) -> Tuple[str, Optional[int]]:
    """Split a forecast model id (`tvp:3`, `bvar`, ...) into kind and rank."""
    kind, _, rank = str(text).strip().lower().partition(":")
    if kind in VECM_MODEL_KINDS:
        if not rank.isdigit() or int(rank) < 1:
            raise ValueError(f"model {text!r} needs a positive rank, e.g. {kind}:3")
        return kind, int(rank)
    if kind in BENCHMARK_MODEL_KINDS and not rank:
        return kind, None
    raise ValueError(f"unknown model id {text!r}")


def default_forecast_models(m: int) -> List[str]:
    """Every VECM family over the ranks 1..min(m-1, 5), then the benchmarks."""
    ranks = range(1, min(m - 1, 5) + 1)
    return [f"{kind}:{r}" for kind in VECM_MODEL_KINDS for r in ranks] + list(BENCHMARK_MODEL_KINDS)


# Three VECM families over r = 1..5 plus three benchmarks, for six variables
DEFAULT_FORECAST_MODELS = default_forecast_models(6)


class ModelConfig(BaseModel):
    """
    Configuration of one MS-VECM estimation.

    Defaults reproduce the empirical setup: six variables, four lags of the
    differences, an intercept, d0 = d1 = 0.1, 85,000 sweeps of which the
    first 50,000 are burn-in.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    m: int = Field(6, ge=2)
    P: int = Field(4, ge=1)
    r: int = Field(3, ge=1)
    include_intercept: bool = True

    # Shrinkage on regime differences: tau_j ~ G(d0, d1)
    d0: float = Field(0.1, gt=0)
    d1: float = Field(0.1, gt=0)
    # xi ~ N(0, zeta I)
    zeta: float = Field(1.0, gt=0)
    # Gamma = (c00, c01, gamma')' ~ N(0, v_gamma I)
    v_gamma: float = Field(10.0, gt=0)
    n_regimes: Literal[2] = 2

    n_draws: int = Field(85_000, ge=1)
    n_burn: int = Field(50_000, ge=0)
    thin: int = Field(1, ge=1)

    # Index of the variable whose equation identifies the regimes (UNEMP)
    ident_var: int = Field(1, ge=0)
    identification: Literal["permute", "reject"] = "permute"
    ident_statistic: Literal["intercept", "fitted_mean"] = "intercept"

    variant: Literal["tvp", "ftp", "linear"] = "tvp"
    initial_distribution: Literal["uniform", "ergodic"] = "uniform"
    # Denominator in Q = (100 s / q_den) diag(sigma_hat^2); None means q
    q_denominator: Optional[float] = Field(None, gt=0)
    # Prior variance of the coefficients in the linear (one-regime) variant
    linear_prior_var: float = Field(10.0, gt=0)

    @model_validator(mode="after")
    def _check_ranges(self):
        if not 0 < self.r < self.m:
            raise ValueError(f"cointegration rank must satisfy 0 < r < m, got r={self.r}, m={self.m}")
        if self.n_burn >= self.n_draws:
            raise ValueError("n_burn must be smaller than n_draws")
        if self.ident_var >= self.m:
            raise ValueError(f"ident_var {self.ident_var} out of range for m={self.m}")
        return self

    @property
    def K(self) -> int:
        """Number of regressors per equation."""
        return self.r + self.m * self.P + int(self.include_intercept)

    @property
    def k(self) -> int:
        """Number of coefficients per regime, K*m."""
        return self.K * self.m

    @property
    def n_retained(self) -> int:
        return len(range(0, self.n_draws - self.n_burn, self.thin))

    @property
    def s_shape(self) -> float:
        """Shape of the Wishart prior on Sigma_j^-1."""
        return 2.5 + (self.m - 1) / 2

    @property
    def q_shape(self) -> float:
        """Shape of the Wishart prior on the common scale S."""
        return 0.5 + (self.m - 1) / 2


class RunConfig(ModelConfig):
    """
    The flat JSON document used by the command line.

    Adds ingestion (variables, transforms) and forecasting keys on top of the
    model configuration.
    """

    variables: Optional[List[str]] = None
    transforms: Dict[str, Literal["none", "log"]] = Field(default_factory=dict)

    # === Forecasting ===
    target: Union[int, str] = 0
    evaluation: Literal["next_vintage", "final"] = "next_vintage"
    bvar_lags: int = Field(5, ge=1)
    bvar_tightness: float = Field(0.2, gt=0)
    bvar_decay: float = Field(1.0, ge=0)
    bvar_intercept_var: float = Field(100.0, gt=0)
    forecast_models: List[str] = Field(default_factory=lambda: list(DEFAULT_FORECAST_MODELS))
    forecast_n_draws: Optional[int] = Field(None, ge=1)
    forecast_n_burn: Optional[int] = Field(None, ge=0)

    n_chains: int = Field(1, ge=1)

    @model_validator(mode="before")
    @classmethod
    def _default_models_for_m(cls, data):
        if isinstance(data, dict) and data.get("forecast_models") is None:
            m = data.get("m", cls.model_fields["m"].default)
            if isinstance(m, int) and m >= 2:
                data = {**data, "forecast_models": default_forecast_models(m)}
        return data

    @model_validator(mode="after")
    def _check_variables(self):
        if self.variables is not None and len(self.variables) != self.m:
            raise ValueError(f"{len(self.variables)} variables configured but m={self.m}")
        return self

    @model_validator(mode="after")
    def _check_forecast_models(self):
        for text in self.forecast_models:
            _, rank = parse_model_id(text)
            if rank is not None and rank >= self.m:
                raise ValueError(f"model {text!r} needs a rank below m={self.m}")
        n_draws = self.forecast_n_draws or self.n_draws
        if self.forecast_n_burn is not None and self.forecast_n_burn >= n_draws:
            raise ValueError("forecast_n_burn must be smaller than the forecast chain length")
        return self

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.model_validate(json.load(f))

    def to_json(self, path: Union[str, Path]):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.model_dump(mode="json"), f, indent=2, sort_keys=True)

    def model_part(self, **overrides) -> ModelConfig:
        """The ModelConfig fields of this run, optionally overridden."""
        fields = {name: getattr(self, name) for name in ModelConfig.model_fields}
        fields.update(overrides)
        return ModelConfig(**fields)

    def target_index(self, names) -> int:
        """Resolve `target` (index or variable name) against dataset names."""
        if isinstance(self.target, str):
            if self.target not in names:
                raise ValueError(f"target variable {self.target!r} not in {list(names)}")
            return list(names).index(self.target)
        if not 0 <= self.target < len(names):
            raise ValueError(f"target index {self.target} out of range")
        return self.target


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    Settings.print_config()
    Settings.validate()
