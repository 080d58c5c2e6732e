"""
Retained posterior draws of one or more chains and their on-disk format.

A draws directory holds one CSV per parameter block (one row per retained
draw, a header naming every coefficient) plus `draws.json` with the config
echo, seed, variable names, effective-sample dates and chain notes.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from regimecast.config import ModelConfig
from regimecast.errors import DimensionError, ParseError
from regimecast.model import CointegrationBasis, RegimeParams, coefficient_labels
from regimecast.statefilter import TransitionParams

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
BLOCKS = ("coefficients", "sigma", "a", "tau", "s_common", "xi", "transition", "states")


@dataclass
class PosteriorDraws:
    """
    Stacked retained draws; the leading axis indexes draws.

    Attributes:
        coefficients: (n, 2, m, K) regime coefficient matrices A_j
        sigma: (n, 2, m, m) regime covariances Sigma_j
        a: (n, k) common means, vec(A) order (element (i, c) at c*m + i)
        tau: (n, k) shrinkage scales
        s_common: (n, m, m) common Wishart scale S
        xi: (n, m - r, r) free cointegration coefficients
        c0: (n, 2) probit intercepts
        gamma: (n, r) probit loadings
        states: (n, T_eff) regime paths over the effective sample
        names: variable names
        dates: effective-sample dates
        config: model configuration the chain ran with
        seed: seed of the run, when known
        notes: chain bookkeeping (rejections, empty-regime sweeps, floors)
    """

    coefficients: np.ndarray
    sigma: np.ndarray
    a: np.ndarray
    tau: np.ndarray
    s_common: np.ndarray
    xi: np.ndarray
    c0: np.ndarray
    gamma: np.ndarray
    states: np.ndarray
    names: Sequence[str]
    dates: Sequence[str]
    config: ModelConfig
    seed: Optional[int] = None
    notes: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        n = self.coefficients.shape[0]
        for name in ("sigma", "a", "tau", "s_common", "xi", "c0", "gamma", "states"):
            if getattr(self, name).shape[0] != n:
                raise DimensionError(f"block {name!r} has {getattr(self, name).shape[0]} draws, expected {n}")
        self.names = tuple(self.names)
        self.dates = tuple(self.dates)

    @property
    def n_draws(self) -> int:
        return self.coefficients.shape[0]

    @property
    def m(self) -> int:
        return self.coefficients.shape[2]

    @property
    def K(self) -> int:
        return self.coefficients.shape[3]

    @property
    def r(self) -> int:
        return self.xi.shape[2]

    @property
    def variant(self) -> str:
        return self.config.variant

    def regime(self, i: int, j: int) -> RegimeParams:
        return RegimeParams.from_sigma(self.coefficients[i, j], self.sigma[i, j])

    def basis(self, i: int) -> CointegrationBasis:
        return CointegrationBasis(self.xi[i])

    def transition(self, i: int) -> TransitionParams:
        return TransitionParams(self.c0[i], self.gamma[i])

    # ========================================
    # PERSISTENCE
    # ========================================

    def labels(self) -> Dict[str, List[str]]:
        """Column labels of every block, as written by `save`."""
        m, r = self.m, self.r
        cols = coefficient_labels(self.names, r, self.config.P, self.config.include_intercept)
        coef = [f"A{j}[{eq},{c}]" for j in range(2) for eq in self.names for c in cols]
        sigma = [f"Sigma{j}[{u},{v}]" for j in range(2) for u in self.names for v in self.names]
        vec = [f"{self.names[i]}:{cols[c]}" for c in range(len(cols)) for i in range(m)]
        return {
            "coefficients": coef,
            "sigma": sigma,
            "a": vec,
            "tau": vec,
            "s_common": [f"S[{u},{v}]" for u in self.names for v in self.names],
            "xi": [f"xi[{self.names[r + i]},ec{c + 1}]" for i in range(m - r) for c in range(r)],
            "transition": ["c00", "c01"] + [f"gamma{c + 1}" for c in range(r)],
            "states": list(self.dates),
        }

    def block(self, name: str) -> np.ndarray:
        n = self.n_draws
        if name == "transition":
            return np.hstack([self.c0, self.gamma])
        return getattr(self, name).reshape(n, -1)

    def save(self, directory: Union[str, Path]):
        """Write one CSV per block plus draws.json into `directory`."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        labels = self.labels()
        for name in BLOCKS:
            frame = pd.DataFrame(self.block(name), columns=labels[name])
            if name == "states":
                frame = frame.astype(np.int64)
            frame.to_csv(directory / f"{name}.csv", index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        meta = {
            "config": self.config.model_dump(mode="json"),
            "seed": self.seed,
            "names": list(self.names),
            "dates": list(self.dates),
            "n_draws": self.n_draws,
            "notes": dict(sorted(self.notes.items())),
        }
        with open(directory / "draws.json", "w", encoding="utf-8") as f:
            json.dump(meta, f, indent=2, sort_keys=True)
        logger.info("Saved %d draws to %s", self.n_draws, directory)

    @classmethod
    def load(cls, directory: Union[str, Path]) -> "PosteriorDraws":
        """Read a directory written by `save`."""
        directory = Path(directory)
        meta_path = directory / "draws.json"
        if not meta_path.exists():
            raise ParseError(f"no draws.json in {directory}")
        with open(meta_path, "r", encoding="utf-8") as f:
            meta = json.load(f)
        config = ModelConfig.model_validate(meta["config"])
        m, r, K = config.m, config.r, config.K
        blocks = {}
        for name in BLOCKS:
            path = directory / f"{name}.csv"
            if not path.exists():
                raise ParseError(f"missing draws block {path}")
            blocks[name] = pd.read_csv(path, float_precision="round_trip").to_numpy()
        n = blocks["coefficients"].shape[0]
        transition = blocks["transition"].astype(float)
        return cls(
            coefficients=blocks["coefficients"].astype(float).reshape(n, 2, m, K),
            sigma=blocks["sigma"].astype(float).reshape(n, 2, m, m),
            a=blocks["a"].astype(float),
            tau=blocks["tau"].astype(float),
            s_common=blocks["s_common"].astype(float).reshape(n, m, m),
            xi=blocks["xi"].astype(float).reshape(n, m - r, r),
            c0=transition[:, :2],
            gamma=transition[:, 2:],
            states=blocks["states"].astype(np.int64),
            names=meta["names"],
            dates=meta["dates"],
            config=config,
            seed=meta.get("seed"),
            notes=meta.get("notes", {}),
        )

    @classmethod
    def concat(cls, parts: Sequence["PosteriorDraws"]) -> "PosteriorDraws":
        """Stack draws of several chains in the given order; notes are summed."""
        if not parts:
            raise DimensionError("nothing to concatenate")
        first = parts[0]
        notes: Dict[str, int] = {}
        for part in parts:
            if part.config != first.config or part.dates != first.dates:
                raise DimensionError("chains were run on different configurations or samples")
            for key, value in part.notes.items():
                notes[key] = notes.get(key, 0) + value
        stacked = {
            name: np.concatenate([getattr(p, name) for p in parts], axis=0)
            for name in ("coefficients", "sigma", "a", "tau", "s_common", "xi", "c0", "gamma", "states")
        }
        return cls(**stacked, names=first.names, dates=first.dates, config=first.config, seed=first.seed, notes=notes)
