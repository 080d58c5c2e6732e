"""
Random variates for the Gibbs sampler.

Generators (and log densities where the tests need them) for the five
distributions the sampler draws from: multivariate normal, Wishart in the
rate parameterization, generalized inverse Gaussian, unit-variance normal
truncated at zero, and Gamma as the GIG boundary case.

Conventions:
- Wishart W(S, s) has density |X|^(s-(m+1)/2) exp(-tr(S X)) and mean s S^-1.
  It maps onto the usual (df, scale) form with df = 2s and scale = (2S)^-1.
- GIG(p, chi, psi) has density proportional to
  x^(p-1) exp(-(chi/x + psi x)/2) on x > 0.

Every function takes an explicit `numpy.random.Generator`; nothing here keeps
state, so concurrent use is safe as long as each worker owns its generator.
"""

import enum
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import linalg, special, stats

from regimecast.errors import DecompositionError, InvalidArgumentError

ArrayLike = Union[float, np.ndarray]


# ========================================
# RANDOM NUMBER STREAMS
# ========================================

def make_rng(seed: Union[int, np.random.SeedSequence, None]) -> np.random.Generator:
    """PCG64 generator for a seed or seed sequence."""
    return np.random.default_rng(seed)


def spawn_rngs(seed: Union[int, np.random.SeedSequence, None], n: int) -> list:
    """
    Independent generators for `n` parallel workers.

    Children of one SeedSequence, so (seed, n) fixes every stream.
    """
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in root.spawn(n)]


# ========================================
# PARAMETER TYPES
# ========================================

@dataclass(frozen=True)
class GigParams:
    """
    Parameters of GIG(p, chi, psi).

    `chi` may be an array; `p` and `psi` broadcast against it.
    """

    p: ArrayLike
    chi: ArrayLike
    psi: ArrayLike

    def validate(self):
        p, chi, psi = np.broadcast_arrays(
            np.asarray(self.p, dtype=float),
            np.asarray(self.chi, dtype=float),
            np.asarray(self.psi, dtype=float),
        )
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(chi)) and np.all(np.isfinite(psi))):
            raise InvalidArgumentError("GIG parameters must be finite")
        if np.any(chi < 0) or np.any(psi < 0):
            raise InvalidArgumentError("GIG requires chi >= 0 and psi >= 0")
        valid = ((chi > 0) & (psi > 0)) | ((chi > 0) & (psi == 0) & (p < 0)) | ((chi == 0) & (psi > 0) & (p > 0))
        if not np.all(valid):
            raise InvalidArgumentError(
                "GIG parameters outside the valid region "
                "(chi>0, psi>0) | (chi>0, psi=0, p<0) | (chi=0, psi>0, p>0)"
            )
        return p, chi, psi


@dataclass(frozen=True)
class WishartParams:
    """Rate parameterization: mean is shape * inv(rate)."""

    shape: float
    rate: np.ndarray

    @property
    def dim(self) -> int:
        return np.atleast_2d(self.rate).shape[0]

    def validate(self):
        rate = np.atleast_2d(np.asarray(self.rate, dtype=float))
        if rate.shape[0] != rate.shape[1]:
            raise InvalidArgumentError(f"Wishart rate must be square, got {rate.shape}")
        if not np.all(np.isfinite(rate)) or not np.isfinite(self.shape):
            raise InvalidArgumentError("Wishart parameters must be finite")
        m = rate.shape[0]
        if self.shape <= (m - 1) / 2:
            raise InvalidArgumentError(f"Wishart shape {self.shape} must exceed (m-1)/2 = {(m - 1) / 2}")
        return rate


class Side(enum.Enum):
    POSITIVE = "positive"
    NONPOSITIVE = "nonpositive"


# ========================================
# SAMPLERS
# ========================================

def sample_mvn(mean: np.ndarray, cov_chol: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Draw from N(mean, L L') given the lower Cholesky factor L.

    A zero factor returns `mean` exactly.
    """
    mean = np.asarray(mean, dtype=float)
    cov_chol = np.atleast_2d(np.asarray(cov_chol, dtype=float))
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov_chol))):
        raise InvalidArgumentError("sample_mvn received non-finite input")
    if cov_chol.shape != (mean.size, mean.size):
        raise InvalidArgumentError(f"cov_chol shape {cov_chol.shape} does not match mean of size {mean.size}")
    z = rng.standard_normal(mean.size)
    return mean + cov_chol @ z


def sample_wishart(params: WishartParams, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """
    Draw X ~ W(rate S, shape s).

    Converted to scipy's (df, scale) form with df = 2s and scale = (2S)^-1.

    Returns:
        m x m symmetric positive definite matrix, or (size, m, m) if size is given
    """
    rate = params.validate()
    m = rate.shape[0]
    try:
        rate_chol = linalg.cholesky(2.0 * rate, lower=True)
    except linalg.LinAlgError as e:
        raise DecompositionError("Wishart rate matrix is not positive definite") from e
    # (2S)^-1 through the factor, never a direct inverse
    scale = linalg.cho_solve((rate_chol, True), np.eye(m))
    scale = 0.5 * (scale + scale.T)

    draws = stats.wishart.rvs(df=2.0 * params.shape, scale=scale, size=size or 1, random_state=rng)
    draws = np.asarray(draws, dtype=float).reshape(-1, m, m)
    draws = 0.5 * (draws + np.swapaxes(draws, 1, 2))
    return draws[0] if size is None else draws


def sample_gamma(shape: ArrayLike, rate: ArrayLike, rng: np.random.Generator, size=None) -> np.ndarray:
    """Gamma with rate parameterization (mean shape / rate)."""
    return rng.gamma(shape, 1.0 / np.asarray(rate, dtype=float), size=size)


def sample_gig(params: GigParams, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """
    Draw from GIG(p, chi, psi).

    The interior of the parameter region goes through scipy's `geninvgauss`
    (ratio-of-uniforms, with mode shift where the shape calls for it) on the
    standardized form GIG(p, b) with b = sqrt(chi psi), rescaled by
    sqrt(chi / psi). The two boundaries are handled directly:
    chi = 0 is Gamma(p, rate psi/2), psi = 0 is the reciprocal of
    Gamma(-p, rate chi/2).

    Args:
        params: parameters; chi may be a vector of independent settings
        size: number of draws for scalar parameters

    Returns:
        Strictly positive draws, shaped like the broadcast parameters
        (or `size` for scalar parameters)
    """
    p, chi, psi = params.validate()

    if p.ndim == 0:
        return _gig_scalar(float(p), float(chi), float(psi), rng, size)

    if size is not None:
        raise InvalidArgumentError("size is only supported with scalar GIG parameters")
    out = np.empty(p.shape)
    gamma_edge = chi == 0
    inv_gamma_edge = psi == 0
    interior = ~(gamma_edge | inv_gamma_edge)

    if np.any(gamma_edge):
        out[gamma_edge] = sample_gamma(p[gamma_edge], psi[gamma_edge] / 2.0, rng)
    if np.any(inv_gamma_edge):
        out[inv_gamma_edge] = 1.0 / sample_gamma(-p[inv_gamma_edge], chi[inv_gamma_edge] / 2.0, rng)
    if np.any(interior):
        out[interior] = _gig_interior(p[interior], chi[interior], psi[interior], rng)
    return _positive(out)


def _gig_interior(p: np.ndarray, chi: np.ndarray, psi: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # one geninvgauss call per distinct (p, chi, psi); scipy draws array parameters element by element
    triples = np.stack([p, chi, psi], axis=1)
    unique, inverse = np.unique(triples, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    out = np.empty(p.shape)
    for g, (p_g, chi_g, psi_g) in enumerate(unique):
        members = inverse == g
        out[members] = stats.geninvgauss.rvs(
            p_g, np.sqrt(chi_g * psi_g), scale=np.sqrt(chi_g / psi_g), size=int(members.sum()), random_state=rng
        )
    return out


def _gig_scalar(p: float, chi: float, psi: float, rng: np.random.Generator, size) -> np.ndarray:
    if chi == 0:
        draws = sample_gamma(p, psi / 2.0, rng, size=size)
    elif psi == 0:
        draws = 1.0 / sample_gamma(-p, chi / 2.0, rng, size=size)
    else:
        draws = stats.geninvgauss.rvs(p, np.sqrt(chi * psi), scale=np.sqrt(chi / psi), size=size, random_state=rng)
    return _positive(np.asarray(draws, dtype=float))


def _positive(x: np.ndarray) -> np.ndarray:
    # Gamma draws with tiny shape can underflow to exactly zero
    return np.maximum(x, np.finfo(float).tiny)


def sample_truncated_normal(
    mu: ArrayLike,
    side: Union[Side, np.ndarray, Sequence[bool]],
    rng: np.random.Generator,
    size: Optional[int] = None,
) -> np.ndarray:
    """
    Draw from N(mu, 1) truncated to (0, inf) or (-inf, 0].

    Args:
        mu: location(s)
        side: a `Side` for every draw, or a boolean array (True = positive)
              aligned with `mu`
        size: number of draws for scalar `mu`

    scipy's `truncnorm` samples the far tails without rejection loops, so
    |mu| of 8 and beyond are fine.
    """
    mu = np.asarray(mu, dtype=float)
    if not np.all(np.isfinite(mu)):
        raise InvalidArgumentError("truncated normal location must be finite")
    if isinstance(side, Side):
        positive = np.full(mu.shape, side is Side.POSITIVE)
    else:
        positive = np.asarray(side, dtype=bool)
    lower = np.where(positive, -mu, -np.inf)
    upper = np.where(positive, np.inf, -mu)
    draws = stats.truncnorm.rvs(lower, upper, loc=mu, scale=1.0, size=size, random_state=rng)
    draws = np.asarray(draws, dtype=float)
    # Keep the support exact at the boundary
    return np.where(np.broadcast_to(positive, draws.shape), np.maximum(draws, np.nextafter(0.0, 1.0)), np.minimum(draws, 0.0))


# ========================================
# DENSITIES
# ========================================

def gig_logpdf(x: ArrayLike, params: GigParams) -> np.ndarray:
    """
    Normalized log density of GIG(p, chi, psi) at x > 0.

    Interior normalizer: 2 K_p(sqrt(chi psi)) (chi/psi)^(p/2), with the Bessel
    function evaluated through the exponentially scaled `kve`.
    """
    p, chi, psi = params.validate()
    x = np.asarray(x, dtype=float)
    if np.all(chi == 0):
        return stats.gamma.logpdf(x, a=p, scale=2.0 / psi)
    if np.all(psi == 0):
        return stats.invgamma.logpdf(x, a=-p, scale=chi / 2.0)
    omega = np.sqrt(chi * psi)
    log_bessel = np.log(special.kve(p, omega)) - omega
    log_norm = 0.5 * p * np.log(psi / chi) - np.log(2.0) - log_bessel
    return log_norm + (p - 1.0) * np.log(x) - 0.5 * (chi / x + psi * x)


def wishart_logpdf(x: np.ndarray, params: WishartParams) -> float:
    """Log density of W(rate S, shape s) at x."""
    rate = params.validate()
    scale = linalg.inv(2.0 * rate)
    return float(stats.wishart.logpdf(x, df=2.0 * params.shape, scale=0.5 * (scale + scale.T)))


def truncated_normal_logpdf(x: ArrayLike, mu: float, side: Side) -> np.ndarray:
    """Log density of N(mu, 1) truncated at zero, on the chosen side."""
    x = np.asarray(x, dtype=float)
    if side is Side.POSITIVE:
        log_mass = stats.norm.logsf(-mu)
        inside = x > 0
    else:
        log_mass = stats.norm.logcdf(-mu)
        inside = x <= 0
    return np.where(inside, stats.norm.logpdf(x - mu) - log_mass, -np.inf)
