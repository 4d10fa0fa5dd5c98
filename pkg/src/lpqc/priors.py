"""Latent priors r(z): sampling and log-density.

Two families, each in a single-mode and a mixture form:

* Gaussian, M=1: N(0, I_d).
* Uniform, M=1: flat on the hypercube [-1/e, 1/e]^d.
* Gaussian, M>1: sum_i c_i N(mu_i, e^{-2} I_d) with uniform weights.
* Uniform,  M>1: uniform over [mu_i - e^{-2}, mu_i + e^{-2}]^d per mode.

Mode centers are drawn once from N(0, I_d) and then frozen; the priors carry
no trainable parameters. Sampling draws the mode index categorically and
then the component, with no stratification.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import philox

SINGLE_MODE_UNIFORM_HALF_WIDTH = 1.0 / np.e
MIXTURE_COMPONENT_STD = np.exp(-1.0)  # Gaussian component std, e^{-1}
MIXTURE_UNIFORM_HALF_WIDTH = np.exp(-2.0)  # hypercube half side, e^{-2}

_FAMILIES = ("gaussian", "uniform")


@dataclass(frozen=True)
class LatentPrior:
    """Frozen prior specification.

    For M=1 ``centers`` is ignored (single mode at the origin with the
    family's canonical scale); for M>1 it must hold the M mode centers.
    """

    family: str
    dim: int
    modes: int = 1
    centers: np.ndarray | None = None
    weights: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise ValueError(f"family must be one of {_FAMILIES}, got {self.family!r}")
        if self.dim < 1 or self.modes < 1:
            raise ValueError("dim and modes must be positive")
        if self.modes > 1:
            if self.centers is None:
                raise ValueError("multimodal prior needs mode centers")
            centers = np.asarray(self.centers, dtype=np.float64)
            if centers.shape != (self.modes, self.dim):
                raise ValueError(
                    f"centers must have shape ({self.modes}, {self.dim}), got {centers.shape}"
                )
            object.__setattr__(self, "centers", centers)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != (self.modes,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise ValueError("weights must be a length-M histogram")
            object.__setattr__(self, "weights", w)

    @property
    def mode_weights(self) -> np.ndarray:
        if self.weights is not None:
            return self.weights
        return np.full(self.modes, 1.0 / self.modes)


def init_mode_centers(dim: int, modes: int, seed: int, stream: int = 0) -> np.ndarray:
    """M i.i.d. standard-normal center vectors; fixed after initialization."""
    rng = philox(seed, stream)
    return rng.standard_normal((modes, dim))


def sample_prior(
    prior: LatentPrior, seed_or_rng: int | np.random.Generator, count: int
) -> np.ndarray:
    """``count`` i.i.d. draws, shape (count, dim). Deterministic given a seed."""
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else philox(seed_or_rng)
    if prior.modes == 1:
        if prior.family == "gaussian":
            return rng.standard_normal((count, prior.dim))
        h = SINGLE_MODE_UNIFORM_HALF_WIDTH
        return rng.uniform(-h, h, size=(count, prior.dim))
    modes = rng.choice(prior.modes, size=count, p=prior.mode_weights)
    centers = prior.centers[modes]
    if prior.family == "gaussian":
        return centers + MIXTURE_COMPONENT_STD * rng.standard_normal((count, prior.dim))
    h = MIXTURE_UNIFORM_HALF_WIDTH
    return centers + rng.uniform(-h, h, size=(count, prior.dim))


def log_density(prior: LatentPrior, z: np.ndarray) -> np.ndarray:
    """log r(z) for a batch of latents, shape (batch,).

    Uniform components return -inf outside their support.
    """
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    d = prior.dim
    if prior.modes == 1:
        if prior.family == "gaussian":
            return -0.5 * np.sum(z**2, axis=1) - 0.5 * d * np.log(2 * np.pi)
        h = SINGLE_MODE_UNIFORM_HALF_WIDTH
        inside = np.all(np.abs(z) <= h, axis=1)
        return np.where(inside, -d * np.log(2 * h), -np.inf)
    w = prior.mode_weights
    if prior.family == "gaussian":
        var = MIXTURE_COMPONENT_STD**2
        sq = ((z[:, None, :] - prior.centers[None, :, :]) ** 2).sum(axis=2)
        logp = -0.5 * sq / var - 0.5 * d * np.log(2 * np.pi * var)
        m = logp.max(axis=1)
        return m + np.log((w[None, :] * np.exp(logp - m[:, None])).sum(axis=1))
    h = MIXTURE_UNIFORM_HALF_WIDTH
    inside = np.all(np.abs(z[:, None, :] - prior.centers[None, :, :]) <= h, axis=2)
    dens = (inside * w[None, :]).sum(axis=1) / (2 * h) ** d
    with np.errstate(divide="ignore"):
        return np.log(dens)
