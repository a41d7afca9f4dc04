"""Power law versus a diffuse dark-matter annihilation spectrum.

The two models are non-nested, so they are compared through the comprehensive mixture
(1 - η) f(y; φ) + η g(y; θ) with g(y; θ) ∝ y^-1.5 exp(-7.8 y / θ). Detection tests
η = 0 scanning the mass θ; exclusion tests η = 1 scanning the power-law index φ.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import ClassVar

import numpy as np
from pydantic import Field, model_validator
from scipy import integrate

from tohm.constants import QUADRATURE_TOL
from tohm.models.base import Direction
from tohm.models.mixture import MixtureModel, MixtureParams


DM_SUPPORT = (1.0, 100.0)
"""Energy band in GeV."""

DM_SPECTRAL_INDEX = 1.5
DM_CUTOFF_SCALE = 7.8

EXCLUSION_PHI_RANGE = (0.5, 3.0)
"""Scanned range of the power-law index in the exclusion test."""

_CDF_TABLE_SIZE = 8193
"""Nodes of the tabulated dark-matter CDF, spaced evenly in log y."""

CDF_TABLE_TOL = 1e-4
"""Bound on the Kolmogorov distance between the tabulated and the exact dark-matter CDF."""


def _dm_kernel(y: np.ndarray | float, theta: float) -> np.ndarray | float:
    return y**-DM_SPECTRAL_INDEX * np.exp(-DM_CUTOFF_SCALE * y / theta)


@lru_cache(maxsize=4096)
def dm_log_norm(theta: float, lower: float, upper: float) -> float:
    """log k_θ by adaptive quadrature."""
    value, _ = integrate.quad(
        _dm_kernel,
        lower,
        upper,
        args=(theta,),
        epsabs=0.0,
        epsrel=QUADRATURE_TOL,
        limit=200,
    )
    return math.log(value)


@lru_cache(maxsize=256)
def dm_cdf_table(theta: float, lower: float, upper: float) -> tuple[np.ndarray, np.ndarray]:
    """Dark-matter CDF tabulated by the trapezoid rule, as (cdf, y).

    Linear interpolation in the table is the CDF actually sampled by `sample_signal`. Over
    the log-spaced nodes the trapezoid rule is accurate to second order in the relative
    step ln(upper / lower) / 8192, so for θ in [1, 100] that CDF stays within
    `CDF_TABLE_TOL` of the quadrature-normalized one.
    """
    y = np.geomspace(lower, upper, _CDF_TABLE_SIZE)
    cdf = integrate.cumulative_trapezoid(_dm_kernel(y, theta), y, initial=0.0)
    cdf /= cdf[-1]
    return cdf, y


class NonNestedParams(MixtureParams):
    """Simulation parameters of the comprehensive model."""

    theta: float = Field(default=35.0, description="Dark-matter mass parameter in GeV")

    @model_validator(mode="after")
    def _check_mass(self) -> NonNestedParams:
        lower, upper = DM_SUPPORT
        if not lower <= self.theta <= upper:
            raise ValueError(f"theta must lie in [{lower}, {upper}], got {self.theta}")
        return self


class NonNestedModel(MixtureModel):
    """Comprehensive mixture of a power-law source and a dark-matter spectrum."""

    name: ClassVar[str] = "nonnested"
    params_model: ClassVar[type[NonNestedParams]] = NonNestedParams
    supported_directions: ClassVar[tuple[Direction, ...]] = (
        Direction.DETECTION,
        Direction.EXCLUSION,
    )
    support: ClassVar[tuple[float, float]] = DM_SUPPORT
    signal_range: ClassVar[tuple[float, float]] = DM_SUPPORT
    exclusion_range: ClassVar[tuple[float, float] | None] = EXCLUSION_PHI_RANGE

    def signal_logpdf(self, y: np.ndarray, theta: float) -> np.ndarray:
        lower, upper = self.support
        return (
            -DM_SPECTRAL_INDEX * np.log(y)
            - DM_CUTOFF_SCALE * y / theta
            - dm_log_norm(float(theta), lower, upper)
        )

    def sample_signal(self, rng: np.random.Generator, n: int, theta: float) -> np.ndarray:
        """Inverse-CDF draws through `dm_cdf_table`, which bounds their error."""
        cdf, y = dm_cdf_table(float(theta), *self.support)
        return np.interp(rng.random(n), cdf, y)
