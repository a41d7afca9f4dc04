"""Gaussian bump on a truncated power-law background.

The signal is a Gaussian line of relative width `width_scale` (σ = width_scale · θ)
truncated to the energy band. The bump location θ is scanned; under the null the
sample is pure power law.
"""

from __future__ import annotations

import math
from typing import ClassVar

import numpy as np
from pydantic import Field, model_validator
from scipy import special, stats

from tohm.models.base import Direction
from tohm.models.mixture import MixtureModel, MixtureParams


BUMP_SUPPORT = (1.0, 35.0)
"""Energy band in GeV."""


class BumpParams(MixtureParams):
    """Simulation parameters of the bump model."""

    theta: float = Field(default=3.5, description="Bump location in GeV")
    width_scale: float = Field(default=0.1, gt=0.0, description="Relative width σ/θ")

    @model_validator(mode="after")
    def _check_location(self) -> BumpParams:
        lower, upper = BUMP_SUPPORT
        if not lower <= self.theta <= upper:
            raise ValueError(f"theta must lie in [{lower}, {upper}], got {self.theta}")
        return self


class BumpModel(MixtureModel):
    """Dark-matter line search: power-law background plus a truncated Gaussian bump."""

    name: ClassVar[str] = "bump"
    params_model: ClassVar[type[BumpParams]] = BumpParams
    supported_directions: ClassVar[tuple[Direction, ...]] = (Direction.DETECTION,)
    support: ClassVar[tuple[float, float]] = BUMP_SUPPORT
    signal_range: ClassVar[tuple[float, float]] = BUMP_SUPPORT

    @property
    def width_scale(self) -> float:
        return float(self.params.width_scale)  # type: ignore[attr-defined]

    def _truncation(self, theta: float) -> tuple[float, float, float]:
        sigma = self.width_scale * theta
        lower, upper = self.support
        return sigma, (lower - theta) / sigma, (upper - theta) / sigma

    def signal_log_norm(self, theta: float) -> float:
        """log k_θ, k_θ = σ√(2π) [Φ((𝓤 - θ)/σ) - Φ((𝓛 - θ)/σ)]."""
        sigma, a, b = self._truncation(theta)
        mass = float(special.ndtr(b) - special.ndtr(a))
        return math.log(sigma * math.sqrt(2.0 * math.pi)) + math.log(mass)

    def signal_logpdf(self, y: np.ndarray, theta: float) -> np.ndarray:
        sigma = self.width_scale * theta
        return -0.5 * ((y - theta) / sigma) ** 2 - self.signal_log_norm(theta)

    def sample_signal(self, rng: np.random.Generator, n: int, theta: float) -> np.ndarray:
        sigma, a, b = self._truncation(theta)
        return stats.truncnorm.ppf(rng.random(n), a, b, loc=theta, scale=sigma)
