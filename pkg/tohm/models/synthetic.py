"""Synthetic null processes with exactly known marginals.

A stationary Gaussian sequence with squared-exponential correlation
exp(-Δθ² / 2ℓ²) over the grid (ℓ = 0 gives an i.i.d. sequence) is transformed into
one of the supported process families:

- Gaussian, one- or two-sided: the field itself;
- chi_square(s): the sum of s independent squared fields;
- chi_bar_01: Z² · 1{Z >= 0}.

These processes share the null-simulation interface of `SubTestModel`, so ensembles
and diagnostics run on them without any fitting.
"""

from __future__ import annotations

import logging
from functools import lru_cache
from typing import ClassVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from tohm.exceptions import InvalidArgumentError
from tohm.grid import ProcessTrace, ScanGrid
from tohm.tail_bound import FamilyKind, ProcessFamily


logger = logging.getLogger(__name__)


class SyntheticSettings(BaseModel):
    """Config block of a synthetic process."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    family: str = Field(default="chi_square(1)", description="Process family descriptor")
    length_scale: float = Field(default=0.0, ge=0.0, description="Correlation length ℓ")
    lower: float = Field(default=0.0, description="Lower end of the search range")
    upper: float = Field(default=1.0, description="Upper end of the search range")


@lru_cache(maxsize=32)
def kernel_factor(grid: ScanGrid, length_scale: float) -> np.ndarray:
    """Matrix A with A Aᵀ equal to the correlation matrix of the field on `grid`.

    Built from an eigendecomposition with negative eigenvalues clipped to zero, so nearly
    singular kernels (long correlation lengths) stay usable.
    """
    if length_scale == 0.0:
        return np.eye(grid.resolution)
    delta = grid.points[:, None] - grid.points[None, :]
    kernel = np.exp(-0.5 * (delta / length_scale) ** 2)
    eigenvalues, eigenvectors = np.linalg.eigh(kernel)
    factor = eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))
    factor.setflags(write=False)
    return factor


class SyntheticProcess:
    """Stationary Gaussian-based null process on a search range."""

    name: ClassVar[str] = "synthetic"

    def __init__(
        self,
        family: ProcessFamily,
        *,
        length_scale: float = 0.0,
        search_range: tuple[float, float] = (0.0, 1.0),
    ) -> None:
        if length_scale < 0:
            raise InvalidArgumentError(f"length scale must be >= 0, got {length_scale}")
        lower, upper = search_range
        if not lower < upper:
            raise InvalidArgumentError(
                f"search range must satisfy lower < upper, got [{lower}, {upper}]"
            )
        self._family = family
        self.length_scale = float(length_scale)
        self.search_range = (float(lower), float(upper))

    @classmethod
    def from_settings(cls, settings: SyntheticSettings) -> SyntheticProcess:
        return cls(
            ProcessFamily.parse(settings.family),
            length_scale=settings.length_scale,
            search_range=(settings.lower, settings.upper),
        )

    @property
    def family(self) -> ProcessFamily:
        return self._family

    @property
    def n_fields(self) -> int:
        if self._family.kind is FamilyKind.CHI_SQUARE:
            assert self._family.dof is not None
            return self._family.dof
        return 1

    def __repr__(self) -> str:
        return (
            f"SyntheticProcess(family={self._family.descriptor}, "
            f"length_scale={self.length_scale:g}, search_range={self.search_range})"
        )

    def gaussian_fields(self, grid: ScanGrid, seed: int) -> np.ndarray:
        """Independent standard Gaussian fields on the grid, shape (n_fields, R)."""
        lower, upper = self.search_range
        if not grid.contains(lower, upper):
            raise InvalidArgumentError(
                f"grid [{grid.lower:g}, {grid.upper:g}] is not inside the search range "
                f"[{lower:g}, {upper:g}]"
            )
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal((self.n_fields, grid.resolution))
        return noise @ kernel_factor(grid, self.length_scale).T

    def transform(self, fields: np.ndarray) -> np.ndarray:
        """Map Gaussian fields to a realization of the process family."""
        z = fields[0]
        match self._family.kind:
            case FamilyKind.GAUSSIAN_ONE_SIDED | FamilyKind.GAUSSIAN_TWO_SIDED:
                return z.copy()
            case FamilyKind.CHI_SQUARE:
                return np.sum(fields**2, axis=0)
            case FamilyKind.CHI_BAR_01:
                return np.where(z >= 0.0, z * z, 0.0)

    def check_sample_size(self, n_obs: int) -> None:
        """Any size is accepted; `n_obs` plays no role for synthetic processes."""

    def simulate_null_trace(self, grid: ScanGrid, n_obs: int, seed: int) -> ProcessTrace:
        """One realization of the process; `n_obs` is ignored."""
        return ProcessTrace(grid, self.transform(self.gaussian_fields(grid, seed)))

    def simulate_null_scores(self, grid: ScanGrid, n_obs: int, seed: int) -> np.ndarray:
        """The underlying (first) Gaussian field, which plays the role of the score."""
        return self.gaussian_fields(grid, seed)[0]
