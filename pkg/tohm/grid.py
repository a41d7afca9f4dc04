"""Evaluation grids and sub-test-statistic traces.

A `ScanGrid` holds the R evaluation points of the nuisance parameter, and a
`ProcessTrace` holds one realization of the sub-test statistics over that grid (the
observed trace or a simulated null replicate). The counting helpers implement the
discrete upcrossing and exceedance events: an upcrossing of c happens between
neighbours r-1 and r when values[r-1] <= c < values[r]; an exceedance at r when
values[r] > c. Values equal to c count as "below".
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from tohm.exceptions import InvalidArgumentError


if TYPE_CHECKING:
    from tohm.tail_bound import ProcessFamily


@dataclass(frozen=True, eq=False)
class ScanGrid:
    """Ordered evaluation points θ_1 < … < θ_R over the search range [𝓛, 𝓤]."""

    points: np.ndarray

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=float).reshape(-1)
        if points.size < 2:
            raise InvalidArgumentError(f"a scan grid needs at least 2 points, got {points.size}")
        if not np.all(np.isfinite(points)):
            raise InvalidArgumentError("scan grid points must be finite")
        if np.any(np.diff(points) <= 0):
            raise InvalidArgumentError("scan grid points must be strictly increasing")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @classmethod
    def equally_spaced(cls, lower: float, upper: float, resolution: int) -> ScanGrid:
        """Build R equally spaced points including both ends of [lower, upper]."""
        if not (math.isfinite(lower) and math.isfinite(upper)) or lower >= upper:
            raise InvalidArgumentError(
                f"search range must satisfy lower < upper, got [{lower}, {upper}]"
            )
        if resolution < 2:
            raise InvalidArgumentError(f"resolution must be >= 2, got {resolution}")
        return cls(np.linspace(lower, upper, resolution))

    @classmethod
    def from_points(cls, points: Sequence[float] | np.ndarray) -> ScanGrid:
        """Build a grid from explicit points, e.g. the `theta` column of a trace file."""
        return cls(np.asarray(points, dtype=float))

    def contains(self, lower: float, upper: float) -> bool:
        """True when every grid point lies inside [lower, upper]."""
        return lower <= self.lower and self.upper <= upper

    @property
    def lower(self) -> float:
        return float(self.points[0])

    @property
    def upper(self) -> float:
        return float(self.points[-1])

    @property
    def resolution(self) -> int:
        return int(self.points.size)

    @property
    def step(self) -> float | None:
        """Common spacing of an equally spaced grid, or None for irregular grids."""
        gaps = np.diff(self.points)
        if np.allclose(gaps, gaps[0], rtol=1e-9, atol=0.0):
            return float(gaps[0])
        return None

    def __len__(self) -> int:
        return self.resolution

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScanGrid):
            return NotImplemented
        return bool(np.array_equal(self.points, other.points))

    def __hash__(self) -> int:
        return hash(self.points.tobytes())

    def __repr__(self) -> str:
        return f"ScanGrid(lower={self.lower:g}, upper={self.upper:g}, resolution={self.resolution})"


@dataclass(frozen=True, eq=False)
class ProcessTrace:
    """A complete sequence of sub-test statistics w(θ_1), …, w(θ_R)."""

    grid: ScanGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size != self.grid.resolution:
            raise InvalidArgumentError(
                f"trace has {values.size} values for a grid of {self.grid.resolution} points"
            )
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise InvalidArgumentError(
                f"trace value at theta={self.grid.points[bad]:g} is not finite"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def abs(self) -> ProcessTrace:
        """Trace of absolute values, used for two-sided local p-values."""
        return ProcessTrace(self.grid, np.abs(self.values))

    def local_pvalues(self, family: ProcessFamily) -> np.ndarray:
        """Per-grid-point p-values of the sub-tests under the family's marginal law."""
        from tohm.tail_bound import local_pvalues  # noqa: PLC0415

        return local_pvalues(family, self)

    def __len__(self) -> int:
        return self.grid.resolution

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProcessTrace):
            return NotImplemented
        return self.grid == other.grid and bool(np.array_equal(self.values, other.values))

    __hash__ = None  # type: ignore[assignment]


class GlobalMax(NamedTuple):
    """Discrete maximum c_R of a trace and the grid point θ̂ attaining it."""

    c_R: float
    theta_hat: float


def _check_threshold(c: float) -> float:
    c = float(c)
    if not math.isfinite(c):
        raise InvalidArgumentError(f"threshold must be finite, got {c}")
    return c


def count_upcrossings(trace: ProcessTrace, c: float) -> int:
    """Number of r in 2..R with values[r-1] <= c and values[r] > c."""
    c = _check_threshold(c)
    values = trace.values
    return int(np.count_nonzero((values[:-1] <= c) & (values[1:] > c)))


def count_exceedances(trace: ProcessTrace, c: float) -> int:
    """Number of grid points with values[r] > c."""
    c = _check_threshold(c)
    return int(np.count_nonzero(trace.values > c))


def count_upcrossings_batch(values: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Upcrossing counts for a stack of traces and a vector of thresholds.

    Args:
        values: Array of shape (n_traces, R).
        thresholds: Array of shape (n_thresholds,).

    Returns:
        Integer array of shape (n_traces, n_thresholds).
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=float))
    if values.shape[1] == 0:
        raise InvalidArgumentError("cannot count upcrossings of an empty trace")
    if not np.all(np.isfinite(thresholds)):
        raise InvalidArgumentError("thresholds must be finite")
    below = values[:, :-1, None] <= thresholds[None, None, :]
    above = values[:, 1:, None] > thresholds[None, None, :]
    return np.count_nonzero(below & above, axis=1)


def count_exceedances_batch(values: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Exceedance counts for a stack of traces and a vector of thresholds."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=float))
    if values.shape[1] == 0:
        raise InvalidArgumentError("cannot count exceedances of an empty trace")
    if not np.all(np.isfinite(thresholds)):
        raise InvalidArgumentError("thresholds must be finite")
    return np.count_nonzero(values[:, :, None] > thresholds[None, None, :], axis=1)


def global_max(trace: ProcessTrace) -> GlobalMax:
    """Maximum of the trace and its location; ties go to the smallest θ."""
    index = int(np.argmax(trace.values))
    return GlobalMax(float(trace.values[index]), float(trace.grid.points[index]))
