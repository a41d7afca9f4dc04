"""Diagnostics for choosing between the upcrossing bound and Bonferroni.

`berman_curve` estimates the correlation of the normalized score sequence across null
replicates and evaluates sup_{|θ_r - θ_r'| > τ} |ρ(θ_r, θ_r')| · log τ on a ladder of
separations τ. When the curve goes to zero, exceedances and upcrossings share one
Poisson limit and Bonferroni is about as sharp as the upcrossing bound.
`ratio_curve` measures the Bonferroni/upcrossing ratio directly.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd

from tohm.constants import BERMAN_TAU_START
from tohm.exceptions import InvalidArgumentError
from tohm.grid import ScanGrid
from tohm.models.base import Dataset, NullFit, NullProcess, SubTestModel, normalized_scores
from tohm.montecarlo import simulate_scores, simulate_traces
from tohm.tail_bound import marginal_survival, p_to_sigma, tohm_bound


logger = logging.getLogger(__name__)

_DIAGONAL_SLACK = 0.05


@dataclass(frozen=True, eq=False)
class ScoreCovariance:
    """Replicate-wise covariance of the normalized score sequence."""

    grid: ScanGrid
    cov: np.ndarray
    n_replicates: int

    def __post_init__(self) -> None:
        cov = np.asarray(self.cov, dtype=float)
        r = self.grid.resolution
        if cov.shape != (r, r):
            raise InvalidArgumentError(f"covariance must be {r}x{r}, got {cov.shape}")
        cov = 0.5 * (cov + cov.T)
        object.__setattr__(self, "cov", cov)
        if not self.unit_diagonal:
            worst = float(np.nanmax(np.abs(np.diag(cov) - 1.0)))
            logger.warning(
                f"Score variances deviate from 1 by up to {worst:.3f}; the normalized score "
                "may not yet be in its asymptotic regime."
            )

    @property
    def unit_diagonal(self) -> bool:
        diag = np.diag(self.cov)
        return bool(np.all(np.abs(diag[np.isfinite(diag)] - 1.0) <= _DIAGONAL_SLACK))

    @property
    def correlation(self) -> np.ndarray:
        sd = np.sqrt(np.diag(self.cov))
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.cov / np.outer(sd, sd)

    def to_frame(self) -> pd.DataFrame:
        labels = [f"{t:.10g}" for t in self.grid.points]
        frame = pd.DataFrame(self.cov, columns=labels)
        frame.insert(0, "theta", self.grid.points)
        return frame


def score_sequence(
    model: SubTestModel,
    dataset: Dataset,
    grid: ScanGrid,
    *,
    null_fit: NullFit | None = None,
) -> np.ndarray:
    """Normalized score for the tested effect at every grid point; NaN where undefined."""
    return normalized_scores(model, dataset, grid, null_fit=null_fit)


def estimate_score_covariance(
    source: NullProcess,
    grid: ScanGrid,
    n_replicates: int,
    master_seed: int,
    *,
    n_obs: int = 1000,
    workers: int = 1,
) -> ScoreCovariance:
    """Pairwise covariance of null score sequences; invalid entries drop out pairwise."""
    scores, _ = simulate_scores(source, grid, n_replicates, n_obs, master_seed, workers=workers)
    invalid = int(np.count_nonzero(~np.isfinite(scores)))
    if invalid:
        logger.warning(f"{invalid} score entries were invalid and are excluded pairwise.")
    cov = pd.DataFrame(scores).cov(min_periods=2).to_numpy()
    return ScoreCovariance(grid=grid, cov=cov, n_replicates=scores.shape[0])


def tau_ladder(grid: ScanGrid, n_tau: int = 50) -> np.ndarray:
    """Separations from 1.5 up to (excluding) the width of the grid."""
    width = grid.upper - grid.lower
    if width <= BERMAN_TAU_START:
        raise InvalidArgumentError(
            f"search range width {width:g} leaves no separations above {BERMAN_TAU_START}"
        )
    return np.linspace(BERMAN_TAU_START, width, n_tau + 1)[:-1]


def berman_values(covariance: ScoreCovariance, taus: np.ndarray) -> np.ndarray:
    """sup over pairs more than τ apart of |ρ̂| · log τ, for every τ (0 without pairs)."""
    points = covariance.grid.points
    separation = np.abs(points[:, None] - points[None, :])
    rho = np.abs(covariance.correlation)
    values = np.zeros(taus.size)
    for i, tau in enumerate(taus):
        mask = (separation > tau) & np.isfinite(rho)
        if np.any(mask):
            values[i] = float(rho[mask].max()) * math.log(tau)
    return values


@dataclass(frozen=True, eq=False)
class BermanResult:
    table: pd.DataFrame
    covariance: ScoreCovariance


def berman_curve(
    source: NullProcess,
    grid: ScanGrid,
    n_replicates: int,
    master_seed: int,
    *,
    n_obs: int = 1000,
    n_tau: int = 50,
    workers: int = 1,
) -> BermanResult:
    """Table (tau, value) for assessing the decay of score correlations."""
    if n_replicates < 100:
        raise InvalidArgumentError(
            f"covariance estimation needs at least 100 replicates, got {n_replicates}"
        )
    taus = tau_ladder(grid, n_tau)
    covariance = estimate_score_covariance(
        source, grid, n_replicates, master_seed, n_obs=n_obs, workers=workers
    )
    table = pd.DataFrame({"tau": taus, "value": berman_values(covariance, taus)})
    return BermanResult(table=table, covariance=covariance)


def ratio_curve(
    source: NullProcess,
    resolutions: Sequence[int],
    c_ladder: Sequence[float],
    n_replicates: int,
    n_obs: int,
    master_seed: int,
    *,
    c0: float | None = None,
    workers: int = 1,
) -> pd.DataFrame:
    """Bonferroni bound divided by the upcrossing bound, per resolution and threshold.

    With `c0` set, the upcrossing bound extrapolates Ê[Ñ_{c0}] to every c. With
    `c0=None` the upcrossings of each c are counted directly. A zero upcrossing bound
    gives an infinite ratio. `sigma` is the significance of the upcrossing bound.
    """
    thresholds = np.asarray(c_ladder, dtype=float)
    if thresholds.size == 0 or not np.all(np.isfinite(thresholds)):
        raise InvalidArgumentError("threshold ladder must be non-empty and finite")
    if c0 is not None and np.any(thresholds < c0):
        raise InvalidArgumentError(f"every threshold must be >= c0={c0}")
    family = source.family
    scale = 2.0 if family.is_two_sided else 1.0
    lower, upper = source.search_range

    rows = []
    for resolution in resolutions:
        grid = ScanGrid.equally_spaced(lower, upper, int(resolution))
        batch = simulate_traces(source, grid, n_replicates, n_obs, master_seed, workers=workers)
        if c0 is not None:
            reference = batch.upcrossing_estimate(c0)
        for c in thresholds:
            if c0 is not None:
                tohm = tohm_bound(
                    family, float(c), c0, reference.mean, reference.std_error
                ).tohm_pvalue
            else:
                direct = batch.upcrossing_estimate(float(c))
                tohm = scale * (marginal_survival(family, float(c)) + direct.mean)
            bonferroni = grid.resolution * scale * marginal_survival(family, float(c))
            ratio = math.inf if tohm == 0 else bonferroni / tohm
            sigma = math.inf if tohm == 0 else p_to_sigma(tohm)
            rows.append({"c": float(c), "sigma": sigma, "R": grid.resolution, "ratio": ratio})
    return pd.DataFrame(rows, columns=["c", "sigma", "R", "ratio"])
