"""Seeded null-hypothesis ensembles.

All operations draw replicate r from `replicate_seed(master_seed, r)` and aggregate in
replicate order, so results are bit-identical for any worker count. Replicates whose
fits fail are recorded; more than `MAX_FAILED_REPLICATE_FRACTION` of them aborts the
ensemble with `EnsembleFailureError`.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import NamedTuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from tohm._seeding import check_master_seed, replicate_seeds
from tohm.constants import MAX_FAILED_REPLICATE_FRACTION
from tohm.exceptions import EnsembleFailureError, InvalidArgumentError, TohmError
from tohm.grid import (
    ProcessTrace,
    ScanGrid,
    count_exceedances_batch,
    count_upcrossings_batch,
)
from tohm.models.base import NullProcess
from tohm.tail_bound import FamilyKind, ProcessFamily


logger = logging.getLogger(__name__)


class Estimate(NamedTuple):
    """Monte-Carlo mean with its standard error."""

    mean: float
    std_error: float


class EnsembleSummary(BaseModel):
    """Serializable summary of an ensemble; re-ingestible by `tohm pvalue`."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_replicates: int
    n_successful: int
    n_obs: int
    master_seed: int
    family: str
    lower: float
    upper: float
    resolution: int
    c0: float
    e_upcrossings: float
    mc_std_error: float
    e_exceedances: float
    mc_std_error_exceedances: float
    failed_seeds: list[int]
    config_hash: str | None = None


def _mean_and_error(counts: np.ndarray) -> Estimate:
    counts = np.asarray(counts, dtype=float)
    if counts.size < 2:
        return Estimate(float(counts.mean()) if counts.size else 0.0, 0.0)
    return Estimate(float(counts.mean()), float(counts.std(ddof=1) / math.sqrt(counts.size)))


@dataclass(frozen=True, eq=False)
class TraceBatch:
    """Null traces of the successful replicates, in replicate order."""

    grid: ScanGrid
    values: np.ndarray
    seeds: list[int]
    failed_seeds: list[int] = field(default_factory=list)

    @property
    def traces(self) -> list[ProcessTrace]:
        return [ProcessTrace(self.grid, row) for row in self.values]

    def upcrossings(self, c: float | Sequence[float]) -> np.ndarray:
        """Per-replicate upcrossing counts, shape (n_successful, n_thresholds)."""
        return count_upcrossings_batch(self.values, np.atleast_1d(c))

    def exceedances(self, c: float | Sequence[float]) -> np.ndarray:
        return count_exceedances_batch(self.values, np.atleast_1d(c))

    def upcrossing_estimate(self, c: float) -> Estimate:
        return _mean_and_error(self.upcrossings(c)[:, 0])

    def exceedance_estimate(self, c: float) -> Estimate:
        return _mean_and_error(self.exceedances(c)[:, 0])


@dataclass(frozen=True, eq=False)
class McEnsemble:
    """Null ensemble with the upcrossing estimate Ê[Ñ_{c0}] and its Monte-Carlo error."""

    batch: TraceBatch
    family: ProcessFamily
    n_replicates: int
    n_obs: int
    master_seed: int
    c0: float
    e_upcrossings: float
    mc_std_error: float
    e_exceedances: float
    mc_std_error_exceedances: float

    @property
    def grid(self) -> ScanGrid:
        return self.batch.grid

    @property
    def traces(self) -> list[ProcessTrace]:
        return self.batch.traces

    @property
    def failed_seeds(self) -> list[int]:
        return self.batch.failed_seeds

    def summary(self, config_hash: str | None = None) -> EnsembleSummary:
        return EnsembleSummary(
            n_replicates=self.n_replicates,
            n_successful=len(self.batch.seeds),
            n_obs=self.n_obs,
            master_seed=self.master_seed,
            family=self.family.descriptor,
            lower=self.grid.lower,
            upper=self.grid.upper,
            resolution=self.grid.resolution,
            c0=self.c0,
            e_upcrossings=self.e_upcrossings,
            mc_std_error=self.mc_std_error,
            e_exceedances=self.e_exceedances,
            mc_std_error_exceedances=self.mc_std_error_exceedances,
            failed_seeds=self.failed_seeds,
            config_hash=config_hash,
        )


def _run_replicate(
    source: NullProcess, grid: ScanGrid, n_obs: int, seed: int
) -> tuple[int, np.ndarray | None, str | None]:
    try:
        trace = source.simulate_null_trace(grid, n_obs, seed)
    except TohmError as ex:
        return seed, None, str(ex)
    return seed, np.asarray(trace.values), None


def _run_scores(
    source: NullProcess, grid: ScanGrid, n_obs: int, seed: int
) -> tuple[int, np.ndarray | None, str | None]:
    try:
        scores = source.simulate_null_scores(grid, n_obs, seed)
    except TohmError as ex:
        return seed, None, str(ex)
    return seed, np.asarray(scores, dtype=float), None


def _map_replicates(
    task: partial,
    seeds: list[int],
    workers: int,
) -> list[tuple[int, np.ndarray | None, str | None]]:
    if workers < 1:
        raise InvalidArgumentError(f"worker count must be >= 1, got {workers}")
    if workers == 1 or len(seeds) == 1:
        return [task(seed) for seed in seeds]
    chunksize = max(1, len(seeds) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, seeds, chunksize=chunksize))


def _collect(
    results: list[tuple[int, np.ndarray | None, str | None]],
    n_replicates: int,
    width: int,
) -> tuple[np.ndarray, list[int], list[int]]:
    ok_seeds: list[int] = []
    failed: list[int] = []
    rows: list[np.ndarray] = []
    for seed, values, error in results:
        if values is None:
            logger.debug(f"Replicate with seed {seed} failed: {error}")
            failed.append(seed)
            continue
        ok_seeds.append(seed)
        rows.append(values)
    if len(failed) > MAX_FAILED_REPLICATE_FRACTION * n_replicates:
        raise EnsembleFailureError(failed, n_replicates)
    if failed:
        logger.warning(
            f"{len(failed)} of {n_replicates} replicates failed and were left out "
            f"(seeds: {', '.join(str(s) for s in failed)})"
        )
    values = np.vstack(rows) if rows else np.empty((0, width))
    return values, ok_seeds, failed


def simulate_traces(
    source: NullProcess,
    grid: ScanGrid,
    n_replicates: int,
    n_obs: int,
    master_seed: int,
    *,
    workers: int = 1,
) -> TraceBatch:
    """Simulate and scan `n_replicates` null data sets.

    Raises:
        EnsembleFailureError: If more than 1% of the replicates fail to fit.
    """
    if n_replicates < 1:
        raise InvalidArgumentError(f"number of replicates must be >= 1, got {n_replicates}")
    if n_obs < 1:
        raise InvalidArgumentError(f"observations per replicate must be >= 1, got {n_obs}")
    source.check_sample_size(n_obs)
    seeds = replicate_seeds(check_master_seed(master_seed), n_replicates)
    results = _map_replicates(partial(_run_replicate, source, grid, n_obs), seeds, workers)
    values, ok_seeds, failed = _collect(results, n_replicates, grid.resolution)
    return TraceBatch(grid=grid, values=values, seeds=ok_seeds, failed_seeds=failed)


def simulate_scores(
    source: NullProcess,
    grid: ScanGrid,
    n_replicates: int,
    n_obs: int,
    master_seed: int,
    *,
    workers: int = 1,
) -> tuple[np.ndarray, list[int]]:
    """Normalized score sequences of null replicates, shape (n_successful, R)."""
    if n_replicates < 1:
        raise InvalidArgumentError(f"number of replicates must be >= 1, got {n_replicates}")
    source.check_sample_size(n_obs)
    seeds = replicate_seeds(check_master_seed(master_seed), n_replicates)
    results = _map_replicates(partial(_run_scores, source, grid, n_obs), seeds, workers)
    values, _, failed = _collect(results, n_replicates, grid.resolution)
    return values, failed


def ensemble_from_batch(
    batch: TraceBatch,
    family: ProcessFamily,
    c0: float,
    *,
    n_replicates: int,
    n_obs: int,
    master_seed: int,
) -> McEnsemble:
    """Aggregate the counts of an already simulated batch at threshold c0."""
    if not math.isfinite(c0):
        raise InvalidArgumentError(f"c0 must be finite, got {c0}")
    up = batch.upcrossing_estimate(c0)
    ex = batch.exceedance_estimate(c0)
    if up.mean == 0:
        logger.warning(
            f"No replicate upcrosses c0={c0:g}; the estimate is 0 and bounds reduce to their "
            "endpoint term."
        )
    logger.info(
        f"Ensemble of {len(batch.seeds)} replicates at R={batch.grid.resolution}: "
        f"E[upcrossings of {c0:g}] = {up.mean:.4g} +/- {up.std_error:.2g}"
    )
    return McEnsemble(
        batch=batch,
        family=family,
        n_replicates=n_replicates,
        n_obs=n_obs,
        master_seed=master_seed,
        c0=float(c0),
        e_upcrossings=up.mean,
        mc_std_error=up.std_error,
        e_exceedances=ex.mean,
        mc_std_error_exceedances=ex.std_error,
    )


def estimate_upcrossings(
    source: NullProcess,
    grid: ScanGrid,
    c0: float,
    n_replicates: int,
    n_obs: int,
    master_seed: int,
    *,
    workers: int = 1,
) -> McEnsemble:
    """Monte-Carlo estimate of the expected number of upcrossings of c0 under the null.

    Args:
        source: Model (already set to its null simulation parameters) or synthetic process.
        grid: Evaluation grid shared with the observed scan.
        c0: Reference threshold.
        n_replicates: Ensemble size, at least 2.
        n_obs: Observations per simulated data set.
        master_seed: Unsigned 64-bit master seed.
        workers: Worker processes; 1 runs serially.
    """
    if n_replicates < 2:
        raise InvalidArgumentError(f"an ensemble needs at least 2 replicates, got {n_replicates}")
    batch = simulate_traces(source, grid, n_replicates, n_obs, master_seed, workers=workers)
    return ensemble_from_batch(
        batch,
        source.family,
        c0,
        n_replicates=n_replicates,
        n_obs=n_obs,
        master_seed=master_seed,
    )


def upcrossing_curve(
    source: NullProcess,
    c0: float,
    resolutions: Sequence[int],
    n_replicates: int,
    n_obs: int,
    master_seed: int,
    *,
    workers: int = 1,
) -> pd.DataFrame:
    """Ê[Ñ_{c0}] as a function of the grid resolution (the "elbow" table).

    Every resolution uses the same master seed, so replicate r simulates the same data set
    at every R.
    """
    resolutions = [int(r) for r in resolutions]
    if not resolutions:
        raise InvalidArgumentError("at least one resolution is required")
    if any(b <= a for a, b in zip(resolutions, resolutions[1:], strict=False)):
        raise InvalidArgumentError(f"resolutions must be strictly increasing, got {resolutions}")
    lower, upper = source.search_range
    rows = []
    for resolution in resolutions:
        grid = ScanGrid.equally_spaced(lower, upper, resolution)
        ensemble = estimate_upcrossings(
            source, grid, c0, n_replicates, n_obs, master_seed, workers=workers
        )
        rows.append(
            {
                "R": resolution,
                "e_upcrossings": ensemble.e_upcrossings,
                "mc_err": ensemble.mc_std_error,
            }
        )
    return pd.DataFrame(rows, columns=["R", "e_upcrossings", "mc_err"])


def default_c0_ladder(family: ProcessFamily, n: int = 31) -> np.ndarray:
    """Candidate reference thresholds for the sensitivity analysis."""
    upper = 3.0
    if family.kind is FamilyKind.CHI_SQUARE and family.dof is not None:
        upper = max(3.0, 2.0 * family.dof + 1.0)
    return np.linspace(0.0, upper, n)


@dataclass(frozen=True, eq=False)
class SensitivityResult:
    """Simulated null paths and the mean upcrossing count per candidate c0."""

    paths: pd.DataFrame
    ladder: pd.DataFrame
    recommended_c0: float


def c0_sensitivity(
    source: NullProcess,
    grid: ScanGrid,
    n_paths: int,
    master_seed: int,
    *,
    n_obs: int = 1000,
    ladder: Sequence[float] | None = None,
    workers: int = 1,
) -> SensitivityResult:
    """Raw null traces for visual choice of c0, plus the count-maximizing candidate.

    The recommended c0 is the candidate with the largest mean upcrossing count; ties go
    to the smallest candidate.
    """
    if n_paths < 1:
        raise InvalidArgumentError(f"n_paths must be >= 1, got {n_paths}")
    candidates = np.asarray(
        ladder if ladder is not None else default_c0_ladder(source.family), dtype=float
    )
    if candidates.size == 0 or np.any(np.diff(candidates) <= 0):
        raise InvalidArgumentError("c0 ladder must be non-empty and strictly increasing")
    batch = simulate_traces(source, grid, n_paths, n_obs, master_seed, workers=workers)
    if batch.seeds:
        means = batch.upcrossings(candidates).mean(axis=0)
    else:
        means = np.zeros(candidates.size)
    recommended = float(candidates[int(np.argmax(means))])

    paths = pd.DataFrame(
        {
            "path": np.repeat(np.arange(len(batch.seeds)), grid.resolution),
            "theta": np.tile(grid.points, len(batch.seeds)),
            "stat": batch.values.reshape(-1),
        }
    )
    table = pd.DataFrame({"c0": candidates, "mean_upcrossings": means})
    logger.info(f"Recommended c0 from {len(batch.seeds)} paths: {recommended:g}")
    return SensitivityResult(paths=paths, ladder=table, recommended_c0=recommended)


def oracle_curve(
    source: NullProcess,
    grid: ScanGrid,
    c_ladder: Sequence[float],
    n_replicates: int,
    n_obs: int,
    master_seed: int,
    *,
    workers: int = 1,
) -> pd.DataFrame:
    """Brute-force estimate of P(max_r W(θ_r) > c) for every c of a ladder.

    Uses |W| for two-sided families. The standard error is binomial,
    √(p̂(1 - p̂) / n).
    """
    if n_replicates < 100:
        raise InvalidArgumentError(
            f"oracle estimates need at least 100 replicates, got {n_replicates}"
        )
    thresholds = np.asarray(c_ladder, dtype=float)
    if thresholds.size == 0 or not np.all(np.isfinite(thresholds)):
        raise InvalidArgumentError("threshold ladder must be non-empty and finite")
    batch = simulate_traces(source, grid, n_replicates, n_obs, master_seed, workers=workers)
    values = np.abs(batch.values) if source.family.is_two_sided else batch.values
    maxima = values.max(axis=1) if values.size else np.empty(0)
    n = maxima.size
    rows = []
    for c in thresholds:
        p_hat = float(np.mean(maxima > c)) if n else math.nan
        err = math.sqrt(p_hat * (1.0 - p_hat) / n) if n else math.nan
        rows.append({"c": float(c), "p_hat": p_hat, "mc_err": err})
    return pd.DataFrame(rows, columns=["c", "p_hat", "mc_err"])


def oracle_pvalue(
    source: NullProcess,
    grid: ScanGrid,
    c: float,
    n_replicates: int,
    n_obs: int,
    master_seed: int,
    *,
    workers: int = 1,
) -> Estimate:
    """Single-threshold case of `oracle_curve`."""
    row = oracle_curve(
        source, grid, [c], n_replicates, n_obs, master_seed, workers=workers
    ).iloc[0]
    return Estimate(float(row["p_hat"]), float(row["mc_err"]))
