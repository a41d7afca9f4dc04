"""Base class for sub-test models.

A sub-test model knows how to simulate data, fit the null hypothesis once, and fit the
alternative with the nuisance parameter held fixed at a grid point. `run_scan` turns
those fits into a `ProcessTrace` of sub-test statistics.

Every model is described in terms of three parameter blocks:

- the *effect*: the tested scalar, equal to 0 under the null and positive towards the
  alternative (the mixture weight η for detection, 1 - η for exclusion, the slope
  change ξ for the break-point model);
- the *nuisance*: parameters estimated under both hypotheses;
- the *scanned* parameter: identifiable only under the alternative, fixed at θ_r.

Null-hypothesis simulation goes through the `NullProcess` protocol, shared with the
synthetic processes, so the Monte-Carlo and diagnostics code accepts either.
"""

from __future__ import annotations

import copy
import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any, ClassVar, Protocol, runtime_checkable

import numpy as np
from pydantic import BaseModel, ValidationError

from tohm.constants import DEFAULT_N_OBS, LOGLIK_SLACK, SCORE_STEP
from tohm.exceptions import (
    FitFailureError,
    InvalidArgumentError,
    NonConvergenceError,
    ScanAbortedError,
)
from tohm.grid import ProcessTrace, ScanGrid
from tohm.numerics import OptimizerSettings
from tohm.tail_bound import ProcessFamily, observed_max


logger = logging.getLogger(__name__)


class Direction(StrEnum):
    """Which hypothesis about the tested effect is the null."""

    DETECTION = "detection"
    EXCLUSION = "exclusion"
    TWO_SIDED = "twosided"


@dataclass(frozen=True, eq=False)
class EventSample:
    """Unbinned event energies y_1, …, y_n."""

    y: np.ndarray

    def __post_init__(self) -> None:
        y = np.array(self.y, dtype=float).reshape(-1)
        if y.size == 0:
            raise InvalidArgumentError("event sample is empty")
        if not np.all(np.isfinite(y)):
            raise InvalidArgumentError("event sample contains non-finite values")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return int(self.y.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventSample):
            return NotImplemented
        return bool(np.array_equal(self.y, other.y))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class BinomialGroups:
    """Grouped binomial data: `cases` successes out of `trials` at covariate `x`."""

    x: np.ndarray
    cases: np.ndarray
    trials: np.ndarray

    def __post_init__(self) -> None:
        x = np.array(self.x, dtype=float).reshape(-1)
        cases = np.array(self.cases, dtype=float).reshape(-1)
        trials = np.array(self.trials, dtype=float).reshape(-1)
        if x.size == 0:
            raise InvalidArgumentError("binomial data set is empty")
        if not (x.size == cases.size == trials.size):
            raise InvalidArgumentError("x, cases and trials must have the same length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(cases))):
            raise InvalidArgumentError("binomial data contains non-finite values")
        if np.any(trials <= 0) or np.any(trials != np.round(trials)):
            raise InvalidArgumentError("trials must be positive integers")
        if np.any(cases < 0) or np.any(cases > trials) or np.any(cases != np.round(cases)):
            raise InvalidArgumentError("cases must be integers between 0 and trials")
        for arr in (x, cases, trials):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "cases", cases)
        object.__setattr__(self, "trials", trials)

    @property
    def total_trials(self) -> int:
        return int(self.trials.sum())

    def __len__(self) -> int:
        return int(self.x.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinomialGroups):
            return NotImplemented
        return all(
            np.array_equal(a, b)
            for a, b in (
                (self.x, other.x),
                (self.cases, other.cases),
                (self.trials, other.trials),
            )
        )

    __hash__ = None  # type: ignore[assignment]


Dataset = EventSample | BinomialGroups


@dataclass(frozen=True)
class NullFit:
    """Maximum-likelihood fit under the null hypothesis."""

    estimate: dict[str, float]
    loglik: float
    nuisance: tuple[float, ...]


@dataclass(frozen=True)
class ProfileFit:
    """Fit of the alternative with the scanned parameter fixed at `theta_r`."""

    theta_r: float
    eta: float
    """Fitted tested parameter on its natural scale (η, or ξ for the break-point model)."""
    effect: float
    estimate: dict[str, float]
    loglik: float
    nuisance: tuple[float, ...]
    boundary: bool = False
    """True when the null point was returned because the slope into the alternative is not
    positive."""
    degenerate: bool = False
    """True when the mixture weight is pinned at the far boundary."""


@dataclass(frozen=True)
class ScanResult:
    """Trace of sub-test statistics plus the fits behind each value."""

    trace: ProcessTrace
    null_fit: NullFit
    family: ProcessFamily
    fits: list[ProfileFit] = field(default_factory=list)
    direction: Direction = Direction.DETECTION

    @property
    def estimated_location(self) -> float:
        """Null-fitted θ̂₀ for the exclusion test, else the arg max of the trace.

        The exclusion scan runs over φ, so its arg max is not a location.
        """
        if self.direction is Direction.EXCLUSION:
            return self.null_fit.estimate["theta"]
        return observed_max(self.family, self.trace).theta_hat

    @property
    def n_degenerate(self) -> int:
        return sum(1 for f in self.fits if f.degenerate)

    def summary(self) -> dict[str, Any]:
        """Plain-data summary of the scan (maximum, location and per-point diagnostics)."""
        c_R, theta_hat = observed_max(self.family, self.trace)
        best = self.fits[int(np.flatnonzero(self.trace.grid.points == theta_hat)[0])]
        return {
            "c_R": c_R,
            "theta_hat": theta_hat,
            "estimated_location": self.estimated_location,
            "family": self.family.descriptor,
            "resolution": self.trace.grid.resolution,
            "null_fit": {"loglik": self.null_fit.loglik, **self.null_fit.estimate},
            "best_fit": {"loglik": best.loglik, "eta": best.eta, **best.estimate},
            "n_boundary": sum(1 for f in self.fits if f.boundary),
            "n_degenerate": self.n_degenerate,
            "points": [
                {
                    "theta_r": f.theta_r,
                    "stat": float(w),
                    "eta": f.eta,
                    "loglik": f.loglik,
                    "boundary": f.boundary,
                    "degenerate": f.degenerate,
                }
                for f, w in zip(self.fits, self.trace.values, strict=True)
            ],
        }


@runtime_checkable
class NullProcess(Protocol):
    """Anything that can produce null-hypothesis traces over a grid."""

    @property
    def family(self) -> ProcessFamily: ...

    @property
    def search_range(self) -> tuple[float, float]: ...

    def simulate_null_trace(self, grid: ScanGrid, n_obs: int, seed: int) -> ProcessTrace: ...

    def check_sample_size(self, n_obs: int) -> None: ...

    def simulate_null_scores(self, grid: ScanGrid, n_obs: int, seed: int) -> np.ndarray: ...


class SubTestModel(ABC):
    """A statistical model tested once per grid point of its scanned parameter.

    Concrete models are immutable after construction; `with_params` and `with_null_fit`
    return modified copies.
    """

    name: ClassVar[str]
    """Unique identifier used by the registry and in config files."""

    params_model: ClassVar[type[BaseModel]]
    """Pydantic model holding the simulation parameters."""

    supported_directions: ClassVar[tuple[Direction, ...]]

    default_n_obs: ClassVar[int] = DEFAULT_N_OBS
    """Size of simulated data sets when the config does not set `n_obs`."""

    def __init__(
        self,
        params: BaseModel | Mapping[str, float] | None = None,
        *,
        direction: Direction | str | None = None,
        search_range: tuple[float, float] | None = None,
        optimizer: OptimizerSettings | None = None,
        warm_start: bool = True,
    ) -> None:
        self.params = self._coerce_params(params)
        self.direction = Direction(direction or self.supported_directions[0])
        if self.direction not in self.supported_directions:
            valid = ", ".join(d.value for d in self.supported_directions)
            raise InvalidArgumentError(
                f"model '{self.name}' does not support the {self.direction.value} test "
                f"(supported: {valid})"
            )
        lower, upper = search_range or self.default_search_range(self.direction)
        if not lower < upper:
            raise InvalidArgumentError(
                f"search range must satisfy lower < upper, got [{lower}, {upper}]"
            )
        allowed_lo, allowed_hi = self.default_search_range(self.direction)
        if lower < allowed_lo or upper > allowed_hi:
            raise InvalidArgumentError(
                f"search range [{lower}, {upper}] lies outside the admissible range "
                f"[{allowed_lo}, {allowed_hi}] of model '{self.name}'"
            )
        self.search_range = (float(lower), float(upper))
        self.optimizer = optimizer or OptimizerSettings()
        self.warm_start = warm_start

    @classmethod
    def _coerce_params(cls, params: BaseModel | Mapping[str, float] | None) -> BaseModel:
        if isinstance(params, cls.params_model):
            return params
        raw = dict(params.model_dump() if isinstance(params, BaseModel) else params or {})
        try:
            return cls.params_model.model_validate(raw)
        except ValidationError as ex:
            messages = [
                f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}"
                for err in ex.errors()
            ]
            raise InvalidArgumentError(
                f"invalid parameters for model '{cls.name}': " + "; ".join(messages)
            ) from ex

    def __repr__(self) -> str:
        return (
            f"{type(self).__name__}(direction={self.direction.value}, "
            f"search_range={self.search_range}, params={self.params.model_dump()})"
        )

    # -- configuration --------------------------------------------------------------

    @classmethod
    @abstractmethod
    def default_search_range(cls, direction: Direction) -> tuple[float, float]:
        """Admissible (and default) range of the scanned parameter."""
        ...

    @property
    @abstractmethod
    def family(self) -> ProcessFamily:
        """Null marginal law of the sub-test statistics."""
        ...

    @property
    @abstractmethod
    def nuisance_names(self) -> tuple[str, ...]:
        """Names of the nuisance parameters, in the order of `NullFit.nuisance`."""
        ...

    def with_params(self, **updates: float) -> SubTestModel:
        """Copy of the model with some simulation parameters replaced."""
        clone = copy.copy(self)
        clone.params = self._coerce_params({**self.params.model_dump(), **updates})
        return clone

    @abstractmethod
    def null_params(self) -> BaseModel:
        """Simulation parameters with the tested effect set to its null value."""
        ...

    def with_null_fit(self, null_fit: NullFit) -> SubTestModel:
        """Copy whose null simulations use the fitted null parameters."""
        return self.with_params(**null_fit.estimate)

    def bootstrap_from(self, dataset: Dataset, null_fit: NullFit) -> SubTestModel:
        """Copy that simulates null data sets resembling `dataset` (parametric bootstrap)."""
        return self.with_null_fit(null_fit)

    # -- data ------------------------------------------------------------------------

    @abstractmethod
    def simulate(self, n: int, seed: int, params: BaseModel | None = None) -> Dataset:
        """Draw a data set of size `n`, deterministic in `seed`."""
        ...

    def simulate_null(self, n: int, seed: int) -> Dataset:
        return self.simulate(n, seed, params=self.null_params())

    @abstractmethod
    def check_dataset(self, dataset: Dataset) -> None:
        """Raise InvalidArgumentError when the data set does not fit the model."""
        ...

    # -- likelihood ------------------------------------------------------------------

    @abstractmethod
    def loglik_terms(
        self, dataset: Dataset, eta: float, phi: np.ndarray | float, theta: float
    ) -> np.ndarray:
        """Per-observation (or per-group) log-likelihood contributions."""
        ...

    @abstractmethod
    def profile_terms(
        self, dataset: Dataset, effect: float, nuisance: np.ndarray, scanned: float
    ) -> np.ndarray:
        """`loglik_terms` expressed in (effect, nuisance, scanned) coordinates."""
        ...

    @abstractmethod
    def fit_null(self, dataset: Dataset) -> NullFit:
        """Maximize the null log-likelihood over the nuisance parameters."""
        ...

    @abstractmethod
    def fit_profile(
        self,
        dataset: Dataset,
        theta_r: float,
        *,
        null_fit: NullFit | None = None,
        warm_start: ProfileFit | None = None,
    ) -> ProfileFit:
        """Maximize the alternative log-likelihood with the scanned parameter at `theta_r`."""
        ...

    def subtest_stat(self, loglik0: float, loglik1: float, eta_hat: float) -> float:
        """LRT statistic 2(l1 - l0), or its signed root for two-sided tests.

        Negative differences within the numerical slack are clipped to zero.
        """
        diff = loglik1 - loglik0
        if diff < -LOGLIK_SLACK:
            logger.warning(
                f"Alternative log-likelihood is below the null one by {-diff:.3g}; "
                "clipping the sub-test statistic to 0."
            )
        t = max(0.0, 2.0 * diff)
        if self.family.is_two_sided:
            return math.copysign(math.sqrt(t), eta_hat) if t > 0 else 0.0
        return t

    # -- null simulation interface ---------------------------------------------------

    def check_sample_size(self, n_obs: int) -> None:
        """Raise InvalidArgumentError when null data sets of size `n_obs` are too small."""
        if n_obs < 1:
            raise InvalidArgumentError(f"observations per replicate must be >= 1, got {n_obs}")

    def simulate_null_trace(self, grid: ScanGrid, n_obs: int, seed: int) -> ProcessTrace:
        return run_scan(self, self.simulate_null(n_obs, seed), grid).trace

    def simulate_null_scores(self, grid: ScanGrid, n_obs: int, seed: int) -> np.ndarray:
        return normalized_scores(self, self.simulate_null(n_obs, seed), grid)

    def _settings_for(self, warm_start: ProfileFit | None) -> OptimizerSettings:
        if warm_start is None:
            return self.optimizer
        return self.optimizer.model_copy(update={"restarts": 0})

    def _check_theta(self, theta_r: float) -> None:
        lower, upper = self.default_search_range(self.direction)
        if not lower <= theta_r <= upper:
            raise InvalidArgumentError(
                f"theta_r={theta_r} lies outside the admissible range [{lower}, {upper}]"
            )


def _check_grid(model: SubTestModel, grid: ScanGrid) -> None:
    lower, upper = model.search_range
    if not grid.contains(lower, upper):
        raise InvalidArgumentError(
            f"grid [{grid.lower:g}, {grid.upper:g}] is not inside the search range "
            f"[{lower:g}, {upper:g}] of model '{model.name}'"
        )


def run_scan(
    model: SubTestModel,
    dataset: Dataset,
    grid: ScanGrid,
    *,
    null_fit: NullFit | None = None,
) -> ScanResult:
    """Fit the null once and the alternative at every grid point.

    Each profile fit is warm-started from the solution at the previous grid point unless
    the model was built with `warm_start=False`.

    Raises:
        InvalidArgumentError: If the grid leaves the model's search range.
        FitFailureError: If the null fit fails.
        ScanAbortedError: If any grid-point fit fails; carries the failing θ_r.
    """
    _check_grid(model, grid)
    model.check_dataset(dataset)
    if null_fit is None:
        try:
            null_fit = model.fit_null(dataset)
        except NonConvergenceError as ex:
            raise FitFailureError(f"null fit did not converge ({ex})") from ex
    logger.debug(f"Null fit for '{model.name}': {null_fit.estimate}, loglik={null_fit.loglik:.6f}")

    fits: list[ProfileFit] = []
    previous: ProfileFit | None = None
    for index, theta_r in enumerate(grid.points):
        try:
            fit = model.fit_profile(
                dataset,
                float(theta_r),
                null_fit=null_fit,
                warm_start=previous if model.warm_start else None,
            )
        except (FitFailureError, NonConvergenceError) as ex:
            raise ScanAbortedError(float(theta_r), index, ex) from ex
        logger.debug(f"theta_r={theta_r:.6g}: eta={fit.eta:.6g}, loglik={fit.loglik:.6f}")
        fits.append(fit)
        previous = fit

    values = [model.subtest_stat(null_fit.loglik, f.loglik, f.eta) for f in fits]
    return ScanResult(
        trace=ProcessTrace(grid, np.array(values)),
        null_fit=null_fit,
        fits=fits,
        family=model.family,
        direction=model.direction,
    )


def scan(model: SubTestModel, dataset: Dataset, grid: ScanGrid) -> ProcessTrace:
    """Trace of sub-test statistics of `model` over `grid`."""
    return run_scan(model, dataset, grid).trace


def exclusion_scan(model: SubTestModel, dataset: Dataset, grid: ScanGrid) -> ProcessTrace:
    """Scan with the roles of the two mixture components swapped (null at η = 1)."""
    if Direction.EXCLUSION not in model.supported_directions:
        raise InvalidArgumentError(f"model '{model.name}' has no exclusion test")
    if model.direction is not Direction.EXCLUSION:
        model = copy.copy(model)
        model.direction = Direction.EXCLUSION
        model.search_range = model.default_search_range(Direction.EXCLUSION)
    return run_scan(model, dataset, grid).trace


def _stencil(
    evaluate: Any,  # noqa: ANN401
    x0: np.ndarray,
    j: int,
    h: float,
) -> tuple[float, ...]:
    # Central offsets where both neighbours are valid, one-sided otherwise.
    for offsets in ((-1.0, 1.0), (1.0, 2.0), (-1.0, -2.0)):
        ok = True
        for o in offsets:
            x = x0.copy()
            x[j] += o * h
            if not np.all(np.isfinite(evaluate(x))):
                ok = False
                break
        if ok:
            return offsets
    raise FloatingPointError("no valid finite-difference stencil")


_FIRST_WEIGHTS = {
    (-1.0, 1.0): {-1.0: -0.5, 1.0: 0.5},
    (1.0, 2.0): {0.0: -1.5, 1.0: 2.0, 2.0: -0.5},
    (-1.0, -2.0): {0.0: 1.5, -1.0: -2.0, -2.0: 0.5},
}
_SECOND_WEIGHTS = {
    (-1.0, 1.0): {-1.0: 1.0, 0.0: -2.0, 1.0: 1.0},
    (1.0, 2.0): {0.0: 1.0, 1.0: -2.0, 2.0: 1.0},
    (-1.0, -2.0): {0.0: 1.0, -1.0: -2.0, -2.0: 1.0},
}


def _derivatives(
    model: SubTestModel,
    dataset: Dataset,
    x0: np.ndarray,
    theta_r: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and Hessian of the log-likelihood at x0 = (effect, nuisance...)."""
    cache: dict[tuple[float, ...], np.ndarray] = {}
    base = model.profile_terms(dataset, float(x0[0]), x0[1:], theta_r)
    steps = SCORE_STEP * np.maximum(1.0, np.abs(x0))

    def evaluate(x: np.ndarray) -> np.ndarray:
        key = tuple(np.round((x - x0) / steps, 6))
        if key not in cache:
            cache[key] = model.profile_terms(dataset, float(x[0]), x[1:], theta_r)
        return cache[key]

    def at(offsets: Mapping[int, float]) -> np.ndarray:
        x = x0.copy()
        for k, o in offsets.items():
            x[k] += o * steps[k]
        # Differences are taken per observation before summing.
        return evaluate(x) - base

    d = x0.size
    stencils = [_stencil(evaluate, x0, j, float(steps[j])) for j in range(d)]
    grad = np.empty(d)
    hess = np.empty((d, d))
    for j in range(d):
        w1 = _FIRST_WEIGHTS[stencils[j]]
        grad[j] = sum(w * at({j: o}).sum() for o, w in w1.items()) / steps[j]
        w2 = _SECOND_WEIGHTS[stencils[j]]
        hess[j, j] = sum(w * at({j: o}).sum() for o, w in w2.items() if o != 0.0) / steps[j] ** 2
        for k in range(j):
            wk = _FIRST_WEIGHTS[stencils[k]]
            total = 0.0
            for oj, wj_ in w1.items():
                for ok, wk_ in wk.items():
                    total += wj_ * wk_ * at({j: oj, k: ok}).sum()
            hess[j, k] = hess[k, j] = total / (steps[j] * steps[k])
    return grad, hess


def normalized_scores(
    model: SubTestModel,
    dataset: Dataset,
    grid: ScanGrid,
    *,
    null_fit: NullFit | None = None,
) -> np.ndarray:
    """Score for the tested effect at the null fit, normalized by its efficient information.

    At every grid point the gradient and Hessian of the log-likelihood in
    (effect, nuisance) are taken by finite differences at (0, nuisance_0, θ_r). The
    efficient information is the Schur complement
    I_ee - I_en I_nn^-1 I_ne of the observed information I = -H. Entries whose
    information is not positive are NaN.
    """
    _check_grid(model, grid)
    model.check_dataset(dataset)
    if null_fit is None:
        try:
            null_fit = model.fit_null(dataset)
        except NonConvergenceError as ex:
            raise FitFailureError(f"null fit did not converge ({ex})") from ex
    x0 = np.array([0.0, *null_fit.nuisance])
    scores = np.full(grid.resolution, np.nan)
    for r, theta_r in enumerate(grid.points):
        try:
            grad, hess = _derivatives(model, dataset, x0, float(theta_r))
        except FloatingPointError:
            logger.warning(f"Score undefined at theta_r={theta_r:.6g}; entry marked invalid.")
            continue
        info = -hess
        score, i_eff = grad[0], info[0, 0]
        if x0.size > 1:
            try:
                solve = np.linalg.solve(info[1:, 1:], info[1:, 0])
            except np.linalg.LinAlgError:
                solve = np.full(x0.size - 1, np.nan)
            i_eff = info[0, 0] - info[0, 1:] @ solve
            score = grad[0] - grad[1:] @ solve
        if not np.isfinite(i_eff) or i_eff <= 0:
            logger.warning(
                f"Non-positive information ({i_eff:.3g}) at theta_r={theta_r:.6g}; "
                "entry marked invalid."
            )
            continue
        scores[r] = score / math.sqrt(i_eff)
    return scores
