"""Logistic regression with a break in slope at an unknown covariate value.

Grouped binomial data (x_i, cases_i, trials_i) follow

    logit π_i = φ1 + φ2 x_i + ξ (x_i - θ) · 1{x_i >= θ}

and the test is ξ = 0 against ξ != 0, scanning the break point θ. Each sub-test
statistic is the signed root sign(ξ̂) √T of the likelihood-ratio statistic, so the null
process is Gaussian and two-sided. Fits at fixed θ are ordinary binomial GLMs.
"""

from __future__ import annotations

import copy
import logging
import warnings
from typing import ClassVar

import numpy as np
import statsmodels.api as sm
from pydantic import BaseModel, ConfigDict, Field
from scipy import special
from statsmodels.tools.sm_exceptions import (
    ConvergenceWarning,
    PerfectSeparationError,
    PerfectSeparationWarning,
)

from tohm.constants import BREAKPOINT_N_OBS
from tohm.exceptions import FitFailureError, InvalidArgumentError
from tohm.models.base import (
    BinomialGroups,
    Dataset,
    Direction,
    NullFit,
    ProfileFit,
    SubTestModel,
)
from tohm.tail_bound import ProcessFamily


logger = logging.getLogger(__name__)

AGE_RANGE = (17, 47)
"""Integer covariate values of the default simulation design."""

BREAK_RANGE = (20.0, 44.0)
"""Admissible range of the break point."""

MIN_EXPECTED_CASES = 100
"""Fewest expected cases per null data set for which the GLM fits are trusted."""


class BreakpointParams(BaseModel):
    """Simulation parameters of the break-point model (logit scale)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    phi1: float = Field(default=-8.3, description="Intercept")
    phi2: float = Field(default=0.05, description="Slope before the break")
    xi: float = Field(default=0.0, description="Change of slope after the break")
    theta: float = Field(default=31.0, description="Break point")


def _hinge(x: np.ndarray, theta: float) -> np.ndarray:
    return np.clip(x - theta, 0.0, None)


class BreakpointModel(SubTestModel):
    """Segmented logistic regression tested for a change of slope."""

    name: ClassVar[str] = "breakpoint"
    params_model: ClassVar[type[BreakpointParams]] = BreakpointParams
    supported_directions: ClassVar[tuple[Direction, ...]] = (Direction.TWO_SIDED,)
    default_n_obs: ClassVar[int] = BREAKPOINT_N_OBS

    def __init__(
        self,
        params: BaseModel | dict[str, float] | None = None,
        *,
        design: BinomialGroups | None = None,
        **kwargs,  # noqa: ANN003
    ) -> None:
        super().__init__(params, **kwargs)
        self.design = design

    @classmethod
    def default_search_range(cls, direction: Direction) -> tuple[float, float]:
        return BREAK_RANGE

    @property
    def family(self) -> ProcessFamily:
        return ProcessFamily.gaussian_two_sided()

    @property
    def nuisance_names(self) -> tuple[str, ...]:
        return ("phi1", "phi2")

    def null_params(self) -> BaseModel:
        return self.params.model_copy(update={"xi": 0.0})

    def with_design(self, dataset: BinomialGroups) -> BreakpointModel:
        """Copy that simulates at the covariate values and trial counts of `dataset`."""
        clone = copy.copy(self)
        clone.design = dataset
        return clone

    def bootstrap_from(self, dataset: Dataset, null_fit: NullFit) -> BreakpointModel:
        assert isinstance(dataset, BinomialGroups)
        clone = self.with_null_fit(null_fit)
        assert isinstance(clone, BreakpointModel)
        return clone.with_design(dataset)

    # -- data --------------------------------------------------------------------------

    def _allocate(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        if self.design is None:
            x = np.arange(AGE_RANGE[0], AGE_RANGE[1] + 1, dtype=float)
            weights = np.ones_like(x)
        else:
            x = self.design.x
            weights = self.design.trials
        share = n * weights / weights.sum()
        trials = np.floor(share)
        # Largest remainders first; ties go to the lower covariate value.
        remainder = int(n - trials.sum())
        order = np.argsort(-(share - trials), kind="stable")
        trials[order[:remainder]] += 1
        keep = trials > 0
        return x[keep], trials[keep]

    def simulate(self, n: int, seed: int, params: BaseModel | None = None) -> BinomialGroups:
        if n < 1:
            raise InvalidArgumentError(f"number of trials must be >= 1, got {n}")
        p = self._coerce_params(params) if params is not None else self.params
        assert isinstance(p, BreakpointParams)
        x, trials = self._allocate(n)
        logit = p.phi1 + p.phi2 * x + p.xi * _hinge(x, p.theta)
        rng = np.random.default_rng(seed)
        cases = rng.binomial(trials.astype(np.int64), special.expit(logit))
        return BinomialGroups(x=x, cases=cases, trials=trials)

    def check_dataset(self, dataset: Dataset) -> None:
        if not isinstance(dataset, BinomialGroups):
            raise InvalidArgumentError(f"model '{self.name}' needs grouped binomial data")

    def expected_cases(self, n: int) -> float:
        """Expected total of cases in a null data set of `n` trials."""
        p = self.null_params()
        assert isinstance(p, BreakpointParams)
        x, trials = self._allocate(n)
        return float(np.sum(trials * special.expit(p.phi1 + p.phi2 * x)))

    def check_sample_size(self, n_obs: int) -> None:
        super().check_sample_size(n_obs)
        expected = self.expected_cases(n_obs)
        if expected < MIN_EXPECTED_CASES:
            raise InvalidArgumentError(
                f"null data sets of {n_obs} trials hold about {expected:.1f} cases; "
                f"at least {MIN_EXPECTED_CASES} are needed for stable fits, raise n_obs"
            )

    # -- likelihood --------------------------------------------------------------------

    def loglik_terms(
        self, dataset: Dataset, eta: float, phi: np.ndarray | float, theta: float
    ) -> np.ndarray:
        assert isinstance(dataset, BinomialGroups)
        phi1, phi2 = np.asarray(phi, dtype=float).reshape(-1)
        logit = phi1 + phi2 * dataset.x + eta * _hinge(dataset.x, theta)
        n, k = dataset.trials, dataset.cases
        log_choose = special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)
        return log_choose + k * special.log_expit(logit) + (n - k) * special.log_expit(-logit)

    def profile_terms(
        self, dataset: Dataset, effect: float, nuisance: np.ndarray, scanned: float
    ) -> np.ndarray:
        return self.loglik_terms(dataset, effect, nuisance, scanned)

    def _fit_glm(
        self,
        dataset: BinomialGroups,
        exog: np.ndarray,
        start: np.ndarray,
        theta_r: float | None,
    ) -> np.ndarray:
        endog = np.column_stack([dataset.cases, dataset.trials - dataset.cases])
        glm = sm.GLM(endog, exog, family=sm.families.Binomial())
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            # Newer statsmodels only warns on separation; the estimates are then unbounded.
            warnings.simplefilter("error", PerfectSeparationWarning)
            try:
                result = glm.fit(
                    start_params=start,
                    maxiter=self.optimizer.max_iters,
                    tol=self.optimizer.abs_tol,
                )
            except (PerfectSeparationError, PerfectSeparationWarning) as ex:
                raise FitFailureError(
                    f"binomial GLM hit perfect separation ({ex})", theta_r=theta_r
                ) from ex
            except (np.linalg.LinAlgError, ValueError) as ex:
                raise FitFailureError(f"binomial GLM fit failed ({ex})", theta_r=theta_r) from ex
        if not getattr(result, "converged", True):
            raise FitFailureError(
                f"binomial GLM did not converge within {self.optimizer.max_iters} iterations",
                theta_r=theta_r,
            )
        params = np.asarray(result.params, dtype=float)
        if not np.all(np.isfinite(params)):
            raise FitFailureError("binomial GLM returned non-finite estimates", theta_r=theta_r)
        return params

    def fit_null(self, dataset: Dataset) -> NullFit:
        self.check_dataset(dataset)
        assert isinstance(dataset, BinomialGroups)
        exog = np.column_stack([np.ones_like(dataset.x), dataset.x])
        start = np.array([self.params.phi1, self.params.phi2])  # type: ignore[attr-defined]
        phi1, phi2 = self._fit_glm(dataset, exog, start, None)
        loglik = float(np.sum(self.loglik_terms(dataset, 0.0, [phi1, phi2], 0.0)))
        return NullFit(
            estimate={"phi1": float(phi1), "phi2": float(phi2)},
            loglik=loglik,
            nuisance=(float(phi1), float(phi2)),
        )

    def fit_profile(
        self,
        dataset: Dataset,
        theta_r: float,
        *,
        null_fit: NullFit | None = None,
        warm_start: ProfileFit | None = None,
    ) -> ProfileFit:
        self._check_theta(theta_r)
        assert isinstance(dataset, BinomialGroups)
        if null_fit is None:
            null_fit = self.fit_null(dataset)
        if warm_start is not None:
            start = np.array([*warm_start.nuisance, warm_start.effect])
        else:
            start = np.array([*null_fit.nuisance, 0.0])

        exog = np.column_stack([np.ones_like(dataset.x), dataset.x, _hinge(dataset.x, theta_r)])
        phi1, phi2, xi = self._fit_glm(dataset, exog, start, theta_r)
        loglik = float(np.sum(self.loglik_terms(dataset, xi, [phi1, phi2], theta_r)))
        return ProfileFit(
            theta_r=theta_r,
            eta=float(xi),
            effect=float(xi),
            estimate={"phi1": float(phi1), "phi2": float(phi2), "xi": float(xi), "theta": theta_r},
            loglik=loglik,
            nuisance=(float(phi1), float(phi2)),
        )
