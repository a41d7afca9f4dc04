"""Two-component mixtures on a truncated power-law background.

Both astrophysics models share the comprehensive density

    h(y) = (1 - η) · f(y; φ) + η · g(y; θ),   f(y; φ) = y^-(φ+1) / k_φ

on a bounded energy support. They differ only in the second component g.

- Detection (null η = 0): θ is scanned, φ is the nuisance.
- Exclusion (null η = 1): φ is scanned, θ is the nuisance, estimated under the null.
"""

from __future__ import annotations

import logging
import math
from abc import abstractmethod
from typing import ClassVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from tohm.exceptions import InvalidArgumentError
from tohm.models.base import (
    Dataset,
    Direction,
    EventSample,
    NullFit,
    ProfileFit,
    SubTestModel,
)
from tohm.numerics import maximize_bounded
from tohm.tail_bound import ProcessFamily


logger = logging.getLogger(__name__)

_DEGENERATE_TOL = 1e-6


class MixtureParams(BaseModel):
    """Simulation parameters shared by the mixture models."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    eta: float = Field(default=0.0, ge=0.0, le=1.0, description="Signal fraction")
    phi: float = Field(default=1.4, gt=0.0, description="Power-law index")
    theta: float = Field(description="Signal parameter")


def pareto_log_norm(phi: float, lower: float, upper: float) -> float:
    """log k_φ with k_φ = ∫ y^-(φ+1) dy over [lower, upper] = (lower^-φ - upper^-φ) / φ."""
    log_ratio = math.log(upper / lower)
    return math.log(-math.expm1(-phi * log_ratio)) - phi * math.log(lower) - math.log(phi)


def mixture_logpdf(log_f: np.ndarray, log_g: np.ndarray, eta: float) -> np.ndarray:
    """log((1 - η) f + η g), also for η slightly outside [0, 1] (finite differences).

    Outside [0, 1] the density can turn negative; those terms come back as NaN.
    """
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        if 0.0 <= eta <= 1.0:
            log_w0 = math.log1p(-eta) if eta < 1.0 else -math.inf
            log_w1 = math.log(eta) if eta > 0.0 else -math.inf
            return np.logaddexp(log_w0 + log_f, log_w1 + log_g)
        if eta < 0.0:
            return log_f + np.log1p(eta * np.expm1(log_g - log_f))
        return log_g + np.log1p((1.0 - eta) * np.expm1(log_f - log_g))


class MixtureModel(SubTestModel):
    """Power-law background plus one signal component, tested at a boundary of η."""

    support: ClassVar[tuple[float, float]]
    """Energy band [𝓛_y, 𝓤_y] of the events."""

    phi_box: ClassVar[tuple[float, float]] = (0.05, 6.0)
    """Range of the power-law index searched by the fits."""

    signal_range: ClassVar[tuple[float, float]]
    """Admissible range of the signal parameter θ."""

    exclusion_range: ClassVar[tuple[float, float] | None] = None
    """Scanned range of φ for the exclusion test, None when the model has no such test."""

    @classmethod
    def default_search_range(cls, direction: Direction) -> tuple[float, float]:
        if direction is Direction.EXCLUSION:
            if cls.exclusion_range is None:
                raise InvalidArgumentError(f"model '{cls.name}' has no exclusion test")
            return cls.exclusion_range
        return cls.signal_range

    @property
    def family(self) -> ProcessFamily:
        return ProcessFamily.chi_bar_01()

    @property
    def nuisance_names(self) -> tuple[str, ...]:
        return ("theta",) if self.direction is Direction.EXCLUSION else ("phi",)

    def _nuisance_box(self) -> tuple[float, float]:
        return self.signal_range if self.direction is Direction.EXCLUSION else self.phi_box

    def null_params(self) -> BaseModel:
        eta0 = 1.0 if self.direction is Direction.EXCLUSION else 0.0
        return self.params.model_copy(update={"eta": eta0})

    # -- components --------------------------------------------------------------------

    def background_logpdf(self, y: np.ndarray, phi: float) -> np.ndarray:
        """Truncated power-law log-density."""
        lower, upper = self.support
        return -(phi + 1.0) * np.log(y) - pareto_log_norm(phi, lower, upper)

    @abstractmethod
    def signal_logpdf(self, y: np.ndarray, theta: float) -> np.ndarray:
        """Log-density of the signal component on the support."""
        ...

    def sample_background(self, rng: np.random.Generator, n: int, phi: float) -> np.ndarray:
        """Inverse-CDF draws from the truncated power law."""
        lower, upper = self.support
        u = rng.random(n)
        a = lower**-phi
        b = upper**-phi
        return (a - u * (a - b)) ** (-1.0 / phi)

    @abstractmethod
    def sample_signal(self, rng: np.random.Generator, n: int, theta: float) -> np.ndarray:
        """Inverse-CDF draws from the signal component."""
        ...

    # -- data --------------------------------------------------------------------------

    def simulate(self, n: int, seed: int, params: BaseModel | None = None) -> EventSample:
        if n < 1:
            raise InvalidArgumentError(f"sample size must be >= 1, got {n}")
        p = self._coerce_params(params) if params is not None else self.params
        assert isinstance(p, MixtureParams)
        rng = np.random.default_rng(seed)
        n_signal = int(rng.binomial(n, p.eta))
        background = self.sample_background(rng, n - n_signal, p.phi)
        signal = self.sample_signal(rng, n_signal, p.theta)
        return EventSample(rng.permutation(np.concatenate([background, signal])))

    def check_dataset(self, dataset: Dataset) -> None:
        if not isinstance(dataset, EventSample):
            raise InvalidArgumentError(f"model '{self.name}' needs an event sample")
        lower, upper = self.support
        if np.any(dataset.y < lower) or np.any(dataset.y > upper):
            raise InvalidArgumentError(
                f"events must lie in the support [{lower:g}, {upper:g}] of model '{self.name}'"
            )

    # -- likelihood --------------------------------------------------------------------

    def loglik_terms(
        self, dataset: Dataset, eta: float, phi: np.ndarray | float, theta: float
    ) -> np.ndarray:
        assert isinstance(dataset, EventSample)
        phi = float(np.asarray(phi).reshape(-1)[0])
        log_f = self.background_logpdf(dataset.y, phi)
        log_g = self.signal_logpdf(dataset.y, theta)
        return mixture_logpdf(log_f, log_g, eta)

    def profile_terms(
        self, dataset: Dataset, effect: float, nuisance: np.ndarray, scanned: float
    ) -> np.ndarray:
        if self.direction is Direction.EXCLUSION:
            return self.loglik_terms(dataset, 1.0 - effect, scanned, float(nuisance[0]))
        return self.loglik_terms(dataset, effect, float(nuisance[0]), scanned)

    def _components(
        self, dataset: EventSample, nuisance: float, scanned: float
    ) -> tuple[np.ndarray, np.ndarray]:
        """(null component, alternative component) log-densities."""
        if self.direction is Direction.EXCLUSION:
            return self.signal_logpdf(dataset.y, nuisance), self.background_logpdf(
                dataset.y, scanned
            )
        return self.background_logpdf(dataset.y, nuisance), self.signal_logpdf(
            dataset.y, scanned
        )

    def fit_null(self, dataset: Dataset) -> NullFit:
        self.check_dataset(dataset)
        assert isinstance(dataset, EventSample)
        if self.direction is Direction.EXCLUSION:

            def loglik(x: np.ndarray) -> float:
                return float(np.sum(self.signal_logpdf(dataset.y, float(x[0]))))

            name = "theta"
        else:

            def loglik(x: np.ndarray) -> float:
                return float(np.sum(self.background_logpdf(dataset.y, float(x[0]))))

            name = "phi"

        best = maximize_bounded(loglik, [self._nuisance_box()], self.optimizer)
        value = float(best.argmax[0])
        return NullFit(estimate={name: value}, loglik=best.value, nuisance=(value,))

    def _make_fit(
        self,
        theta_r: float,
        effect: float,
        nuisance: float,
        loglik: float,
        *,
        boundary: bool = False,
    ) -> ProfileFit:
        if self.direction is Direction.EXCLUSION:
            eta = 1.0 - effect
            estimate = {"eta": eta, "phi": theta_r, "theta": nuisance}
        else:
            eta = effect
            estimate = {"eta": eta, "phi": nuisance, "theta": theta_r}
        return ProfileFit(
            theta_r=theta_r,
            eta=eta,
            effect=effect,
            estimate=estimate,
            loglik=loglik,
            nuisance=(nuisance,),
            boundary=boundary,
            degenerate=effect >= 1.0 - _DEGENERATE_TOL,
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
        assert isinstance(dataset, EventSample)
        if null_fit is None:
            null_fit = self.fit_null(dataset)
        nu0 = float(null_fit.nuisance[0])

        # The null point is the constrained maximum unless the likelihood increases
        # into the alternative there.
        log_null, log_alt = self._components(dataset, nu0, theta_r)
        with np.errstate(over="ignore"):
            slope = float(np.sum(np.expm1(log_alt - log_null)))
        if slope <= 0:
            return self._make_fit(theta_r, 0.0, nu0, null_fit.loglik, boundary=True)

        def loglik(x: np.ndarray) -> float:
            return float(np.sum(self.profile_terms(dataset, float(x[0]), x[1:], theta_r)))

        starts = [np.array([0.1, nu0]), np.array([0.5, nu0])]
        if warm_start is not None:
            starts.insert(0, np.array([warm_start.effect, warm_start.nuisance[0]]))
        best = maximize_bounded(
            loglik,
            [(0.0, 1.0), self._nuisance_box()],
            self._settings_for(warm_start),
            starts=starts,
        )
        if best.value < null_fit.loglik:
            return self._make_fit(theta_r, 0.0, nu0, null_fit.loglik, boundary=True)
        return self._make_fit(theta_r, float(best.argmax[0]), float(best.argmax[1]), best.value)
