"""Global p-values for the maximum of a sub-test-statistic trace.

The computable bound for P(max_r W(θ_r) > c_R) is

    P(W(𝓛) > c_R) + [a(c_R) / a(c0)] · Ê[Ñ_{c0}]

where Ê[Ñ_{c0}] is a Monte-Carlo estimate of the expected number of upcrossings of a
low threshold c0 and a(c) is the family-specific extrapolation factor. The unknown
geometric constant of the process cancels in the ratio, so only Ê[Ñ_{c0}] has to be
simulated. The Bonferroni correction R · min_r p_r is computed alongside for comparison.

For the two-sided Gaussian family upcrossings are counted on the signed process and the
whole right-hand side is doubled. In reports the doubling is absorbed into
`endpoint_term` and `extrapolation_factor` so that
`tohm_pvalue == endpoint_term + extrapolation_factor * expected_upcrossings_c0` holds for
every family.
"""

from __future__ import annotations

import logging
import math
from enum import StrEnum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from tohm.exceptions import InvalidArgumentError
from tohm.grid import GlobalMax, ProcessTrace, global_max
from tohm.numerics import chi2_survival, normal_cdf, normal_upper_quantile


logger = logging.getLogger(__name__)


class FamilyKind(StrEnum):
    """Null process families with a known marginal law."""

    CHI_SQUARE = "chi_square"
    CHI_BAR_01 = "chi_bar_01"
    GAUSSIAN_ONE_SIDED = "gaussian_one_sided"
    GAUSSIAN_TWO_SIDED = "gaussian_two_sided"


class ProcessFamily(BaseModel):
    """Marginal law of the sub-test statistics under the null hypothesis."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: FamilyKind
    dof: int | None = Field(
        default=None, description="Degrees of freedom s; only meaningful for chi_square."
    )

    @model_validator(mode="after")
    def _check_dof(self) -> ProcessFamily:
        if self.kind is FamilyKind.CHI_SQUARE:
            if self.dof is None or self.dof < 1:
                raise ValueError(f"chi_square family needs dof >= 1, got {self.dof}")
        elif self.dof is not None:
            raise ValueError(f"dof is only valid for chi_square, not {self.kind.value}")
        return self

    @classmethod
    def chi_square(cls, s: int) -> ProcessFamily:
        if s < 1:
            raise InvalidArgumentError(f"degrees of freedom must be >= 1, got {s}")
        return cls(kind=FamilyKind.CHI_SQUARE, dof=s)

    @classmethod
    def chi_bar_01(cls) -> ProcessFamily:
        return cls(kind=FamilyKind.CHI_BAR_01)

    @classmethod
    def gaussian_one_sided(cls) -> ProcessFamily:
        return cls(kind=FamilyKind.GAUSSIAN_ONE_SIDED)

    @classmethod
    def gaussian_two_sided(cls) -> ProcessFamily:
        return cls(kind=FamilyKind.GAUSSIAN_TWO_SIDED)

    @classmethod
    def parse(cls, descriptor: str) -> ProcessFamily:
        """Inverse of `descriptor`, e.g. "chi_square(3)" or "chi_bar_01"."""
        text = descriptor.strip()
        if text.startswith("chi_square(") and text.endswith(")"):
            try:
                return cls.chi_square(int(text[len("chi_square(") : -1]))
            except ValueError as ex:
                raise InvalidArgumentError(f"unknown process family '{descriptor}'") from ex
        try:
            kind = FamilyKind(text)
        except ValueError as ex:
            raise InvalidArgumentError(f"unknown process family '{descriptor}'") from ex
        if kind is FamilyKind.CHI_SQUARE:
            raise InvalidArgumentError("chi_square family needs its degrees of freedom")
        return cls(kind=kind)

    @property
    def descriptor(self) -> str:
        if self.kind is FamilyKind.CHI_SQUARE:
            return f"chi_square({self.dof})"
        return self.kind.value

    @property
    def is_gaussian(self) -> bool:
        return self.kind in (FamilyKind.GAUSSIAN_ONE_SIDED, FamilyKind.GAUSSIAN_TWO_SIDED)

    @property
    def is_two_sided(self) -> bool:
        return self.kind is FamilyKind.GAUSSIAN_TWO_SIDED

    def __str__(self) -> str:
        return self.descriptor


class TohmBound(BaseModel):
    """Decomposition of the computable upcrossing bound."""

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    c_R: float
    c0: float
    expected_upcrossings_c0: float
    mc_error_c0: float
    endpoint_term: float
    extrapolation_factor: float
    tohm_pvalue: float
    tohm_pvalue_mc_error: float


class BoundReport(TohmBound):
    """Full global-significance report for one observed trace."""

    theta_hat: float
    estimated_location: float
    """`theta_hat`, or the null-fitted location when the trace comes from an exclusion scan."""
    resolution: int
    family: str
    bonferroni_pvalue: float
    exceedance_bound: float
    min_local_pvalue: float
    sigma_tohm: float
    sigma_bonferroni: float
    tohm_exceeds_one: bool
    bonferroni_exceeds_one: bool
    config_hash: str | None = None


def _check_c(family: ProcessFamily, c: float) -> float:
    c = float(c)
    if not math.isfinite(c) or c < 0:
        raise InvalidArgumentError(
            f"threshold for family {family.descriptor} must be finite and >= 0, got {c}"
        )
    return c


def log_a_of_c(family: ProcessFamily, c: float) -> float:
    """Natural log of a(c); -inf where a(c) = 0 (chi_square with s > 1 at c = 0)."""
    c = _check_c(family, c)
    match family.kind:
        case FamilyKind.CHI_SQUARE:
            assert family.dof is not None
            power = 0.5 * (family.dof - 1)
            if c == 0.0:
                return 0.0 if power == 0 else -math.inf
            return power * math.log(c) - 0.5 * c
        case FamilyKind.CHI_BAR_01:
            return -0.5 * c
        case FamilyKind.GAUSSIAN_ONE_SIDED | FamilyKind.GAUSSIAN_TWO_SIDED:
            return -0.5 * c * c


def a_of_c(family: ProcessFamily, c: float) -> float:
    """Extrapolation factor a(c) of the family.

    chi_square(s): c^((s-1)/2) e^(-c/2); chi_bar_01: e^(-c/2); Gaussian: e^(-c²/2).
    """
    return math.exp(log_a_of_c(family, c))


def extrapolation_factor(family: ProcessFamily, c: float, c0: float) -> float:
    """The ratio a(c) / a(c0), evaluated in log space."""
    log_a0 = log_a_of_c(family, c0)
    if log_a0 == -math.inf:
        raise InvalidArgumentError(
            f"a(c0) vanishes at c0={c0} for family {family.descriptor}; pick c0 > 0"
        )
    return math.exp(log_a_of_c(family, c) - log_a0)


def marginal_survival(family: ProcessFamily, c: float) -> float:
    """P(W(θ) > c) for one component of the null process.

    For the two-sided Gaussian family this is still Φ(-c); the doubling is applied at the
    level of the bound.
    """
    c = float(c)
    if not math.isfinite(c):
        raise InvalidArgumentError(f"threshold must be finite, got {c}")
    match family.kind:
        case FamilyKind.CHI_SQUARE:
            assert family.dof is not None
            return 1.0 if c <= 0 else chi2_survival(family.dof, c)
        case FamilyKind.CHI_BAR_01:
            if c < 0:
                return 1.0
            return 0.5 if c == 0 else 0.5 * chi2_survival(1, c)
        case FamilyKind.GAUSSIAN_ONE_SIDED | FamilyKind.GAUSSIAN_TWO_SIDED:
            return normal_cdf(-c)


def local_pvalues(family: ProcessFamily, trace: ProcessTrace) -> np.ndarray:
    """Local p-value of each sub-test; 2Φ(-|w|) for the two-sided Gaussian family."""
    if family.is_two_sided:
        return np.array([2.0 * normal_cdf(-abs(w)) for w in trace.values])
    return np.array([marginal_survival(family, w) for w in trace.values])


def tohm_bound(
    family: ProcessFamily,
    c_R: float,
    c0: float,
    expected_upcrossings_c0: float,
    mc_error_c0: float,
) -> TohmBound:
    """Compute the upcrossing bound on the global p-value.

    Args:
        family: Null process family.
        c_R: Observed maximum of the trace (of |w| for the two-sided family).
        c0: Reference threshold at which upcrossings were simulated.
        expected_upcrossings_c0: Monte-Carlo estimate Ê[Ñ_{c0}].
        mc_error_c0: Standard error of that estimate.

    Raises:
        InvalidArgumentError: If c0 > c_R, c0 < 0 or the estimates are negative.
    """
    if not math.isfinite(c_R):
        raise InvalidArgumentError(f"observed maximum must be finite, got {c_R}")
    _check_c(family, c0)
    if c0 > c_R:
        raise InvalidArgumentError(
            f"c0={c0:g} exceeds the observed maximum c_R={c_R:g}; the bound only "
            "extrapolates upward, choose a smaller c0"
        )
    if expected_upcrossings_c0 < 0 or mc_error_c0 < 0:
        raise InvalidArgumentError(
            "expected upcrossings and their Monte-Carlo error must be non-negative"
        )
    if expected_upcrossings_c0 == 0:
        logger.warning(
            f"No upcrossings of c0={c0:g} in the ensemble; the bound reduces to the "
            "endpoint term. Increase the ensemble size or lower c0."
        )

    scale = 2.0 if family.is_two_sided else 1.0
    endpoint = scale * marginal_survival(family, c_R)
    factor = scale * extrapolation_factor(family, c_R, c0)
    return TohmBound(
        c_R=c_R,
        c0=c0,
        expected_upcrossings_c0=expected_upcrossings_c0,
        mc_error_c0=mc_error_c0,
        endpoint_term=endpoint,
        extrapolation_factor=factor,
        tohm_pvalue=endpoint + factor * expected_upcrossings_c0,
        tohm_pvalue_mc_error=factor * mc_error_c0,
    )


def bonferroni(family: ProcessFamily, trace: ProcessTrace) -> float:
    """Bonferroni-corrected global p-value R · min_r p_r, unclipped."""
    return trace.grid.resolution * float(np.min(local_pvalues(family, trace)))


def exceedance_bound(family: ProcessFamily, trace: ProcessTrace) -> float:
    """Exceedance-based bound P(W(𝓛) > c_R) + p_BF on the global p-value."""
    c_R = observed_max(family, trace).c_R
    scale = 2.0 if family.is_two_sided else 1.0
    return scale * marginal_survival(family, c_R) + bonferroni(family, trace)


def suggest_c0(family: ProcessFamily) -> float | None:
    """Analytic choice of c0, s - 1 for chi_square(s > 1); None when a(c) is monotone.

    None means c0 has to be picked from simulated traces (see
    `tohm.montecarlo.c0_sensitivity`).
    """
    if family.kind is FamilyKind.CHI_SQUARE and family.dof is not None and family.dof > 1:
        return float(family.dof - 1)
    return None


def p_to_sigma(p: float) -> float:
    """Signed one-sided Gaussian significance Φ⁻¹(1 - p); 0 for p >= 1.

    p > 1/2 gives a negative value.
    """
    if not math.isfinite(p) or p <= 0:
        raise InvalidArgumentError(f"p-value must be finite and > 0, got {p}")
    if p >= 1.0:
        return 0.0
    return normal_upper_quantile(p)


def _sigma_or_inf(p: float) -> float:
    # A bound that underflows to zero is beyond any representable significance.
    return math.inf if p == 0.0 else p_to_sigma(p)


def observed_max(family: ProcessFamily, trace: ProcessTrace) -> GlobalMax:
    """Global maximum of the trace, taken over |w| for the two-sided Gaussian family."""
    return global_max(trace.abs() if family.is_two_sided else trace)


def build_report(
    family: ProcessFamily,
    trace: ProcessTrace,
    c0: float,
    expected_upcrossings_c0: float,
    mc_error_c0: float,
    *,
    estimated_location: float | None = None,
    config_hash: str | None = None,
) -> BoundReport:
    """Assemble the complete report for an observed trace and a calibrated Ê[Ñ_{c0}]."""
    c_R, theta_hat = observed_max(family, trace)
    bound = tohm_bound(family, c_R, c0, expected_upcrossings_c0, mc_error_c0)
    p_bf = bonferroni(family, trace)
    scale = 2.0 if family.is_two_sided else 1.0
    report = BoundReport(
        **bound.model_dump(),
        theta_hat=theta_hat,
        estimated_location=theta_hat if estimated_location is None else estimated_location,
        resolution=trace.grid.resolution,
        family=family.descriptor,
        bonferroni_pvalue=p_bf,
        exceedance_bound=scale * marginal_survival(family, c_R) + p_bf,
        min_local_pvalue=float(np.min(local_pvalues(family, trace))),
        sigma_tohm=_sigma_or_inf(bound.tohm_pvalue),
        sigma_bonferroni=_sigma_or_inf(p_bf),
        tohm_exceeds_one=bound.tohm_pvalue > 1.0,
        bonferroni_exceeds_one=p_bf > 1.0,
        config_hash=config_hash,
    )
    logger.info(
        f"Global p-value at c_R={c_R:.4g} (theta_hat={theta_hat:.4g}): "
        f"TOHM {report.tohm_pvalue:.3g}, Bonferroni {report.bonferroni_pvalue:.3g}"
    )
    return report
