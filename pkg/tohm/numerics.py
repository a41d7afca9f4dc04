"""Special functions and bounded derivative-free optimizers.

Tail probabilities go through `scipy.special`, which keeps full relative precision far
into the tails; significances beyond 12 sigma occur in practice and naive
`1 - cdf` arithmetic underflows long before that.

The optimizers are derivative-free. Profile likelihoods have kinks where the mixture
weight hits 0 or 1.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import optimize, special, stats

from tohm.exceptions import InvalidArgumentError, NonConvergenceError


logger = logging.getLogger(__name__)

_RESTART_SEED = 0x5EED
_EXTREME_TAIL = 1e-290


class OptimizerSettings(BaseModel):
    """Tolerances and budgets shared by every fit."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    abs_tol: float = Field(default=1e-8, gt=0, description="Absolute tolerance on parameters")
    max_iters: int = Field(default=500, ge=1, description="Iteration budget per start")
    restarts: int = Field(
        default=3, ge=0, description="Extra starts drawn as deterministic perturbations"
    )


class Optimum(NamedTuple):
    """Best point found by `maximize_bounded`."""

    argmax: np.ndarray
    value: float
    n_evals: int


def chi2_survival(s: int, c: float) -> float:
    """Upper tail P(chi2_s > c), the regularized upper incomplete gamma Q(s/2, c/2)."""
    if s < 1:
        raise InvalidArgumentError(f"degrees of freedom must be >= 1, got {s}")
    if not math.isfinite(c) or c < 0:
        raise InvalidArgumentError(f"chi-square threshold must be finite and >= 0, got {c}")
    return float(special.gammaincc(0.5 * s, 0.5 * c))


def chi2_log_survival(s: int, c: float) -> float:
    """Natural log of `chi2_survival`, accurate where the tail underflows."""
    if s < 1:
        raise InvalidArgumentError(f"degrees of freedom must be >= 1, got {s}")
    if not math.isfinite(c) or c < 0:
        raise InvalidArgumentError(f"chi-square threshold must be finite and >= 0, got {c}")
    return float(stats.chi2.logsf(c, s))


def normal_cdf(z: float) -> float:
    """Standard normal distribution function."""
    return float(special.ndtr(z))


def normal_log_cdf(z: float) -> float:
    """Natural log of the standard normal distribution function."""
    return float(special.log_ndtr(z))


def normal_quantile(p: float) -> float:
    """Inverse of the standard normal distribution function.

    For p below 1e-290 the result of `ndtri` is polished by bracketing root-finding on
    the log-tail, where the direct representation has lost its relative precision.
    """
    if not 0.0 < p < 1.0:
        raise InvalidArgumentError(f"quantile level must lie in (0, 1), got {p}")
    z = float(special.ndtri(p))
    if p < _EXTREME_TAIL:
        log_p = math.log(p)
        # Φ(-35) ≈ 1e-268 and Φ(-40) underflows below the smallest subnormal.
        z = optimize.brentq(
            lambda x: float(special.log_ndtr(x)) - log_p, -40.0, -35.0, xtol=1e-14
        )
    return z


def normal_upper_quantile(p: float) -> float:
    """Upper quantile Φ⁻¹(1 − p), computed without forming 1 − p."""
    return -normal_quantile(p)


def _validate_box(box: Sequence[tuple[float, float]]) -> tuple[np.ndarray, np.ndarray]:
    if len(box) == 0:
        raise InvalidArgumentError("optimization box must have at least one dimension")
    lower = np.array([lo for lo, _ in box], dtype=float)
    upper = np.array([hi for _, hi in box], dtype=float)
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise InvalidArgumentError(f"optimization box must be finite, got {list(box)}")
    if np.any(upper <= lower):
        raise InvalidArgumentError(f"optimization box is degenerate: {list(box)}")
    return lower, upper


def _negated(f: Callable[[np.ndarray], float]) -> Callable[[np.ndarray], float]:
    def neg(x: np.ndarray) -> float:
        value = f(np.atleast_1d(np.asarray(x, dtype=float)))
        return -float(value) if math.isfinite(value) else math.inf

    return neg


def _maximize_1d(
    f: Callable[[np.ndarray], float],
    lower: float,
    upper: float,
    settings: OptimizerSettings,
) -> Optimum:
    # Brent on the full interval plus one run per sub-interval catches secondary modes.
    edges = np.linspace(lower, upper, settings.restarts + 2)
    intervals = [(lower, upper)] + list(zip(edges[:-1], edges[1:], strict=True))
    if settings.restarts == 0:
        intervals = intervals[:1]

    neg = _negated(f)
    best: Optimum | None = None
    best_unconverged: Optimum | None = None
    n_evals = 0
    for a, b in intervals:
        res = optimize.minimize_scalar(
            lambda x: neg(np.array([x])),
            bounds=(a, b),
            method="bounded",
            options={"xatol": settings.abs_tol, "maxiter": settings.max_iters},
        )
        n_evals += int(res.nfev)
        candidate = Optimum(np.array([float(res.x)]), -float(res.fun), n_evals)
        if res.success:
            if best is None or candidate.value > best.value:
                best = candidate
        elif best_unconverged is None or candidate.value > best_unconverged.value:
            best_unconverged = candidate

    if best is None:
        assert best_unconverged is not None
        raise NonConvergenceError(
            best_unconverged.argmax, best_unconverged.value, settings.max_iters
        )
    return Optimum(best.argmax, best.value, n_evals)


def _initial_simplex(start: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    width = upper - lower
    simplex = [start]
    for i in range(start.size):
        vertex = start.copy()
        step = 0.1 * width[i]
        vertex[i] = start[i] + step if start[i] + step <= upper[i] else start[i] - step
        simplex.append(vertex)
    return np.array(simplex)


def _maximize_nd(
    f: Callable[[np.ndarray], float],
    lower: np.ndarray,
    upper: np.ndarray,
    settings: OptimizerSettings,
    starts: Sequence[np.ndarray],
) -> Optimum:
    width = upper - lower
    candidates = [np.clip(np.asarray(s, dtype=float), lower, upper) for s in starts]
    for k in range(settings.restarts):
        rng = np.random.default_rng([_RESTART_SEED, k])
        jitter = rng.uniform(-0.25, 0.25, size=lower.size) * width
        candidates.append(np.clip(candidates[0] + jitter, lower, upper))

    neg = _negated(f)
    bounds = optimize.Bounds(lower, upper)
    best: Optimum | None = None
    best_unconverged: Optimum | None = None
    n_evals = 0
    for start in candidates:
        f0 = neg(start)
        scale = max(1.0, abs(f0)) if math.isfinite(f0) else 1.0
        res = optimize.minimize(
            neg,
            start,
            method="Nelder-Mead",
            bounds=bounds,
            options={
                "xatol": settings.abs_tol,
                "fatol": settings.abs_tol * scale,
                "maxiter": settings.max_iters,
                "maxfev": 2 * settings.max_iters * (lower.size + 1),
                "initial_simplex": _initial_simplex(start, lower, upper),
            },
        )
        n_evals += int(res.nfev)
        candidate = Optimum(np.clip(res.x, lower, upper), -float(res.fun), n_evals)
        if res.success:
            if best is None or candidate.value > best.value:
                best = candidate
        elif best_unconverged is None or candidate.value > best_unconverged.value:
            best_unconverged = candidate

    if best is None:
        assert best_unconverged is not None
        raise NonConvergenceError(
            best_unconverged.argmax, best_unconverged.value, settings.max_iters
        )
    return Optimum(best.argmax, best.value, n_evals)


def maximize_bounded(
    f: Callable[[np.ndarray], float],
    box: Sequence[tuple[float, float]],
    settings: OptimizerSettings | None = None,
    *,
    starts: Sequence[np.ndarray] | None = None,
) -> Optimum:
    """Maximize `f` over a box with derivative-free methods.

    One-dimensional problems use Brent's bounded method (golden-section steps with
    parabolic refinement). Higher-dimensional problems use Nelder-Mead simplex descent
    on -f with projection onto the box. Non-finite values of `f` are treated as -inf.

    Args:
        f: Objective taking a parameter vector.
        box: One (lo, hi) pair per coordinate.
        settings: Tolerance, iteration budget and restart count.
        starts: Explicit starting points for the multi-dimensional case. The first one is
            also the centre of the deterministic restart perturbations. Defaults to the
            box midpoint.

    Returns:
        The best converged optimum over all starts.

    Raises:
        InvalidArgumentError: If the box is empty, infinite or degenerate.
        NonConvergenceError: If no start converged within the iteration budget.
    """
    settings = settings or OptimizerSettings()
    lower, upper = _validate_box(box)
    if lower.size == 1:
        return _maximize_1d(f, float(lower[0]), float(upper[0]), settings)

    if not starts:
        starts = [0.5 * (lower + upper)]
    return _maximize_nd(f, lower, upper, settings, starts)
