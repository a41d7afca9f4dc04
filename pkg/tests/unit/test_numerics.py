"""Tests for special functions and the bounded optimizers."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from tohm.exceptions import InvalidArgumentError, NonConvergenceError
from tohm.numerics import (
    OptimizerSettings,
    chi2_log_survival,
    chi2_survival,
    maximize_bounded,
    normal_cdf,
    normal_log_cdf,
    normal_quantile,
    normal_upper_quantile,
)


class TestTailFunctions:
    """Test chi-square and normal tails."""

    @pytest.mark.parametrize(
        "s,c,expected",
        [
            (1, 3.841459, 0.05),
            (1, 6.634897, 0.01),
            (2, 2.0, math.exp(-1.0)),
            (3, 7.814728, 0.05),
        ],
    )
    def test_chi2_survival_known_values(self, s, c, expected):
        """Test tabulated chi-square quantiles."""
        assert chi2_survival(s, c) == pytest.approx(expected, rel=1e-5)

    def test_chi2_survival_at_zero(self):
        """Test that the whole mass lies above zero."""
        assert chi2_survival(4, 0.0) == 1.0

    def test_chi2_log_survival(self):
        """Test the log tail against the direct one."""
        assert chi2_log_survival(1, 100.0) == pytest.approx(math.log(chi2_survival(1, 100.0)))
        assert chi2_log_survival(2, 10.0) == pytest.approx(-5.0)

    @pytest.mark.parametrize("s,c", [(0, 1.0), (1, -1.0), (1, math.inf), (2, math.nan)])
    def test_chi2_invalid(self, s, c):
        """Test that bad degrees of freedom and thresholds are rejected."""
        with pytest.raises(InvalidArgumentError):
            chi2_survival(s, c)
        with pytest.raises(InvalidArgumentError):
            chi2_log_survival(s, c)

    def test_normal_cdf(self):
        """Test the normal distribution function and its log."""
        assert normal_cdf(0.0) == 0.5
        assert normal_cdf(-1.959964) == pytest.approx(0.025, abs=1e-7)
        assert normal_log_cdf(-40.0) == pytest.approx(-804.6084, rel=1e-6)

    @pytest.mark.parametrize("p", [0.5, 0.025, 1e-10, 1e-200, 1e-300])
    def test_quantile_inverts_cdf(self, p):
        """Test that the quantile inverts the distribution function deep in the tail."""
        z = normal_quantile(p)

        assert normal_log_cdf(z) == pytest.approx(math.log(p), rel=1e-9)
        assert normal_upper_quantile(p) == -z

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.5, 2.0])
    def test_quantile_invalid(self, p):
        """Test that levels outside (0, 1) are rejected."""
        with pytest.raises(InvalidArgumentError):
            normal_quantile(p)


class TestOptimizerSettings:
    """Test optimizer configuration."""

    def test_defaults(self):
        """Test default tolerance and budgets."""
        settings = OptimizerSettings()

        assert settings.abs_tol == 1e-8
        assert settings.max_iters == 500
        assert settings.restarts == 3

    @pytest.mark.parametrize(
        "kwargs", [{"abs_tol": 0.0}, {"max_iters": 0}, {"restarts": -1}, {"unknown": 1}]
    )
    def test_invalid(self, kwargs):
        """Test that invalid or unknown settings are rejected."""
        with pytest.raises(ValidationError):
            OptimizerSettings(**kwargs)


class TestMaximizeBounded:
    """Test bounded maximization."""

    def test_one_dimensional_interior(self):
        """Test a concave function with its maximum inside the interval."""
        result = maximize_bounded(lambda x: -((x[0] - 0.3) ** 2), [(0.0, 1.0)])

        assert result.argmax[0] == pytest.approx(0.3, abs=1e-6)
        assert result.value == pytest.approx(0.0, abs=1e-10)
        assert result.n_evals > 0

    def test_one_dimensional_secondary_mode(self):
        """Test that restarts find the larger of two separated modes."""

        def bimodal(x):
            return math.exp(-((x[0] - 1.0) ** 2) / 0.01) + 2.0 * math.exp(
                -((x[0] - 8.5) ** 2) / 0.01
            )

        result = maximize_bounded(bimodal, [(0.0, 10.0)], OptimizerSettings(restarts=5))

        assert result.argmax[0] == pytest.approx(8.5, abs=1e-4)

    def test_maximum_on_boundary(self):
        """Test an increasing function whose maximum is the upper end."""
        result = maximize_bounded(lambda x: x[0], [(0.0, 2.0)])

        assert result.argmax[0] == pytest.approx(2.0, abs=1e-6)

    def test_two_dimensional(self):
        """Test a concave quadratic in two dimensions."""

        def f(x):
            return -((x[0] - 1.0) ** 2) - 2.0 * (x[1] + 0.5) ** 2

        result = maximize_bounded(f, [(-3.0, 3.0), (-3.0, 3.0)])

        np.testing.assert_allclose(result.argmax, [1.0, -0.5], atol=1e-4)

    def test_non_finite_values_are_avoided(self):
        """Test that NaN regions behave like -inf."""

        def f(x):
            return math.nan if x[0] < 0.5 else -((x[0] - 0.7) ** 2)

        result = maximize_bounded(f, [(0.0, 1.0)])

        assert result.argmax[0] == pytest.approx(0.7, abs=1e-5)

    def test_budget_exhaustion_raises(self):
        """Test that an exhausted budget surfaces the best point found."""
        settings = OptimizerSettings(max_iters=1, restarts=0)

        with pytest.raises(NonConvergenceError) as exc_info:
            maximize_bounded(lambda x: -((x[0] - 0.3) ** 2), [(0.0, 1.0)], settings)

        assert exc_info.value.n_iters == 1
        assert math.isfinite(exc_info.value.best_value)

    @pytest.mark.parametrize(
        "box",
        [[], [(0.0, math.inf)], [(1.0, 1.0)], [(0.0, 1.0), (2.0, 1.0)]],
        ids=["empty", "infinite", "degenerate", "reversed"],
    )
    def test_invalid_box(self, box):
        """Test that empty, infinite and degenerate boxes are rejected."""
        with pytest.raises(InvalidArgumentError):
            maximize_bounded(lambda x: 0.0, box)
