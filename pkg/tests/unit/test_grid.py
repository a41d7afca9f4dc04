"""Tests for grids, traces and the counting primitives."""

import math

import numpy as np
import pytest

from tohm.exceptions import InvalidArgumentError
from tohm.grid import (
    ProcessTrace,
    ScanGrid,
    count_exceedances,
    count_exceedances_batch,
    count_upcrossings,
    count_upcrossings_batch,
    global_max,
)


def brute_force_upcrossings(values: np.ndarray, c: float) -> int:
    count = 0
    for r in range(1, len(values)):
        if values[r - 1] <= c and values[r] > c:
            count += 1
    return count


class TestScanGrid:
    """Test grid construction and validation."""

    def test_equally_spaced_includes_both_ends(self):
        """Test that the first and last points are the ends of the range."""
        grid = ScanGrid.equally_spaced(1.0, 35.0, 50)

        assert grid.lower == 1.0
        assert grid.upper == 35.0
        assert grid.resolution == 50
        assert grid.step == pytest.approx(34.0 / 49)

    def test_irregular_grid_has_no_step(self):
        """Test that irregular grids report no common spacing."""
        grid = ScanGrid.from_points([0.0, 1.0, 3.0])

        assert grid.step is None
        assert len(grid) == 3

    @pytest.mark.parametrize(
        "lower,upper,resolution",
        [
            (1.0, 1.0, 10),
            (2.0, 1.0, 10),
            (0.0, 1.0, 1),
            (0.0, math.inf, 10),
        ],
    )
    def test_invalid_equally_spaced(self, lower, upper, resolution):
        """Test that degenerate ranges and resolutions are rejected."""
        with pytest.raises(InvalidArgumentError):
            ScanGrid.equally_spaced(lower, upper, resolution)

    @pytest.mark.parametrize(
        "points",
        [
            [1.0],
            [1.0, 1.0],
            [2.0, 1.0, 3.0],
            [0.0, math.nan],
        ],
    )
    def test_invalid_points(self, points):
        """Test that short, non-increasing or non-finite points are rejected."""
        with pytest.raises(InvalidArgumentError):
            ScanGrid.from_points(points)

    def test_points_are_read_only(self):
        """Test that grid points cannot be modified in place."""
        grid = ScanGrid.equally_spaced(0.0, 1.0, 3)

        with pytest.raises(ValueError):
            grid.points[0] = 5.0

    def test_equality_and_hash(self):
        """Test that grids with the same points compare and hash equal."""
        a = ScanGrid.equally_spaced(0.0, 1.0, 11)
        b = ScanGrid.from_points(np.linspace(0.0, 1.0, 11))

        assert a == b
        assert hash(a) == hash(b)
        assert a != ScanGrid.equally_spaced(0.0, 1.0, 12)

    def test_contains(self):
        """Test the inclusion check against a search range."""
        grid = ScanGrid.equally_spaced(2.0, 4.0, 5)

        assert grid.contains(2.0, 4.0)
        assert grid.contains(1.0, 5.0)
        assert not grid.contains(2.5, 4.0)


class TestProcessTrace:
    """Test trace validation."""

    def test_length_must_match_grid(self, small_grid):
        """Test that a trace needs exactly one value per grid point."""
        with pytest.raises(InvalidArgumentError, match="5 points"):
            ProcessTrace(small_grid, np.zeros(4))

    def test_non_finite_values_rejected(self, small_grid):
        """Test that incomplete traces are rejected with the failing point."""
        with pytest.raises(InvalidArgumentError, match="theta=30"):
            ProcessTrace(small_grid, np.array([0.0, 1.0, math.nan, 1.0, 0.0]))

    def test_abs(self, small_grid):
        """Test the absolute-value trace."""
        trace = ProcessTrace(small_grid, np.array([-1.0, 2.0, -3.0, 0.0, 1.0]))

        assert list(trace.abs().values) == [1.0, 2.0, 3.0, 0.0, 1.0]


class TestCounting:
    """Test upcrossing and exceedance counts."""

    def test_hand_countable_trace(self, hand_trace):
        """Test both counts on a trace with two transitions above 1.5."""
        assert count_upcrossings(hand_trace, 1.5) == 2
        assert count_exceedances(hand_trace, 1.5) == 2

    def test_huge_threshold(self, hand_trace):
        """Test that nothing crosses the largest representable threshold."""
        assert count_upcrossings(hand_trace, np.finfo(float).max) == 0
        assert count_exceedances(hand_trace, np.finfo(float).max) == 0

    def test_monotone_trace_crosses_once(self, small_grid):
        """Test a monotone increasing trace."""
        trace = ProcessTrace(small_grid, np.array([0.0, 1.0, 2.0, 3.0, 4.0]))

        assert count_upcrossings(trace, 2.5) == 1

    def test_value_equal_to_threshold_counts_as_below(self, small_grid):
        """Test the weak/strict inequality convention."""
        trace = ProcessTrace(small_grid, np.array([1.0, 2.0, 1.0, 1.0, 2.0]))

        assert count_upcrossings(trace, 1.0) == 2
        assert count_exceedances(trace, 2.0) == 0
        assert count_upcrossings(trace, 2.0) == 0

    def test_below_minimum(self, hand_trace):
        """Test that every point exceeds and nothing upcrosses below the minimum."""
        assert count_exceedances(hand_trace, 0.0) == 5
        assert count_upcrossings(hand_trace, 0.0) == 0

    @pytest.mark.parametrize("c", [math.nan, math.inf, -math.inf])
    def test_non_finite_threshold(self, hand_trace, c):
        """Test that non-finite thresholds are rejected."""
        with pytest.raises(InvalidArgumentError):
            count_upcrossings(hand_trace, c)
        with pytest.raises(InvalidArgumentError):
            count_exceedances(hand_trace, c)

    def test_matches_brute_force_and_orderings(self):
        """Test oracle equivalence and the count orderings on random traces."""
        rng = np.random.default_rng(11)
        grid = ScanGrid.equally_spaced(0.0, 1.0, 40)
        thresholds = np.linspace(-2.5, 2.5, 21)
        for _ in range(50):
            trace = ProcessTrace(grid, rng.standard_normal(40))
            exceedances = [count_exceedances(trace, c) for c in thresholds]
            for c, n_exceed in zip(thresholds, exceedances, strict=True):
                n_up = count_upcrossings(trace, c)
                assert n_up == brute_force_upcrossings(trace.values, c)
                assert n_up <= n_exceed <= grid.resolution
                assert (global_max(trace).c_R > c) == (n_exceed >= 1)
            assert all(a >= b for a, b in zip(exceedances, exceedances[1:], strict=False))

    def test_batch_matches_scalar(self):
        """Test the vectorized counts against the scalar ones."""
        rng = np.random.default_rng(3)
        grid = ScanGrid.equally_spaced(0.0, 1.0, 25)
        values = rng.chisquare(1, size=(8, 25))
        thresholds = np.array([0.1, 1.0, 4.0])

        up = count_upcrossings_batch(values, thresholds)
        ex = count_exceedances_batch(values, thresholds)

        assert up.shape == (8, 3)
        for i, row in enumerate(values):
            trace = ProcessTrace(grid, row)
            for j, c in enumerate(thresholds):
                assert up[i, j] == count_upcrossings(trace, c)
                assert ex[i, j] == count_exceedances(trace, c)


class TestGlobalMax:
    """Test the discrete maximum."""

    def test_maximum_and_location(self):
        """Test the maximum on a three-point grid."""
        trace = ProcessTrace(ScanGrid.from_points([10.0, 20.0, 30.0]), np.array([1.0, 5.0, 3.0]))

        assert global_max(trace) == (5.0, 20.0)

    def test_constant_trace_ties_to_lower_end(self, small_grid):
        """Test that ties go to the smallest θ."""
        trace = ProcessTrace(small_grid, np.full(5, 2.0))

        c_R, theta_hat = global_max(trace)

        assert c_R == 2.0
        assert theta_hat == small_grid.lower
