"""Shared test fixtures."""

import os
from pathlib import Path

import numpy as np
import pytest

from tohm.constants import TOHM_DOWN_DATASET
from tohm.grid import ProcessTrace, ScanGrid
from tohm.models import BumpModel, NonNestedModel, SyntheticProcess
from tohm.tail_bound import ProcessFamily


@pytest.fixture
def resources_path() -> Path:
    """Fixture for the resources directory path."""
    return Path(__file__).parent / "resources"


@pytest.fixture
def small_grid() -> ScanGrid:
    """Five equally spaced points on [10, 50]."""
    return ScanGrid.equally_spaced(10.0, 50.0, 5)


@pytest.fixture
def hand_trace(small_grid: ScanGrid) -> ProcessTrace:
    """Trace with two upcrossings and two exceedances of 1.5."""
    return ProcessTrace(small_grid, np.array([0.5, 2.0, 1.0, 3.0, 0.2]))


@pytest.fixture
def iid_chi2() -> SyntheticProcess:
    """Independent chi_square(1) sequence on a wide range."""
    return SyntheticProcess(ProcessFamily.chi_square(1), search_range=(0.0, 50.0))


@pytest.fixture
def smooth_chi2() -> SyntheticProcess:
    """Strongly correlated chi_square(1) sequence."""
    return SyntheticProcess(
        ProcessFamily.chi_square(1), length_scale=2.0, search_range=(0.0, 50.0)
    )


@pytest.fixture
def bump_model() -> BumpModel:
    """Bump model at the reference parameters."""
    return BumpModel({"phi": 1.4, "theta": 3.5, "eta": 0.0})


@pytest.fixture
def nonnested_model() -> NonNestedModel:
    return NonNestedModel({"phi": 1.4, "theta": 35.0, "eta": 0.0})


@pytest.fixture
def down_dataset_path(resources_path: Path) -> Path:
    """Location of the grouped Down-syndrome data; skips the test when it is missing."""
    path = Path(os.environ.get(TOHM_DOWN_DATASET, resources_path / "down_syndrome.csv"))
    if not path.exists():
        pytest.skip(f"Down-syndrome dataset not available at {path}")
    return path
