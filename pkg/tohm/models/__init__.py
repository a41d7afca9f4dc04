"""Sub-test models and synthetic null processes.

The following models are available:

- `tohm.models.bump` - Gaussian bump on a truncated power-law background
- `tohm.models.nonnested` - power law versus a dark-matter spectrum (detection and exclusion)
- `tohm.models.breakpoint` - logistic regression with a break in slope
- `tohm.models.synthetic` - Gaussian, chi-square and chi-bar-square sequences with known law
"""

from __future__ import annotations

from tohm.exceptions import InvalidArgumentError
from tohm.models.base import (
    BinomialGroups,
    Dataset,
    Direction,
    EventSample,
    NullFit,
    NullProcess,
    ProfileFit,
    ScanResult,
    SubTestModel,
    exclusion_scan,
    normalized_scores,
    run_scan,
    scan,
)
from tohm.models.breakpoint import BreakpointModel
from tohm.models.bump import BumpModel
from tohm.models.nonnested import NonNestedModel
from tohm.models.synthetic import SyntheticProcess, SyntheticSettings


MODEL_CLASSES: list[type[SubTestModel]] = [BumpModel, NonNestedModel, BreakpointModel]
"""Registered statistical models, selectable by their `name`."""

MODEL_NAMES = [cls.name for cls in MODEL_CLASSES] + [SyntheticProcess.name]


def get_model_class(name: str) -> type[SubTestModel]:
    """Look up a registered model class by name."""
    for cls in MODEL_CLASSES:
        if cls.name == name:
            return cls
    raise InvalidArgumentError(
        f"Unknown model '{name}'. Valid models: {', '.join(MODEL_NAMES)}"
    )


__all__ = [
    "MODEL_CLASSES",
    "MODEL_NAMES",
    "BinomialGroups",
    "BreakpointModel",
    "BumpModel",
    "Dataset",
    "Direction",
    "EventSample",
    "NonNestedModel",
    "NullFit",
    "NullProcess",
    "ProfileFit",
    "ScanResult",
    "SubTestModel",
    "SyntheticProcess",
    "SyntheticSettings",
    "exclusion_scan",
    "get_model_class",
    "normalized_scores",
    "run_scan",
    "scan",
]
