"""Run configuration for the `tohm` command line.

A run is described by a flat YAML file whose keys are the fields of `RunConfig`;
command-line flags override individual keys. The merged mapping is checked against the
JSON schema of `RunConfig` (so that every bad field is reported by path) and then parsed
by pydantic.

Example:

```yaml
model: bump
params: {phi: 1.4, theta: 3.5, eta: 0.0274}
resolution: 100
c0: 0.1
n_replicates: 200
master_seed: 20160314
```
"""

from __future__ import annotations

import logging
import os
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Literal, get_args

import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from tohm._util import canonical_json, compute_content_hash
from tohm._validation_helpers import validate_mapping
from tohm.constants import (
    DEFAULT_MASTER_SEED,
    DEFAULT_N_OBS,
    DEFAULT_N_PATHS,
    DEFAULT_N_REPLICATES,
    TOHM_WORKERS,
)
from tohm.exceptions import ConfigError
from tohm.grid import ScanGrid
from tohm.models import SubTestModel, SyntheticProcess, SyntheticSettings, get_model_class
from tohm.models.base import Direction, NullProcess
from tohm.numerics import OptimizerSettings


logger = logging.getLogger(__name__)

ModelName = Literal["bump", "nonnested", "breakpoint", "synthetic"]

_UNHASHED_FIELDS = {"workers", "output", "dump_traces", "dump_covariance"}
"""Fields that do not influence results and are left out of the config hash."""


class RunConfig(BaseModel):
    """Everything a subcommand needs to reproduce its output."""

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    model: ModelName = Field(default="bump", description="Statistical model or 'synthetic'")
    test: Direction | None = Field(
        default=None, description="Test direction; defaults to the model's first direction"
    )
    params: dict[str, float] = Field(
        default_factory=dict, description="Simulation parameters of the model"
    )
    search_range: tuple[float, float] | None = Field(
        default=None, alias="range", description="Search range [lower, upper] of θ"
    )
    resolution: int = Field(default=50, ge=2, description="Number of grid points R")
    resolutions: list[int] = Field(
        default_factory=lambda: [15, 30, 50, 100, 200, 500],
        description="Grid resolutions for the upcrossing and ratio tables",
    )
    c0: float | Literal["auto", "direct"] = Field(
        default="auto",
        description="Reference threshold, 'auto', or 'direct' (compare only)",
    )
    sensitivity: bool = Field(
        default=False, description="Pick c0 from simulated paths when no closed form exists"
    )
    master_seed: int = Field(default=DEFAULT_MASTER_SEED, ge=0, le=2**64 - 1)
    n_replicates: int = Field(default=DEFAULT_N_REPLICATES, ge=1)
    n_obs: int = Field(
        default=DEFAULT_N_OBS,
        ge=1,
        description="Observations per data set; defaults to the size the model is calibrated for",
    )
    workers: int | None = Field(default=None, ge=1, description="Worker processes")
    c_ladder: list[float] | None = Field(
        default=None, description="Thresholds for the oracle and ratio tables"
    )
    n_paths: int = Field(default=DEFAULT_N_PATHS, ge=1)
    n_tau: int = Field(default=50, ge=1, description="Length of the Berman τ ladder")
    bootstrap_null: bool = Field(
        default=True,
        description="Simulate null replicates from the null fit of `dataset` when given",
    )
    warm_start: bool = True
    abs_tol: float = Field(default=1e-8, gt=0)
    max_iters: int = Field(default=500, ge=1)
    restarts: int = Field(default=3, ge=0)
    synthetic: SyntheticSettings = Field(default_factory=SyntheticSettings)
    dataset: Path | None = None
    trace: Path | None = None
    ensemble: Path | None = None
    output: Path | None = None
    dump_traces: Path | None = None
    dump_covariance: Path | None = None

    @model_validator(mode="before")
    @classmethod
    def _model_n_obs(cls, data: Any) -> Any:  # noqa: ANN401
        if not isinstance(data, dict) or data.get("n_obs") is not None:
            return data
        model = data.get("model", "bump")
        if model == "synthetic" or model not in get_args(ModelName):
            return data
        return {**data, "n_obs": get_model_class(model).default_n_obs}


def load_config(
    path: Path | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> RunConfig:
    """Load a YAML config and apply flag overrides.

    `None` overrides are ignored. The `params` and `synthetic` blocks are merged key by key.

    Raises:
        ConfigError: With one message per invalid field.
    """
    source = str(path) if path is not None else "command line"
    raw: dict[str, Any] = {}
    if path is not None:
        try:
            loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
        except FileNotFoundError as ex:
            raise ConfigError(["file not found"], source) from ex
        except yaml.YAMLError as ex:
            raise ConfigError([f"invalid YAML: {ex}"], source) from ex
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(["top level of a config file must be a mapping"], source)
        raw = loaded

    merged = dict(raw)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in {"params", "synthetic"} and isinstance(raw.get(key), dict):
            merged[key] = {**raw[key], **value}
        else:
            merged[key] = value

    config = validate_mapping(RunConfig, merged, source)
    logger.debug(f"Loaded config from {source} (hash {config_hash(config)})")
    return config


def config_hash(config: RunConfig) -> str:
    """Digest of everything that influences results; embedded in every output."""
    payload = config.model_dump(mode="json", by_alias=True, exclude=_UNHASHED_FIELDS)
    return compute_content_hash(canonical_json(payload))


def resolve_workers(config: RunConfig) -> int:
    """Worker count from the config, else from the environment, else 1."""
    if config.workers is not None:
        return config.workers
    env = os.environ.get(TOHM_WORKERS)
    if env is None or not env.strip():
        return 1
    try:
        workers = int(env)
    except ValueError:
        workers = 0
    if workers < 1:
        raise ConfigError([f"{TOHM_WORKERS} must be a positive integer, got '{env}'"])
    return workers


def optimizer_settings(config: RunConfig) -> OptimizerSettings:
    return OptimizerSettings(
        abs_tol=config.abs_tol, max_iters=config.max_iters, restarts=config.restarts
    )


def build_model(config: RunConfig) -> SubTestModel:
    """Statistical model described by the config."""
    if config.model == "synthetic":
        raise ConfigError(
            ["model 'synthetic' has no data sets or fits; choose a statistical model"]
        )
    cls = get_model_class(config.model)
    return cls(
        config.params,
        direction=config.test,
        search_range=config.search_range,
        optimizer=optimizer_settings(config),
        warm_start=config.warm_start,
    )


def build_synthetic(config: RunConfig) -> SyntheticProcess:
    settings = config.synthetic
    if config.search_range is not None:
        lower, upper = config.search_range
        settings = settings.model_copy(update={"lower": lower, "upper": upper})
    return SyntheticProcess.from_settings(settings)


def build_source(config: RunConfig) -> SubTestModel | SyntheticProcess:
    """Model or synthetic process, before any bootstrap from observed data."""
    if config.model == "synthetic":
        return build_synthetic(config)
    return build_model(config)


def build_grid(config: RunConfig, source: NullProcess) -> ScanGrid:
    """Equally spaced grid of `config.resolution` points over the source's search range."""
    lower, upper = source.search_range
    return ScanGrid.equally_spaced(lower, upper, config.resolution)
