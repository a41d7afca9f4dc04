"""Reading and writing the files exchanged by the CLI subcommands.

- traces: CSV with header `theta,stat`;
- data sets: CSV with header `y` (event energies) or `x,cases,trials` (grouped binomial);
- reports and ensemble summaries: JSON objects with sorted keys;
- tables: CSV, one column per field.

All files are UTF-8 with LF line endings. Floats are written at full precision. Read
errors raise `ConfigError` naming the file, the column and the offending row.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from pydantic import BaseModel

from tohm._validation_helpers import validate_mapping
from tohm.exceptions import ConfigError, InvalidArgumentError
from tohm.grid import ProcessTrace, ScanGrid
from tohm.models.base import BinomialGroups, Dataset, EventSample
from tohm.montecarlo import EnsembleSummary, TraceBatch


logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["theta", "stat"]
EVENT_COLUMNS = ["y"]
GROUPED_COLUMNS = ["x", "cases", "trials"]


def _read_numeric_csv(path: Path, accepted: Sequence[list[str]]) -> pd.DataFrame:
    """Read a CSV whose header is one of `accepted` and whose cells are all finite numbers."""
    source = str(path)
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError as ex:
        raise ConfigError(["file not found"], source) from ex
    except pd.errors.EmptyDataError as ex:
        raise ConfigError(["file is empty"], source) from ex
    except pd.errors.ParserError as ex:
        raise ConfigError([f"malformed CSV: {ex}"], source) from ex

    header = [str(c).strip() for c in raw.columns]
    if header not in [list(a) for a in accepted]:
        expected = " or ".join(f"'{','.join(a)}'" for a in accepted)
        raise ConfigError([f"header '{','.join(header)}' does not match {expected}"], source)
    raw.columns = header
    if raw.empty:
        raise ConfigError(["file has a header but no rows"], source)

    errors: list[str] = []
    numeric = pd.DataFrame(index=raw.index)
    for column in header:
        values = pd.to_numeric(raw[column].str.strip(), errors="coerce")
        for row in np.flatnonzero(~np.isfinite(values.to_numpy(dtype=float))):
            errors.append(
                f"column '{column}', row {row + 1}: '{raw[column].iloc[row]}' "
                "is not a finite number"
            )
        numeric[column] = values.astype(float)
    if errors:
        raise ConfigError(errors, source)
    return numeric


def read_trace(path: Path) -> ProcessTrace:
    """Load a trace written by `write_trace` (or by hand)."""
    frame = _read_numeric_csv(path, [TRACE_COLUMNS])
    if len(frame) < 2:
        raise ConfigError([f"a trace needs at least 2 rows, got {len(frame)}"], str(path))
    try:
        grid = ScanGrid.from_points(frame["theta"].to_numpy())
    except InvalidArgumentError as ex:
        raise ConfigError([f"column 'theta': {ex}"], str(path)) from ex
    return ProcessTrace(grid, frame["stat"].to_numpy())


def write_trace(trace: ProcessTrace, path: Path) -> None:
    write_table(
        pd.DataFrame({"theta": trace.grid.points, "stat": trace.values}, columns=TRACE_COLUMNS),
        path,
    )


def read_dataset(path: Path) -> Dataset:
    """Load an event sample (`y`) or a grouped binomial data set (`x,cases,trials`)."""
    frame = _read_numeric_csv(path, [EVENT_COLUMNS, GROUPED_COLUMNS])
    try:
        if list(frame.columns) == EVENT_COLUMNS:
            return EventSample(frame["y"].to_numpy())
        return BinomialGroups(
            x=frame["x"].to_numpy(),
            cases=frame["cases"].to_numpy(),
            trials=frame["trials"].to_numpy(),
        )
    except InvalidArgumentError as ex:
        raise ConfigError([str(ex)], str(path)) from ex


def write_dataset(dataset: Dataset, path: Path) -> None:
    if isinstance(dataset, EventSample):
        frame = pd.DataFrame({"y": dataset.y})
    else:
        frame = pd.DataFrame(
            {
                "x": dataset.x,
                "cases": dataset.cases.astype(np.int64),
                "trials": dataset.trials.astype(np.int64),
            },
            columns=GROUPED_COLUMNS,
        )
    write_table(frame, path)


def write_table(frame: pd.DataFrame, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.debug(f"Wrote {len(frame)} rows to {path}")


def to_json_text(payload: BaseModel | Mapping[str, Any]) -> str:
    """Deterministic JSON text: sorted keys, two-space indent, trailing newline."""
    if isinstance(payload, BaseModel):
        data = json.loads(payload.model_dump_json())
    else:
        data = dict(payload)
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_json(payload: BaseModel | Mapping[str, Any], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_json_text(payload), encoding="utf-8", newline="\n")
    logger.debug(f"Wrote {path}")


def read_ensemble(path: Path) -> EnsembleSummary:
    """Load and validate an ensemble summary written by `tohm pvalue`."""
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as ex:
        raise ConfigError(["file not found"], str(path)) from ex
    try:
        data = json.loads(text)
    except json.JSONDecodeError as ex:
        raise ConfigError([f"invalid JSON at line {ex.lineno}: {ex.msg}"], str(path)) from ex
    return validate_mapping(EnsembleSummary, data, str(path))


def dump_traces(batch: TraceBatch, directory: Path) -> list[Path]:
    """Write one trace CSV per successful replicate, numbered in replicate order."""
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for index, trace in enumerate(batch.traces):
        path = directory / f"trace_{index:05d}.csv"
        write_trace(trace, path)
        paths.append(path)
    logger.info(f"Dumped {len(paths)} replicate traces to {directory}")
    return paths
