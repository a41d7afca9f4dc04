"""Tests for CSV and JSON file handling."""

import json

import numpy as np
import pytest

from tohm.exceptions import ConfigError
from tohm.grid import ProcessTrace, ScanGrid
from tohm.io import (
    dump_traces,
    read_dataset,
    read_ensemble,
    read_trace,
    to_json_text,
    write_dataset,
    write_json,
    write_trace,
)
from tohm.models import BinomialGroups, EventSample
from tohm.montecarlo import estimate_upcrossings, simulate_traces


class TestTraceFiles:
    """Test trace CSV files."""

    def test_write_then_read(self, tmp_path, hand_trace):
        """Test that a written trace is read back exactly."""
        path = tmp_path / "trace.csv"

        write_trace(hand_trace, path)
        restored = read_trace(path)

        assert path.read_text(encoding="utf-8").splitlines()[0] == "theta,stat"
        assert restored.grid == hand_trace.grid
        np.testing.assert_array_equal(restored.values, hand_trace.values)

    def test_full_precision(self, tmp_path):
        """Test that floats survive without rounding."""
        grid = ScanGrid.from_points([0.1, 0.2 + 1e-15])
        trace = ProcessTrace(grid, np.array([1.0 / 3.0, 2.0 / 7.0]))
        path = tmp_path / "trace.csv"

        write_trace(trace, path)

        restored = read_trace(path)

        np.testing.assert_allclose(restored.values, trace.values, rtol=1e-15, atol=0)
        np.testing.assert_allclose(restored.grid.points, grid.points, rtol=1e-15, atol=0)

    def test_lf_line_endings(self, tmp_path, hand_trace):
        """Test that files are written with LF line endings."""
        path = tmp_path / "trace.csv"

        write_trace(hand_trace, path)

        assert b"\r\n" not in path.read_bytes()

    @pytest.mark.parametrize(
        "content,fragment",
        [
            ("", "file is empty"),
            ("theta,stat\n", "no rows"),
            ("theta,value\n1,2\n2,3\n", "does not match 'theta,stat'"),
            ("theta,stat\n1,2\n2,abc\n", "column 'stat', row 2: 'abc'"),
            ("theta,stat\n1,2\n2,inf\n", "column 'stat', row 2"),
            ("theta,stat\n1,2\n", "at least 2 rows"),
            ("theta,stat\n2,1\n1,2\n", "column 'theta'"),
        ],
        ids=["empty", "header-only", "header", "non-numeric", "infinite", "one-row", "order"],
    )
    def test_invalid_files(self, tmp_path, content, fragment):
        """Test that malformed traces are config errors naming the problem."""
        path = tmp_path / "trace.csv"
        path.write_text(content, encoding="utf-8")

        with pytest.raises(ConfigError, match=fragment) as exc_info:
            read_trace(path)

        assert exc_info.value.source == str(path)

    def test_every_bad_cell_is_reported(self, tmp_path):
        """Test that all invalid cells are listed."""
        path = tmp_path / "trace.csv"
        path.write_text("theta,stat\nx,1\n2,y\n3,4\n", encoding="utf-8")

        with pytest.raises(ConfigError) as exc_info:
            read_trace(path)

        assert len(exc_info.value.errors) == 2

    def test_missing_file(self, tmp_path):
        """Test that a missing trace is a config error."""
        with pytest.raises(ConfigError, match="file not found"):
            read_trace(tmp_path / "absent.csv")


class TestDatasetFiles:
    """Test data-set CSV files."""

    def test_event_sample(self, tmp_path):
        """Test an event sample written and read back."""
        sample = EventSample(np.array([1.5, 2.25, 30.0]))
        path = tmp_path / "data.csv"

        write_dataset(sample, path)

        assert read_dataset(path) == sample

    def test_grouped_counts_written_as_integers(self, tmp_path):
        """Test that cases and trials are written without a decimal point."""
        groups = BinomialGroups(x=[20.0, 21.0], cases=[1, 0], trials=[100, 90])
        path = tmp_path / "sub" / "groups.csv"

        write_dataset(groups, path)

        assert path.read_text(encoding="utf-8").splitlines() == [
            "x,cases,trials",
            "20.0,1,100",
            "21.0,0,90",
        ]
        assert read_dataset(path) == groups

    def test_inconsistent_groups(self, tmp_path):
        """Test that invalid binomial rows are config errors."""
        path = tmp_path / "groups.csv"
        path.write_text("x,cases,trials\n20,5,3\n", encoding="utf-8")

        with pytest.raises(ConfigError, match="cases"):
            read_dataset(path)

    def test_unknown_header(self, tmp_path):
        """Test that the header must name one of the two layouts."""
        path = tmp_path / "data.csv"
        path.write_text("energy\n1.0\n", encoding="utf-8")

        with pytest.raises(ConfigError, match="'y' or 'x,cases,trials'"):
            read_dataset(path)


class TestJsonFiles:
    """Test reports and ensemble summaries."""

    def test_sorted_keys_and_trailing_newline(self):
        """Test the deterministic JSON layout."""
        text = to_json_text({"b": 1.0, "a": None})

        assert text == '{\n  "a": null,\n  "b": 1.0\n}\n'

    def test_infinite_values_survive(self, tmp_path):
        """Test that infinite significances are written as JSON constants."""
        path = tmp_path / "r.json"

        write_json({"sigma": float("inf")}, path)

        assert json.loads(path.read_text(encoding="utf-8"))["sigma"] == float("inf")

    def test_ensemble_round_trip(self, tmp_path, iid_chi2):
        """Test that a written ensemble summary is read back equal."""
        grid = ScanGrid.equally_spaced(0.0, 50.0, 20)
        summary = estimate_upcrossings(iid_chi2, grid, 0.5, 10, 1, master_seed=3).summary("abc")
        path = tmp_path / "ensemble.json"

        write_json(summary, path)

        assert read_ensemble(path) == summary

    @pytest.mark.parametrize(
        "content,fragment",
        [
            ("{not json", "invalid JSON at line 1"),
            ("[1, 2]", "expected a mapping"),
            ('{"n_replicates": 10}', "required"),
        ],
    )
    def test_invalid_ensemble(self, tmp_path, content, fragment):
        """Test that broken or incomplete summaries are config errors."""
        path = tmp_path / "ensemble.json"
        path.write_text(content, encoding="utf-8")

        with pytest.raises(ConfigError, match=fragment):
            read_ensemble(path)

    def test_missing_ensemble(self, tmp_path):
        """Test that a missing summary is a config error."""
        with pytest.raises(ConfigError, match="file not found"):
            read_ensemble(tmp_path / "absent.json")


class TestDumpTraces:
    """Test per-replicate trace dumps."""

    def test_one_file_per_replicate(self, tmp_path, iid_chi2):
        """Test numbering and content of dumped traces."""
        grid = ScanGrid.equally_spaced(0.0, 50.0, 10)
        batch = simulate_traces(iid_chi2, grid, 3, 1, master_seed=1)

        paths = dump_traces(batch, tmp_path / "traces")

        assert [p.name for p in paths] == [f"trace_{i:05d}.csv" for i in range(3)]
        np.testing.assert_allclose(read_trace(paths[2]).values, batch.values[2], rtol=1e-15)
