"""Tests for run configuration loading."""

from pathlib import Path

import pytest

from tohm.config import (
    RunConfig,
    build_grid,
    build_model,
    build_source,
    config_hash,
    load_config,
    resolve_workers,
)
from tohm.constants import BREAKPOINT_N_OBS, DEFAULT_MASTER_SEED, DEFAULT_N_OBS, TOHM_WORKERS
from tohm.exceptions import ConfigError
from tohm.models import BumpModel, Direction, NonNestedModel, SyntheticProcess
from tohm.tail_bound import ProcessFamily


def _write(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "run.yaml"
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadConfig:
    """Test YAML loading and overrides."""

    def test_defaults(self):
        """Test the defaults without a file."""
        config = load_config()

        assert config.model == "bump"
        assert config.resolution == 50
        assert config.c0 == "auto"
        assert config.master_seed == DEFAULT_MASTER_SEED
        assert config.resolutions == [15, 30, 50, 100, 200, 500]

    def test_file_values(self, tmp_path):
        """Test that file keys are parsed, including the range alias."""
        path = _write(
            tmp_path,
            "model: nonnested\n"
            "test: exclusion\n"
            "params: {phi: 1.4, theta: 35.0}\n"
            "range: [0.8, 2.5]\n"
            "c0: 0.3\n"
            "abs_tol: 1.0e-9\n",
        )

        config = load_config(path)

        assert config.model == "nonnested"
        assert config.test is Direction.EXCLUSION
        assert config.params == {"phi": 1.4, "theta": 35.0}
        assert config.search_range == (0.8, 2.5)
        assert config.c0 == 0.3
        assert config.abs_tol == 1e-9

    def test_overrides_win_and_merge_params(self, tmp_path):
        """Test that flags override keys and params merge key by key."""
        path = _write(tmp_path, "params: {phi: 1.4, theta: 3.5}\nresolution: 20\n")

        config = load_config(
            path, {"resolution": 80, "params": {"eta": 0.02}, "c0": None, "range": [2.0, 9.0]}
        )

        assert config.resolution == 80
        assert config.params == {"phi": 1.4, "theta": 3.5, "eta": 0.02}
        assert config.c0 == "auto"
        assert config.search_range == (2.0, 9.0)

    def test_empty_file(self, tmp_path):
        """Test that an empty file gives the defaults."""
        assert load_config(_write(tmp_path, "")) == RunConfig()

    def test_all_errors_reported(self, tmp_path):
        """Test that every invalid field is reported at once with the file name."""
        path = _write(tmp_path, "resolution: 1\nmodel: cusp\nunknown_key: 3\n")

        with pytest.raises(ConfigError) as exc_info:
            load_config(path)

        message = str(exc_info.value)
        assert str(path) in message
        assert len(exc_info.value.errors) == 3
        assert "resolution" in message
        assert "model" in message
        assert "unknown_key" in message

    @pytest.mark.parametrize(
        "text,fragment",
        [("a: [1, 2", "invalid YAML"), ("- 1\n- 2\n", "mapping")],
        ids=["syntax", "not-a-mapping"],
    )
    def test_malformed_file(self, tmp_path, text, fragment):
        """Test YAML syntax errors and non-mapping documents."""
        with pytest.raises(ConfigError, match=fragment):
            load_config(_write(tmp_path, text))

    def test_missing_file(self, tmp_path):
        """Test that a missing config file is a config error."""
        with pytest.raises(ConfigError, match="file not found"):
            load_config(tmp_path / "absent.yaml")

    @pytest.mark.parametrize("c0", ["auto", "direct", 0.5])
    def test_c0_forms(self, c0):
        """Test the accepted forms of c0."""
        assert load_config(overrides={"c0": c0}).c0 == c0

    def test_c0_rejects_other_words(self):
        """Test that c0 must be numeric or a known keyword."""
        with pytest.raises(ConfigError):
            load_config(overrides={"c0": "low"})

    @pytest.mark.parametrize(
        "model,expected",
        [("bump", DEFAULT_N_OBS), ("synthetic", DEFAULT_N_OBS), ("breakpoint", BREAKPOINT_N_OBS)],
    )
    def test_n_obs_follows_the_model(self, model, expected):
        """Test that an unset n_obs takes the model's default size."""
        assert load_config(overrides={"model": model}).n_obs == expected

    def test_explicit_n_obs_wins(self, tmp_path):
        """Test that a configured n_obs is kept for every model."""
        config = load_config(_write(tmp_path, "model: breakpoint\nn_obs: 50000\n"))

        assert config.n_obs == 50_000


class TestConfigHash:
    """Test the reproducibility digest."""

    def test_stable_and_sensitive(self):
        """Test that the hash follows result-relevant fields only."""
        base = load_config(overrides={"master_seed": 1})

        assert config_hash(base) == config_hash(load_config(overrides={"master_seed": 1}))
        assert config_hash(base) != config_hash(load_config(overrides={"master_seed": 2}))
        assert len(config_hash(base)) == 16

    def test_ignores_workers_and_outputs(self):
        """Test that worker count and output locations do not change the hash."""
        a = load_config(overrides={"workers": 1, "output": "a.json"})
        b = load_config(overrides={"workers": 8, "output": "elsewhere/b.json"})

        assert config_hash(a) == config_hash(b)


class TestResolveWorkers:
    """Test the worker count precedence."""

    def test_config_wins(self, monkeypatch):
        """Test that the config value wins over the environment."""
        monkeypatch.setenv(TOHM_WORKERS, "4")

        assert resolve_workers(load_config(overrides={"workers": 2})) == 2

    def test_environment(self, monkeypatch):
        """Test the environment fallback."""
        monkeypatch.setenv(TOHM_WORKERS, "3")

        assert resolve_workers(RunConfig()) == 3

    def test_default(self, monkeypatch):
        """Test the serial default."""
        monkeypatch.delenv(TOHM_WORKERS, raising=False)

        assert resolve_workers(RunConfig()) == 1

    @pytest.mark.parametrize("value", ["zero", "0", "-2"])
    def test_invalid_environment(self, monkeypatch, value):
        """Test that invalid environment values are config errors."""
        monkeypatch.setenv(TOHM_WORKERS, value)

        with pytest.raises(ConfigError, match=TOHM_WORKERS):
            resolve_workers(RunConfig())


class TestBuilders:
    """Test construction of models, processes and grids."""

    def test_build_model(self):
        """Test a configured model with its optimizer settings."""
        config = load_config(
            overrides={
                "model": "nonnested",
                "test": "exclusion",
                "params": {"theta": 40.0},
                "max_iters": 50,
                "warm_start": False,
            }
        )

        model = build_model(config)

        assert isinstance(model, NonNestedModel)
        assert model.direction is Direction.EXCLUSION
        assert model.search_range == (0.5, 3.0)
        assert model.optimizer.max_iters == 50
        assert not model.warm_start

    def test_build_model_rejects_synthetic(self):
        """Test that synthetic processes have no statistical model."""
        with pytest.raises(ConfigError, match="synthetic"):
            build_model(load_config(overrides={"model": "synthetic"}))

    def test_build_synthetic_with_range_override(self):
        """Test that the range flag overrides the synthetic block."""
        config = load_config(
            overrides={
                "model": "synthetic",
                "synthetic": {"family": "chi_square(2)", "length_scale": 0.5},
                "range": [0.0, 10.0],
            }
        )

        source = build_source(config)

        assert isinstance(source, SyntheticProcess)
        assert source.family == ProcessFamily.chi_square(2)
        assert source.search_range == (0.0, 10.0)

    def test_build_grid(self):
        """Test the grid over the model's default search range."""
        config = load_config(overrides={"resolution": 35})
        source = build_source(config)

        grid = build_grid(config, source)

        assert isinstance(source, BumpModel)
        assert (grid.lower, grid.upper, grid.resolution) == (1.0, 35.0, 35)
