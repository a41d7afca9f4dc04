"""Tests for utility functions."""

import math

import pytest

from tohm._util import canonical_json, compute_content_hash, format_pvalue, format_sigma
from tohm.exceptions import ConfigError


class TestComputeContentHash:
    """Test content hashing."""

    def test_known_digest(self):
        """Test the truncated SHA-256 of the empty string."""
        assert compute_content_hash("") == "e3b0c44298fc1c14"

    @pytest.mark.parametrize("length", [8, 16, 64])
    def test_length(self, length):
        """Test the requested digest length."""
        assert len(compute_content_hash("abc", length)) == length

    def test_content_sensitive(self):
        """Test that different content hashes differently."""
        assert compute_content_hash("a") != compute_content_hash("b")


class TestCanonicalJson:
    """Test canonical serialization."""

    def test_key_order_irrelevant(self):
        """Test that key order does not change the text."""
        assert canonical_json({"b": 1, "a": [1, 2]}) == canonical_json({"a": [1, 2], "b": 1})
        assert canonical_json({"b": 1, "a": 2}) == '{"a":2,"b":1}'


class TestFormatting:
    """Test human-readable formatting."""

    @pytest.mark.parametrize(
        "p,expected",
        [(2.11e-8, "2.11e-08"), (0.5, "5.00e-01"), (1.0, "1.00e+00"), (3.4, "> 1 (3.40e+00)")],
    )
    def test_format_pvalue(self, p, expected):
        """Test scientific notation and the marker above one."""
        assert format_pvalue(p) == expected

    @pytest.mark.parametrize(
        "sigma,expected",
        [(5.4812, "5.48 sigma"), (0.0, "0.00 sigma"), (math.inf, "inf sigma")],
    )
    def test_format_sigma(self, sigma, expected):
        """Test two decimals and the infinite case."""
        assert format_sigma(sigma) == expected


class TestConfigError:
    """Test the multi-message config error."""

    def test_message_lists_every_error(self):
        """Test the header and one line per error."""
        error = ConfigError(["first", "second"], "run.yaml")

        assert str(error) == "Invalid input in 'run.yaml':\n  - first\n  - second"
        assert error.errors == ["first", "second"]

    def test_without_source(self):
        """Test the header without a source."""
        assert str(ConfigError(["x"])).startswith("Invalid input:")

    def test_is_value_error(self):
        """Test that callers can catch it as a ValueError."""
        assert isinstance(ConfigError(["x"]), ValueError)
