"""Utility functions for the TOHM scan toolkit."""

import hashlib
import json
import logging
import math
import sys
from typing import Any

from tohm.constants import CONFIG_HASH_LENGTH


def initialize_logging(level: int = logging.INFO) -> None:
    """Initialize logging configuration for command-line runs."""
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )


def compute_content_hash(content: str, length: int = CONFIG_HASH_LENGTH) -> str:
    """Compute SHA256 hash of content.

    Args:
        content: Content to hash
        length: Number of hex characters to return (default: 16)

    Returns:
        First `length` characters of SHA256 hex digest
    """
    full_hash = hashlib.sha256(content.encode("utf-8")).hexdigest()
    return full_hash[:length]


def canonical_json(obj: Any) -> str:  # noqa: ANN401
    """Serialize an object to JSON with sorted keys and no incidental whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def format_pvalue(p: float) -> str:
    """Format a probability in scientific notation with 3 significant digits.

    Probabilities above one are kept unclipped in reports but shown with a "> 1" marker.
    """
    if p > 1.0:
        return f"> 1 ({p:.2e})"
    return f"{p:.2e}"


def format_sigma(sigma: float) -> str:
    """Format a significance in standard deviations with 2 decimals."""
    if math.isinf(sigma):
        return "inf sigma"
    return f"{sigma:.2f} sigma"
