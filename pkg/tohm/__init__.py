"""TOHM - global significance of likelihood-ratio scans.

A nuisance parameter that is only identifiable under the alternative is scanned over a
grid. The maximum of the resulting sub-test statistics is turned into a global p-value by
an upcrossing bound whose only unknown, the expected number of upcrossings of a low
threshold, is estimated by Monte-Carlo simulation.

.. include:: ../README.md
"""

from tohm import (
    cli,
    config,
    diagnostics,
    exceptions,
    grid,
    io,
    models,
    montecarlo,
    numerics,
    tail_bound,
)


__all__ = [
    "cli",
    "config",
    "diagnostics",
    "exceptions",
    "grid",
    "io",
    "models",
    "montecarlo",
    "numerics",
    "tail_bound",
]
