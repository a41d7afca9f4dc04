"""Exception hierarchy for the TOHM scan toolkit.

Every error this package raises derives from `TohmError`. The CLI maps
the concrete classes to process exit codes (see `tohm.cli`).
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np


class TohmError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(TohmError, ValueError):
    """Raised when an argument falls outside the domain of an operation."""


class ConfigError(TohmError, ValueError):
    """Raised when a config file, a flag or an input file fails validation.

    Carries one message per offending field so callers can print all of them at once.
    """

    def __init__(self, errors: Sequence[str], source: str | None = None):
        self.errors = list(errors)
        self.source = source
        header = f"Invalid input in '{source}':" if source else "Invalid input:"
        details = "\n".join(f"  - {e}" for e in self.errors)
        super().__init__(f"{header}\n{details}")


class NonConvergenceError(TohmError, RuntimeError):
    """Raised when an optimizer exhausts its iteration budget without meeting tolerance."""

    def __init__(self, best_x: np.ndarray, best_value: float, n_iters: int):
        self.best_x = np.asarray(best_x, dtype=float)
        self.best_value = float(best_value)
        self.n_iters = n_iters
        super().__init__(
            f"Optimizer did not converge within {n_iters} iterations "
            f"(best value {best_value:.6g} at {self.best_x.tolist()})."
        )


class FitFailureError(TohmError, RuntimeError):
    """Raised when a null or profile fit cannot be completed."""

    def __init__(self, message: str, theta_r: float | None = None):
        self.theta_r = theta_r
        where = f" at theta_r={theta_r:.6g}" if theta_r is not None else ""
        super().__init__(f"Fit failed{where}: {message}")


class ScanAbortedError(FitFailureError):
    """Raised when a grid-point fit fails and the whole scan is abandoned."""

    def __init__(self, theta_r: float, index: int, cause: Exception):
        self.index = index
        self.cause = cause
        super().__init__(f"scan aborted at grid point {index} ({cause})", theta_r=theta_r)


class EnsembleFailureError(TohmError, RuntimeError):
    """Raised when too many Monte-Carlo replicates fail to fit.

    Silently dropping failed replicates would bias the expected upcrossing estimate,
    so the failing seeds are listed for reproduction.
    """

    def __init__(self, failed_seeds: Sequence[int], n_replicates: int):
        self.failed_seeds = list(failed_seeds)
        self.n_replicates = n_replicates
        shown = ", ".join(str(s) for s in self.failed_seeds[:10])
        more = f" and {len(self.failed_seeds) - 10} more" if len(self.failed_seeds) > 10 else ""
        super().__init__(
            f"{len(self.failed_seeds)} of {n_replicates} replicates failed to fit "
            f"(seeds: {shown}{more})."
        )
