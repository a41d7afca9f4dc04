"""Constants for the TOHM scan toolkit.

This module contains default sizes, numerical tolerances and environment variable
names used throughout the package.
"""

TOHM_WORKERS = "TOHM_WORKERS"
"""Environment variable name for the default Monte-Carlo worker count.

If set, this environment variable gives the number of worker processes used to run
independent replicates. If not set, replicates run serially in the calling process.
Results do not depend on this value.
"""

TOHM_DOWN_DATASET = "TOHM_DOWN_DATASET"
"""Environment variable pointing at a grouped Down-syndrome CSV (`x,cases,trials`).

Only used by the test suite to check golden values; the dataset is not shipped.
"""

DEFAULT_N_REPLICATES = 200
"""Default number of null replicates used to estimate the expected upcrossings at c0."""

DEFAULT_N_OBS = 1000
"""Default number of observations per simulated null replicate."""

BREAKPOINT_N_OBS = 354_880
"""Default number of trials per simulated break-point data set (the Down-syndrome records)."""

DEFAULT_N_PATHS = 10
"""Default number of raw null trace paths emitted for c0 selection."""

DEFAULT_MASTER_SEED = 20160314
"""Default master seed. All randomness flows from this value; nothing reads the clock."""

MAX_FAILED_REPLICATE_FRACTION = 0.01
"""Fraction of failed replicates above which an ensemble is aborted."""

LOGLIK_SLACK = 1e-6
"""Numerical slack allowed when the alternative log-likelihood falls below the null one."""

SCORE_STEP = 1e-5
"""Relative finite-difference step used for score and information estimates."""

BERMAN_TAU_START = 1.5
"""First lag of the Berman ladder, chosen so that log(tau) is positive."""

QUADRATURE_TOL = 1e-10
"""Absolute and relative tolerance for adaptive quadrature of truncation normalizers."""

CONFIG_HASH_LENGTH = 16
"""Number of hex characters of the SHA-256 config digest embedded in reports."""
