"""Counter-based seed derivation for Monte-Carlo replicates.

Replicate r draws its data from `numpy.random.default_rng(replicate_seed(master, r))`,
so a replicate's stream depends only on (master seed, r) and never on scheduling.
`replicate_seed` is the (r + 1)-th output of a SplitMix64 generator started at the
master seed.
"""

from __future__ import annotations

from tohm.exceptions import InvalidArgumentError


_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64_mix(z: int) -> int:
    """SplitMix64 output function (variant 13 of Stafford's mixers)."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def check_master_seed(master_seed: int) -> int:
    if not 0 <= master_seed <= _MASK64:
        raise InvalidArgumentError(
            f"master seed must be an unsigned 64-bit integer, got {master_seed}"
        )
    return int(master_seed)


def replicate_seed(master_seed: int, r: int) -> int:
    """Seed of replicate `r` (0-based) under `master_seed`."""
    check_master_seed(master_seed)
    if r < 0:
        raise InvalidArgumentError(f"replicate index must be >= 0, got {r}")
    return splitmix64_mix(master_seed + (r + 1) * _GOLDEN_GAMMA)


def replicate_seeds(master_seed: int, n: int) -> list[int]:
    """Seeds of replicates 0..n-1."""
    return [replicate_seed(master_seed, r) for r in range(n)]
