"""Tests for counter-based replicate seeds."""

import pytest

from tohm._seeding import check_master_seed, replicate_seed, replicate_seeds, splitmix64_mix
from tohm.exceptions import InvalidArgumentError


class TestReplicateSeed:
    """Test seed derivation."""

    def test_matches_splitmix64_reference_stream(self):
        """Test the first outputs of SplitMix64 started at 0."""
        assert replicate_seeds(0, 3) == [
            0xE220A8397B1DCDAF,
            0x6E789E6AA1B965F4,
            0x06C45D188009454F,
        ]

    def test_depends_only_on_master_and_index(self):
        """Test that a seed does not depend on how many others were drawn."""
        assert replicate_seeds(42, 100)[57] == replicate_seed(42, 57)

    def test_distinct_across_indices_and_masters(self):
        """Test that nearby indices and masters give distinct seeds."""
        seeds = replicate_seeds(7, 1000) + replicate_seeds(8, 1000)

        assert len(set(seeds)) == len(seeds)

    def test_output_fits_64_bits(self):
        """Test that seeds near the top of the range wrap around."""
        top = (1 << 64) - 1

        assert 0 <= replicate_seed(top, 5) <= top
        assert 0 <= splitmix64_mix(1 << 70) <= top

    @pytest.mark.parametrize("master", [-1, 1 << 64])
    def test_invalid_master(self, master):
        """Test that the master seed must be an unsigned 64-bit integer."""
        with pytest.raises(InvalidArgumentError):
            check_master_seed(master)
        with pytest.raises(InvalidArgumentError):
            replicate_seed(master, 0)

    def test_invalid_index(self):
        """Test that replicate indices are non-negative."""
        with pytest.raises(InvalidArgumentError):
            replicate_seed(1, -1)
