import numpy as np
import pytest

from clonebench import substream
from clonebench import suc, trails


def test_single_round_needs_one_box():
    assert trails.min_active_sboxes(suc.DEFAULT_PERMUTATION, 1) == 1


@pytest.mark.parametrize("rounds", [1, 2, 5, 9])
def test_identity_permutation_activity_stays_put(rounds):
    assert trails.min_active_sboxes(tuple(range(64)), rounds) == rounds


@pytest.mark.parametrize("rounds", [5, 16, 40])
def test_default_permutation_bound(rounds):
    active = trails.min_active_sboxes(suc.DEFAULT_PERMUTATION, rounds)
    assert active >= rounds


def test_rounds_validated():
    with pytest.raises(ValueError):
        trails.min_active_sboxes(suc.DEFAULT_PERMUTATION, 0)


def test_permutation_validated():
    with pytest.raises(ValueError):
        trails.validate_permutation([0, 0, 1, 2])
    with pytest.raises(ValueError):
        trails.validate_permutation(list(range(10)))  # not nibble aligned


def test_nibble_reach_default_perm():
    reach = trails.nibble_reach(suc.DEFAULT_PERMUTATION)
    assert len(reach) == 16
    for masks in reach:
        # four distinct destination nibbles -> all 15 nonempty subsets
        assert len(masks) == 15
        assert all(0 < m < (1 << 16) for m in masks)


def test_ddt_compatible_outputs_nonempty():
    rng = substream(1, "ddt")
    table = rng.permutation(16).astype(np.uint8)
    compat = trails.ddt_compatible_outputs(table)
    for a in range(1, 16):
        assert compat[a], "bijective S-box maps nonzero differences to nonzero ones"


def test_sampled_concrete_trails_respect_dp_bound():
    params = suc.SucParams(rounds=10)
    device = suc.personalize(params, substream(2, "trail"), "trail-dev")
    bound = trails.min_active_sboxes(params.permutation, params.rounds)
    totals = trails.sample_trail_actives(
        device._sboxes, params.permutation, params.rounds, 200, substream(3, "sample")
    )
    assert totals.min() >= bound
