import numpy as np
import pytest

from mbail.gridworld import (
    DOWN,
    LEFT,
    RIGHT,
    UP,
    GridWorldSpec,
    axis_blocks,
    block_partition,
    block_reward_class,
    build_gridworld,
    gridworld_kernel,
    gridworld_model_class,
)
from mbail.mdp import ValidationError, satisfies_bounded_reward


def test_deterministic_up():
    spec = GridWorldSpec(p=1.0)
    kernel = gridworld_kernel(9, 1.0)
    s = spec.index(4, 4)
    assert kernel[s, UP, spec.index(4, 5)] == 1.0


def test_stochastic_split():
    spec = GridWorldSpec(p=0.65)
    kernel = gridworld_kernel(9, 0.65)
    s = spec.index(4, 4)
    row = kernel[s, UP]
    assert row[spec.index(4, 5)] == pytest.approx(0.65)
    for x, y in ((4, 3), (3, 4), (5, 4)):
        assert row[spec.index(x, y)] == pytest.approx(0.35 / 3)


def test_corner_moves_stay():
    kernel = gridworld_kernel(9, 1.0)
    assert kernel[0, DOWN, 0] == 1.0 and kernel[0, LEFT, 0] == 1.0
    assert kernel[80, UP, 80] == 1.0 and kernel[80, RIGHT, 80] == 1.0


def test_rows_stochastic():
    for p in (0.25, 0.45, 1.0):
        np.testing.assert_allclose(gridworld_kernel(9, p).sum(-1), 1.0, atol=1e-12)


def test_invalid_p():
    with pytest.raises(ValidationError):
        GridWorldSpec(p=1.2)


def test_reward_bounded():
    mdp, reward = build_gridworld(GridWorldSpec())
    assert satisfies_bounded_reward(mdp, reward)
    assert mdp.initial_dist[[0, 1, 9, 10]].sum() == pytest.approx(1.0)


def test_block_class_sizes():
    assert len(block_reward_class(1)) == 2
    assert len(block_reward_class(3)) == 10
    assert block_reward_class(1).names[-1] == "zero"


def test_axis_blocks_modes():
    assert np.bincount(axis_blocks(9, 4, "per_axis")).tolist() == [3, 2, 2, 2]
    assert np.bincount(axis_blocks(9, 4, "cell_size")).tolist() == [4, 4, 1]
    assert len(np.unique(block_partition(9, 1, "cell_size"))) == 81


def test_block_class_bounded():
    mdp, _ = build_gridworld(GridWorldSpec())
    rc = block_reward_class(4)
    rc.validate(mdp)


def test_model_class():
    mc = gridworld_model_class(9, (0.45, 0.65, 1.0), true_p=0.65)
    assert mc.true_index == 1 and len(mc) == 3


def test_spec_roundtrip():
    spec = GridWorldSpec.from_dict({"p": 0.55, "goal_size": 4})
    assert GridWorldSpec.from_dict(spec.to_dict()) == spec
