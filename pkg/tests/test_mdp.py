import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mbail.experiments import random_mdp
from mbail.gridworld import GridWorldSpec, build_gridworld
from mbail.mdp import (
    Dataset,
    Policy,
    TabularMdp,
    ValidationError,
    check_trajectory,
    cumulative_reward_range,
    exact_policy_value,
    exact_return_variance,
    optimal_policy,
    reachable_states,
    sample_batch,
    sample_returns,
    sample_trajectory,
    satisfies_bounded_reward,
)


def chain(length=2, horizon=4):
    kernel = np.zeros((length, 1, length))
    for s in range(length):
        kernel[s, 0, (s + 1) % length] = 1.0
    init = np.eye(length)[0]
    return TabularMdp(kernel, init, horizon)


class TestValidation:
    def test_bad_row(self):
        kernel = np.full((2, 1, 2), 0.5)
        kernel[1, 0] = (0.5, 0.4)
        with pytest.raises(ValidationError):
            TabularMdp(kernel, np.array([1.0, 0.0]), 2)

    def test_negative_entry(self):
        kernel = np.array([[[1.5, -0.5]], [[0.0, 1.0]]])
        with pytest.raises(ValidationError):
            TabularMdp(kernel, np.array([1.0, 0.0]), 2)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            TabularMdp(np.ones((2, 1, 3)) / 3, np.array([1.0, 0.0]), 2)
        mdp = chain()
        with pytest.raises(ValueError):
            exact_policy_value(mdp, Policy.uniform(4, 2, 1), np.zeros((3, 1)))

    def test_policy_rows(self):
        with pytest.raises(ValidationError):
            Policy(np.full((2, 2, 2), 0.6))


class TestPolicyValue:
    def test_chain_full_reward(self):
        mdp = chain(2, 4)
        assert exact_policy_value(mdp, Policy.uniform(4, 2, 1), np.full((2, 1), 0.25)) == pytest.approx(1.0, abs=1e-12)

    def test_zero_reward(self):
        mdp, policy, reward = random_mdp(np.random.default_rng(0))
        assert exact_policy_value(mdp, policy, np.zeros_like(reward)) == 0.0

    def test_reward_stack_matches_single(self):
        mdp, policy, reward = random_mdp(np.random.default_rng(1))
        stack = np.stack([reward, 2 * reward, np.zeros_like(reward)])
        vals = exact_policy_value(mdp, policy, stack)
        assert vals == pytest.approx([exact_policy_value(mdp, policy, reward), 2 * exact_policy_value(mdp, policy, reward), 0])

    def test_gridworld_random_policy_mc(self):
        mdp, reward = build_gridworld(GridWorldSpec(p=0.65))
        policy = Policy(np.random.default_rng(2).dirichlet(np.ones(4), size=(20, 81)))
        ret = sample_returns(mdp, policy, reward, 100_000, np.random.default_rng(3))
        v = exact_policy_value(mdp, policy, reward)
        assert abs(ret.mean() - v) <= 3 * ret.std() / np.sqrt(len(ret))


class TestVariance:
    def test_deterministic_is_zero(self):
        mdp = chain(3, 5)
        reward = np.random.default_rng(0).random((3, 1)) / 5
        assert exact_return_variance(mdp, Policy.uniform(5, 3, 1), reward) == 0.0

    def test_bernoulli(self):
        q, tau = 0.3, 0.8
        kernel = np.array([[[1.0, 0.0]], [[0.0, 1.0]]])
        mdp = TabularMdp(kernel, np.array([q, 1 - q]), 1)
        reward = np.array([[tau], [0.0]])
        assert exact_return_variance(mdp, Policy.uniform(1, 2, 1), reward) == pytest.approx(tau**2 * q * (1 - q), abs=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_nonnegative(self, seed):
        mdp, policy, reward = random_mdp(np.random.default_rng(seed))
        assert exact_return_variance(mdp, policy, reward) >= 0.0


class TestPlanning:
    def test_zero_reward(self):
        mdp, _, reward = random_mdp(np.random.default_rng(4))
        _, value = optimal_policy(mdp, np.zeros_like(reward))
        assert value == 0.0

    def test_exhaustive_enumeration(self):
        rng = np.random.default_rng(5)
        S, A, H = 3, 2, 3
        mdp = TabularMdp(rng.dirichlet(np.ones(S), size=(S, A)), rng.dirichlet(np.ones(S)), H)
        reward = rng.random((S, A)) / H
        best = max(
            exact_policy_value(mdp, Policy.deterministic(np.array(acts).reshape(H, S), A), reward)
            for acts in itertools.product(range(A), repeat=H * S)
        )
        policy, value = optimal_policy(mdp, reward)
        assert value == pytest.approx(best, abs=1e-12)
        assert policy.is_deterministic()
        assert exact_policy_value(mdp, policy, reward) == pytest.approx(value, abs=1e-12)

    def test_gridworld_shortest_path(self):
        spec = GridWorldSpec(p=1.0)
        mdp, reward = build_gridworld(spec)
        _, value = optimal_policy(mdp, reward)
        goal = {(x, y) for x, y in spec.goal}
        dists = [min(abs(gx - x) + abs(gy - y) for gx, gy in goal) for x, y in spec.start]
        expected = np.mean([(spec.horizon - d) / spec.horizon for d in dists])
        assert value == pytest.approx(expected, abs=1e-12)


class TestSampling:
    def test_deterministic_path(self):
        mdp = chain(3, 5)
        for seed in (0, 1):
            traj = sample_trajectory(mdp, Policy.uniform(5, 3, 1), np.random.default_rng(seed))
            assert traj.states.tolist() == [0, 1, 2, 0, 1]
            assert traj.terminal_state == 2

    def test_same_seed_identical(self):
        mdp, policy, _ = random_mdp(np.random.default_rng(6))
        a = sample_batch(mdp, policy, 50, np.random.default_rng(7))
        b = sample_batch(mdp, policy, 50, np.random.default_rng(7))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_gridworld_up_frequencies(self):
        spec = GridWorldSpec(p=0.65)
        mdp, _ = build_gridworld(spec)
        s = spec.index(4, 4)
        n = 100_000
        draws = np.searchsorted(mdp._kernel_cdf[s, 0], np.random.default_rng(8).random(n), side="right")
        targets = {spec.index(4, 5): 0.65, spec.index(4, 3): 0.35 / 3, spec.index(3, 4): 0.35 / 3, spec.index(5, 4): 0.35 / 3}
        for t, prob in targets.items():
            freq = np.mean(draws == t)
            assert abs(freq - prob) <= 3 * np.sqrt(prob * (1 - prob) / n)

    def test_trajectories_are_feasible(self):
        mdp, policy, _ = random_mdp(np.random.default_rng(9))
        data = Dataset([sample_trajectory(mdp, policy, np.random.default_rng(i)) for i in range(5)])
        for traj in data.trajectories:
            check_trajectory(mdp, traj)
        assert data.transitions().shape == (5 * mdp.horizon, 3)


class TestBoundedReward:
    def test_range_on_chain(self):
        mdp = chain(2, 4)
        reward = np.array([[0.25], [0.0]])
        assert cumulative_reward_range(mdp, reward) == pytest.approx((0.5, 0.5))
        assert satisfies_bounded_reward(mdp, reward)
        assert not satisfies_bounded_reward(mdp, reward * 3)

    def test_unreachable_states_ignored(self):
        kernel = np.zeros((3, 1, 3))
        kernel[0, 0, 0] = kernel[1, 0, 1] = kernel[2, 0, 2] = 1.0
        mdp = TabularMdp(kernel, np.array([1.0, 0.0, 0.0]), 2)
        assert reachable_states(mdp).tolist() == [[True, False, False]] * 2
        reward = np.array([[0.1], [5.0], [5.0]])
        assert satisfies_bounded_reward(mdp, reward)
