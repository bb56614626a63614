"""Finite-horizon tabular MDPs: validation, simulation and exact dynamic programming.

Conventions
-----------
* ``kernel[s, a, s']`` is the transition probability, shape ``(S, A, S)``.
* A reward is a plain ``(S, A)`` array; a stack of rewards is ``(R, S, A)``.
* ``Policy.stage_tables[h, s, a]`` is the action distribution at stage ``h``
  (0-based, ``h = 0 .. H-1``).
* Values are averaged over ``initial_dist``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

PROB_ATOL = 1e-12


class ValidationError(ValueError):
    """Raised when an input violates a stochasticity or shape contract."""


def _check_simplex(arr: np.ndarray, what: str, atol: float = PROB_ATOL) -> None:
    if np.any(arr < -atol) or not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what} has negative or non-finite entries")
    sums = arr.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > atol):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise ValidationError(f"{what} rows must sum to 1 (max deviation {worst:.3g})")


@dataclass(eq=False)
class TabularMdp:
    kernel: np.ndarray
    initial_dist: np.ndarray
    horizon: int

    def __post_init__(self):
        self.kernel = np.asarray(self.kernel, dtype=float)
        self.initial_dist = np.asarray(self.initial_dist, dtype=float)
        if self.kernel.ndim != 3 or self.kernel.shape[0] != self.kernel.shape[2]:
            raise ValidationError(f"kernel must have shape (S, A, S), got {self.kernel.shape}")
        if self.initial_dist.shape != (self.kernel.shape[0],):
            raise ValidationError("initial_dist does not match the number of states")
        if int(self.horizon) < 1:
            raise ValidationError("horizon must be a positive integer")
        self.horizon = int(self.horizon)
        _check_simplex(self.kernel, "kernel")
        _check_simplex(self.initial_dist, "initial_dist")

    @property
    def num_states(self) -> int:
        return self.kernel.shape[0]

    @property
    def num_actions(self) -> int:
        return self.kernel.shape[1]

    @cached_property
    def _kernel_cdf(self) -> np.ndarray:
        cdf = np.cumsum(self.kernel, axis=-1)
        cdf[..., -1] = 1.0
        return cdf

    @cached_property
    def _init_cdf(self) -> np.ndarray:
        cdf = np.cumsum(self.initial_dist)
        cdf[-1] = 1.0
        return cdf

    def with_kernel(self, kernel: np.ndarray) -> "TabularMdp":
        return TabularMdp(kernel, self.initial_dist, self.horizon)


@dataclass(eq=False)
class Policy:
    stage_tables: np.ndarray

    def __post_init__(self):
        self.stage_tables = np.asarray(self.stage_tables, dtype=float)
        if self.stage_tables.ndim != 3:
            raise ValidationError("stage_tables must have shape (H, S, A)")
        _check_simplex(self.stage_tables, "policy")

    @property
    def horizon(self) -> int:
        return self.stage_tables.shape[0]

    @classmethod
    def uniform(cls, horizon: int, num_states: int, num_actions: int) -> "Policy":
        return cls(np.full((horizon, num_states, num_actions), 1.0 / num_actions))

    @classmethod
    def deterministic(cls, actions: np.ndarray, num_actions: int) -> "Policy":
        """Build a policy from an ``(H, S)`` integer array of chosen actions."""
        actions = np.asarray(actions, dtype=int)
        return cls(np.eye(num_actions)[actions])

    @classmethod
    def stationary(cls, table: np.ndarray, horizon: int) -> "Policy":
        table = np.asarray(table, dtype=float)
        return cls(np.broadcast_to(table, (horizon,) + table.shape).copy())

    def is_deterministic(self) -> bool:
        return bool(np.all((self.stage_tables == 0.0) | (self.stage_tables == 1.0)))

    def greedy_actions(self) -> np.ndarray:
        return self.stage_tables.argmax(axis=-1)


@dataclass(eq=False)
class Trajectory:
    states: np.ndarray
    actions: np.ndarray
    terminal_state: int

    def __len__(self):
        return len(self.states)

    @property
    def steps(self) -> list[tuple[int, int]]:
        return list(zip(self.states.tolist(), self.actions.tolist()))

    def transitions(self) -> np.ndarray:
        """All ``H`` observed ``(s, a, s')`` triples, shape ``(H, 3)``."""
        nxt = np.append(self.states[1:], self.terminal_state)
        return np.stack([self.states, self.actions, nxt], axis=1)

    def reward_sum(self, reward: np.ndarray) -> float:
        return float(reward[self.states, self.actions].sum())


@dataclass(eq=False)
class Dataset:
    trajectories: list[Trajectory] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.trajectories)

    def __len__(self):
        return len(self.trajectories)

    def append(self, traj: Trajectory) -> None:
        self.trajectories.append(traj)

    def transitions(self) -> np.ndarray:
        if not self.trajectories:
            return np.zeros((0, 3), dtype=int)
        return np.concatenate([t.transitions() for t in self.trajectories])

    def state_actions(self) -> np.ndarray:
        if not self.trajectories:
            return np.zeros((0, 2), dtype=int)
        return np.concatenate([np.stack([t.states, t.actions], axis=1) for t in self.trajectories])


def _check_compatible(mdp: TabularMdp, policy: Policy | None = None, reward: np.ndarray | None = None):
    S, A = mdp.num_states, mdp.num_actions
    if policy is not None and policy.stage_tables.shape != (mdp.horizon, S, A):
        raise ValidationError(
            f"policy shape {policy.stage_tables.shape} does not match (H, S, A) = {(mdp.horizon, S, A)}"
        )
    if reward is not None and np.shape(reward)[-2:] != (S, A):
        raise ValidationError(f"reward shape {np.shape(reward)} does not match (S, A) = {(S, A)}")


# ---------------------------------------------------------------------------
# Dynamic programming
# ---------------------------------------------------------------------------

def policy_q_values(mdp: TabularMdp, policy: Policy, reward: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Backward Bellman recursion under ``policy``.

    ``reward`` may be a single ``(S, A)`` table or a stack ``(R, S, A)``.
    Returns ``(Q, V)`` with shapes ``(H, [R,] S, A)`` and ``(H + 1, [R,] S)``;
    ``V[H]`` is identically zero.
    """
    _check_compatible(mdp, policy, reward)
    reward = np.asarray(reward, dtype=float)
    H = mdp.horizon
    batch = reward.shape[:-2]
    Q = np.zeros((H,) + reward.shape)
    V = np.zeros((H + 1,) + batch + (mdp.num_states,))
    for h in range(H - 1, -1, -1):
        Q[h] = reward + np.einsum("sat,...t->...sa", mdp.kernel, V[h + 1])
        V[h] = np.einsum("sa,...sa->...s", policy.stage_tables[h], Q[h])
    return Q, V


def exact_policy_value(mdp: TabularMdp, policy: Policy, reward: np.ndarray) -> float | np.ndarray:
    """Expected cumulative reward of ``policy``, averaged over the initial distribution.

    Returns a float for a single reward table, an ``(R,)`` array for a stack.
    """
    _, V = policy_q_values(mdp, policy, reward)
    value = V[0] @ mdp.initial_dist
    return float(value) if np.ndim(value) == 0 else value


def exact_return_variance(mdp: TabularMdp, policy: Policy, reward: np.ndarray) -> float:
    """Variance of the episode return (the initial state is random too).

    Law of total variance, stage by stage:
    ``W_h(s) = E_{a, s'}[(r(s,a) + V_{h+1}(s') - V_h(s))^2 + W_{h+1}(s')]``.
    Every term is a squared deviation, so deterministic dynamics and policy
    give exactly 0.
    """
    _check_compatible(mdp, policy, reward)
    reward = np.asarray(reward, dtype=float)
    P = mdp.kernel
    V = np.zeros(mdp.num_states)
    W = np.zeros(mdp.num_states)
    for h in range(mdp.horizon - 1, -1, -1):
        pi = policy.stage_tables[h]
        target = reward[:, :, None] + V[None, None, :]
        V_h = np.einsum("sa,sat,sat->s", pi, P, target)
        dev = (target - V_h[:, None, None]) ** 2 + W[None, None, :]
        W = np.einsum("sa,sat,sat->s", pi, P, dev)
        V = V_h
    mean = V @ mdp.initial_dist
    return float(mdp.initial_dist @ ((V - mean) ** 2 + W))


def backward_induction(kernel: np.ndarray, reward: np.ndarray, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Finite-horizon value iteration on a raw kernel (no validation)."""
    Q = np.zeros((horizon,) + reward.shape)
    V = np.zeros((horizon + 1, kernel.shape[0]))
    for h in range(horizon - 1, -1, -1):
        Q[h] = reward + kernel @ V[h + 1]
        V[h] = Q[h].max(axis=1)
    return Q, V


def optimal_q_values(mdp: TabularMdp, reward: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Returns ``(Q*, V*)`` of shapes ``(H, S, A)`` and ``(H+1, S)``."""
    _check_compatible(mdp, reward=reward)
    return backward_induction(mdp.kernel, np.asarray(reward, dtype=float), mdp.horizon)


def greedy_actions(Q: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Row-wise argmax with ties (up to ``tol``) broken towards the lowest action index."""
    return np.argmax(Q >= Q.max(axis=-1, keepdims=True) - tol, axis=-1)


def optimal_policy(mdp: TabularMdp, reward: np.ndarray) -> tuple[Policy, float]:
    """Greedy optimal policy and its value; ties go to the lowest action index."""
    Q, V = optimal_q_values(mdp, reward)
    return Policy.deterministic(greedy_actions(Q), mdp.num_actions), float(V[0] @ mdp.initial_dist)


def reachable_states(mdp: TabularMdp) -> np.ndarray:
    """Boolean mask ``(H, S)``: states with positive probability at each stage under some policy."""
    reach = np.zeros((mdp.horizon, mdp.num_states), dtype=bool)
    reach[0] = mdp.initial_dist > 0
    support = mdp.kernel > 0
    for h in range(1, mdp.horizon):
        reach[h] = support[reach[h - 1]].any(axis=(0, 1))
    return reach


def cumulative_reward_range(mdp: TabularMdp, reward: np.ndarray) -> tuple[float, float]:
    """Min and max cumulative reward over all realisable trajectories."""
    _check_compatible(mdp, reward=reward)
    reward = np.asarray(reward, dtype=float)
    reach = reachable_states(mdp)
    support = mdp.kernel > 0
    hi = np.zeros(mdp.num_states)
    lo = np.zeros(mdp.num_states)
    for h in range(mdp.horizon - 1, -1, -1):
        nxt_hi = np.where(support, hi[None, None, :], -np.inf).max(axis=2)
        nxt_lo = np.where(support, lo[None, None, :], np.inf).min(axis=2)
        hi = (reward + nxt_hi).max(axis=1)
        lo = (reward + nxt_lo).min(axis=1)
        hi = np.where(reach[h], hi, -np.inf)
        lo = np.where(reach[h], lo, np.inf)
    start = mdp.initial_dist > 0
    return float(lo[start].min()), float(hi[start].max())


def satisfies_bounded_reward(mdp: TabularMdp, reward: np.ndarray, atol: float = 1e-9) -> bool:
    """Every realisable trajectory collects cumulative reward in ``[0, 1]``."""
    lo, hi = cumulative_reward_range(mdp, reward)
    return lo >= -atol and hi <= 1.0 + atol


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def _draw(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling, one row of ``cdf`` per uniform in ``u``."""
    return (u[:, None] >= cdf).sum(axis=-1)


def sample_batch(
    mdp: TabularMdp, policy: Policy, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Roll out ``n`` independent episodes at once.

    Returns ``states`` and ``actions`` of shape ``(n, H)`` and final states ``(n,)``.
    """
    _check_compatible(mdp, policy)
    H = mdp.horizon
    pol_cdf = np.cumsum(policy.stage_tables, axis=-1)
    pol_cdf[..., -1] = 1.0
    states = np.empty((n, H), dtype=int)
    actions = np.empty((n, H), dtype=int)
    s = _draw(np.broadcast_to(mdp._init_cdf, (n, mdp.num_states)), rng.random(n))
    for h in range(H):
        a = _draw(pol_cdf[h, s], rng.random(n))
        states[:, h] = s
        actions[:, h] = a
        s = _draw(mdp._kernel_cdf[s, a], rng.random(n))
    return states, actions, s


def sample_trajectory(mdp: TabularMdp, policy: Policy, rng: np.random.Generator) -> Trajectory:
    states, actions, final = sample_batch(mdp, policy, 1, rng)
    return Trajectory(states[0], actions[0], int(final[0]))


def sample_dataset(mdp: TabularMdp, policy: Policy, n: int, rng: np.random.Generator) -> Dataset:
    states, actions, final = sample_batch(mdp, policy, n, rng)
    return Dataset([Trajectory(states[i], actions[i], int(final[i])) for i in range(n)])


def sample_returns(
    mdp: TabularMdp, policy: Policy, reward: np.ndarray, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Monte-Carlo episode returns, shape ``(n,)``."""
    states, actions, _ = sample_batch(mdp, policy, n, rng)
    return np.asarray(reward)[states, actions].sum(axis=1)


def check_trajectory(mdp: TabularMdp, traj: Trajectory) -> None:
    """Debug check: length ``H`` and every step has positive kernel probability."""
    if len(traj) != mdp.horizon:
        raise ValidationError(f"trajectory length {len(traj)} != horizon {mdp.horizon}")
    if mdp.initial_dist[traj.states[0]] <= 0:
        raise ValidationError("trajectory starts outside the initial support")
    for s, a, s2 in traj.transitions():
        if mdp.kernel[s, a, s2] <= 0:
            raise ValidationError(f"impossible transition ({s}, {a}) -> {s2}")
