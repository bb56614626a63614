"""Comparison agents: tabular behavioural cloning and a reward-table Q-learner."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .mdp import Dataset, Policy, TabularMdp, ValidationError, exact_policy_value, sample_returns


def bc_policy(expert_data: Dataset, num_states: int, num_actions: int, horizon: int) -> Policy:
    """Majority expert action at visited states (lowest index on ties), uniform elsewhere."""
    if len(expert_data) == 0:
        raise ValidationError("expert dataset is empty")
    counts = np.zeros((num_states, num_actions))
    sa = expert_data.state_actions()
    np.add.at(counts, (sa[:, 0], sa[:, 1]), 1.0)
    table = np.full((num_states, num_actions), 1.0 / num_actions)
    visited = counts.sum(axis=1) > 0
    table[visited] = np.eye(num_actions)[counts[visited].argmax(axis=1)]
    return Policy.stationary(table, horizon)


@dataclass
class QParams:
    alpha: float = 0.1
    eps_start: float = 0.2
    eps_end: float = 0.01
    episodes: int = 5000
    discount: float = 0.9
    stage_indexed: bool = False

    def __post_init__(self):
        if not 0 < self.discount <= 1:
            raise ValidationError("discount must lie in (0, 1]")
        if not 0 < self.alpha <= 1:
            raise ValidationError("alpha must lie in (0, 1]")
        if not (0 <= self.eps_end <= 1 and 0 <= self.eps_start <= 1):
            raise ValidationError("exploration rates must lie in [0, 1]")
        if self.episodes < 1:
            raise ValidationError("need at least one training episode")

    def epsilon(self, episode: int) -> float:
        frac = episode / max(self.episodes - 1, 1)
        return self.eps_start + (self.eps_end - self.eps_start) * frac

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class QLearnerState:
    """Q-table ``(L + 1, S, A)`` and a 0/1 reward table.

    ``L = H`` for a stage-indexed table, ``L = 1`` for a single stationary
    table; the extra slice stays at 0 and serves as the terminal bootstrap.
    """

    q_table: np.ndarray
    reward_table: np.ndarray
    epsilon: float
    alpha: float
    discount: float = 1.0

    @classmethod
    def zeros(cls, horizon: int, num_states: int, num_actions: int, params: QParams) -> "QLearnerState":
        stages = horizon if params.stage_indexed else 1
        return cls(
            np.zeros((stages + 1, num_states, num_actions)),
            np.zeros((num_states, num_actions)),
            params.eps_start,
            params.alpha,
            params.discount,
        )

    def greedy_policy(self, horizon: int) -> Policy:
        Q = self.q_table[:-1]
        actions = Q.argmax(axis=-1)
        if len(actions) != horizon:
            actions = np.repeat(actions, horizon, axis=0)
        return Policy.deterministic(actions, Q.shape[-1])


def assign_block_reward(reward_table: np.ndarray, block_labels: np.ndarray, s: int, a: int) -> None:
    """Set ``r(s', a) = 1`` for every ``s'`` in the block of ``s`` (in place; entries only rise)."""
    reward_table[block_labels == block_labels[s], a] = 1.0


def run_online_il(
    mdp: TabularMdp,
    expert_data: Dataset,
    block_labels: np.ndarray,
    rng: np.random.Generator,
    params: QParams | None = None,
    true_reward: np.ndarray | None = None,
    eval_every: int = 100,
    return_state: bool = False,
):
    """Epsilon-greedy Q-learning on a self-assigned reward table.

    Visiting an expert ``(s, a)`` pair sets ``r(s', a) = 1`` for every ``s'``
    sharing a block with ``s`` (``block_labels`` maps states to blocks; all
    distinct labels means exact pairs only). The environment reward is never
    used for learning; ``true_reward`` only feeds the learning curve, which
    holds ``(episode, H * exact value of the greedy policy)`` pairs.
    Returns ``(policy, curve)``, plus the final ``QLearnerState`` when
    ``return_state`` is set.
    """
    params = params or QParams()
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    block_labels = np.asarray(block_labels)
    if block_labels.shape != (S,):
        raise ValidationError("need one block label per state")
    expert_pairs = np.zeros((S, A), dtype=bool)
    sa = expert_data.state_actions()
    expert_pairs[sa[:, 0], sa[:, 1]] = True

    state = QLearnerState.zeros(H, S, A, params)
    Q, R = state.q_table, state.reward_table
    last = len(Q) - 1
    cdf = mdp._kernel_cdf
    init_cdf = mdp._init_cdf
    curve = []
    for ep in range(params.episodes):
        state.epsilon = eps = params.epsilon(ep)
        u = rng.random((H + 1, 3))
        s = int(np.searchsorted(init_cdf, u[H, 0], side="right"))
        for h in range(H):
            i = h if params.stage_indexed else 0
            nxt = h + 1 if params.stage_indexed else (last if h == H - 1 else 0)
            if u[h, 0] < eps:
                a = min(int(u[h, 1] * A), A - 1)
            else:
                a = int(np.argmax(Q[i, s]))
            if expert_pairs[s, a] and R[s, a] < 1.0:
                assign_block_reward(R, block_labels, s, a)
            s2 = min(int(np.searchsorted(cdf[s, a], u[h, 2], side="right")), S - 1)
            target = R[s, a] + params.discount * Q[nxt, s2].max()
            Q[i, s, a] += params.alpha * (target - Q[i, s, a])
            s = s2
        if true_reward is not None and ((ep + 1) % eval_every == 0 or ep + 1 == params.episodes):
            curve.append((ep + 1, H * exact_policy_value(mdp, state.greedy_policy(H), true_reward)))
    if return_state:
        return state.greedy_policy(H), curve, state
    return state.greedy_policy(H), curve


def evaluate_agent(
    mdp: TabularMdp, policy: Policy, true_reward: np.ndarray, episodes: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Mean and standard deviation of Monte-Carlo returns, multiplied by ``H``."""
    returns = mdp.horizon * sample_returns(mdp, policy, true_reward, episodes, rng)
    return float(returns.mean()), float(returns.std())
