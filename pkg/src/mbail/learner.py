"""Model-based adversarial imitation learning over finite reward and model classes.

Each round the learner

1. rolls out its previous policy in the true environment (rewards unseen),
2. scores every candidate reward by the value-difference loss
   ``sum_h r(s_h, a_h) - mean_n sum_h r(s^n_h, a^n_h)``,
3. updates exponential weights (entropic FTRL) on the cumulative losses,
4. keeps the kernels whose log-likelihood on all data is within ``beta`` of the best,
5. plans optimistically over that version space for the selected reward.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .mdp import (
    Dataset,
    Policy,
    TabularMdp,
    Trajectory,
    ValidationError,
    backward_induction,
    exact_policy_value,
    greedy_actions,
    sample_trajectory,
    satisfies_bounded_reward,
)

MAX_MODELS = 10_000


class DegenerateDataError(ValueError):
    """Every candidate model assigns zero probability to the observed data."""


@dataclass(eq=False)
class RewardClass:
    tables: np.ndarray
    names: list[str] | None = None

    def __post_init__(self):
        self.tables = np.asarray(self.tables, dtype=float)
        if self.tables.ndim != 3 or len(self.tables) < 1:
            raise ValidationError("reward class needs a non-empty (R, S, A) stack")
        if self.names is None:
            self.names = [f"r{i}" for i in range(len(self.tables))]

    def __len__(self):
        return len(self.tables)

    def __getitem__(self, i) -> np.ndarray:
        return self.tables[i]

    def validate(self, mdp: TabularMdp) -> None:
        for name, table in zip(self.names, self.tables):
            if not satisfies_bounded_reward(mdp, table):
                raise ValidationError(f"reward {name} can collect a return outside [0, 1]")


@dataclass(eq=False)
class ModelClass:
    kernels: np.ndarray
    names: list[str] | None = None
    true_index: int | None = None

    def __post_init__(self):
        self.kernels = np.asarray(self.kernels, dtype=float)
        if self.kernels.ndim != 4 or len(self.kernels) < 1:
            raise ValidationError("model class needs a non-empty (M, S, A, S) stack")
        if len(self.kernels) > MAX_MODELS:
            raise ValidationError(f"model class larger than the enumeration cap {MAX_MODELS}")
        if np.any(self.kernels < 0) or np.any(np.abs(self.kernels.sum(-1) - 1) > 1e-12):
            raise ValidationError("every candidate kernel must be row-stochastic")
        if self.names is None:
            self.names = [f"P{i}" for i in range(len(self.kernels))]

    def __len__(self):
        return len(self.kernels)

    @property
    def realizable(self) -> bool:
        return self.true_index is not None


# ---------------------------------------------------------------------------
# Reward learning
# ---------------------------------------------------------------------------

def empirical_value(reward: np.ndarray, data: Dataset) -> float | np.ndarray:
    """Mean per-trajectory reward sum; vectorised over a reward stack."""
    if len(data) == 0:
        raise ValidationError("empirical value of an empty dataset is undefined")
    sa = data.state_actions()
    reward = np.asarray(reward)
    total = reward[..., sa[:, 0], sa[:, 1]].sum(axis=-1) / len(data)
    return float(total) if np.ndim(total) == 0 else total


def value_difference_loss(reward: np.ndarray, behavior_traj: Trajectory, expert_data: Dataset):
    """Behaviour return minus empirical expert return (vectorised over a reward stack)."""
    if len(expert_data) == 0:
        raise ValidationError("expert dataset is empty")
    reward = np.asarray(reward)
    behaviour = reward[..., behavior_traj.states, behavior_traj.actions].sum(axis=-1)
    loss = behaviour - empirical_value(reward, expert_data)
    return float(loss) if np.ndim(loss) == 0 else loss


@dataclass
class HedgeState:
    cumulative_losses: np.ndarray
    eta: float
    round: int = 0

    @classmethod
    def start(cls, num_experts: int, eta: float) -> "HedgeState":
        if eta <= 0:
            raise ValidationError("learning rate must be positive")
        return cls(np.zeros(num_experts), float(eta), 0)

    @property
    def weights(self) -> np.ndarray:
        logits = -self.eta * self.cumulative_losses
        return np.exp(logits - logsumexp(logits))


def default_eta(num_rewards: int, num_rounds: int) -> float:
    """``sqrt(8 ln|R| / K)``; a single reward gets an arbitrary positive rate."""
    if num_rewards <= 1:
        return 1.0
    return math.sqrt(8.0 * math.log(num_rewards) / num_rounds)


def hedge_step(state: HedgeState, loss_vector) -> tuple[HedgeState, np.ndarray]:
    loss_vector = np.asarray(loss_vector, dtype=float)
    if loss_vector.shape != state.cumulative_losses.shape:
        raise ValidationError("loss vector does not match the number of experts")
    if np.any(np.abs(loss_vector) > 1.0 + 1e-12):
        raise ValidationError("losses must lie in [-1, 1]")
    new = HedgeState(state.cumulative_losses + loss_vector, state.eta, state.round + 1)
    return new, new.weights


def select_reward(weights, reward_class: RewardClass, mode: str = "mixture", rng=None) -> tuple[np.ndarray, int | None]:
    """Mixture table (default) or a member sampled from ``weights``.

    Returns ``(table, index)``; ``index`` is ``None`` in mixture mode.
    """
    weights = np.asarray(weights, dtype=float)
    if mode == "mixture":
        return np.tensordot(weights, reward_class.tables, axes=1), None
    if mode == "sample":
        if rng is None:
            raise ValueError("sample mode needs a random generator")
        i = int(rng.choice(len(weights), p=weights / weights.sum()))
        return reward_class.tables[i], i
    raise ValueError(f"unknown reward selection mode {mode!r}")


# ---------------------------------------------------------------------------
# Model learning and planning
# ---------------------------------------------------------------------------

@dataclass
class VersionSpace:
    member_indices: np.ndarray
    beta: float
    log_likelihoods: np.ndarray

    def __len__(self):
        return len(self.member_indices)

    def __contains__(self, index) -> bool:
        return index is not None and bool(np.any(self.member_indices == index))


def transition_counts(transitions, num_states: int, num_actions: int) -> np.ndarray:
    counts = np.zeros((num_states, num_actions, num_states))
    tr = np.asarray(transitions, dtype=int).reshape(-1, 3)
    np.add.at(counts, (tr[:, 0], tr[:, 1], tr[:, 2]), 1.0)
    return counts


def log_likelihoods(model_class: ModelClass, counts: np.ndarray) -> np.ndarray:
    """Summed ``log P(s' | s, a)`` per member; ``-inf`` if an observed transition is impossible."""
    seen = counts > 0
    probs = model_class.kernels[:, seen]
    with np.errstate(divide="ignore"):
        logs = np.log(probs)
    return (logs * counts[seen]).sum(axis=1)


def mle_version_space(model_class: ModelClass, transitions, beta: float, counts: np.ndarray | None = None) -> VersionSpace:
    if beta < 0:
        raise ValidationError("confidence radius must be non-negative")
    if counts is None:
        S, A = model_class.kernels.shape[1:3]
        counts = transition_counts(transitions, S, A)
    ll = log_likelihoods(model_class, counts)
    best = ll.max()
    if not np.isfinite(best):
        raise DegenerateDataError("no candidate kernel explains the observed transitions")
    keep = np.flatnonzero(ll >= best - beta)
    return VersionSpace(keep, float(beta), ll)


def optimistic_plan(
    version_space: VersionSpace, model_class: ModelClass, reward: np.ndarray, skeleton: TabularMdp
) -> tuple[Policy, int, float]:
    """Best (policy, kernel) pair over the version space; ties go to the lowest index."""
    if len(version_space) == 0:
        raise ValidationError("version space is empty")
    reward = np.asarray(reward, dtype=float)
    best = None
    for i in version_space.member_indices:
        Q, V = backward_induction(model_class.kernels[i], reward, skeleton.horizon)
        value = float(V[0] @ skeleton.initial_dist)
        if best is None or value > best[2] + 1e-12:
            best = (Q, int(i), value)
    Q, index, value = best
    return Policy.deterministic(greedy_actions(Q), skeleton.num_actions), index, value


def default_beta(num_rounds: int, num_models: int, delta: float = 0.1) -> float:
    """``4 log(K |P| / delta)``."""
    return 4.0 * math.log(num_rounds * num_models / delta)


# ---------------------------------------------------------------------------
# Full loop
# ---------------------------------------------------------------------------

def evaluate_ail_gap(mdp: TabularMdp, expert_policy: Policy, policy: Policy, reward_class: RewardClass) -> float:
    """``max_r V^expert_r - V^policy_r`` over the class (may be negative)."""
    gaps = exact_policy_value(mdp, expert_policy, reward_class.tables) - exact_policy_value(
        mdp, policy, reward_class.tables
    )
    return float(np.max(gaps))


@dataclass
class RoundRecord:
    k: int
    weights: np.ndarray
    reward_index: int | None
    vs_size: int
    truth_in_vs: bool | None
    model_index: int
    opt_value: float
    loss: np.ndarray
    realized_return: np.ndarray
    gaps: np.ndarray | None


@dataclass
class RunLog:
    reward_mode: str
    beta: float
    eta: float
    records: list[RoundRecord] = field(default_factory=list)
    policies: list[Policy] = field(default_factory=list)
    reward_names: list[str] | None = None

    @property
    def num_rounds(self) -> int:
        return len(self.records)

    def gap_matrix(self) -> np.ndarray:
        """Per-round exact gaps, shape ``(K, |R|)``."""
        if not self.records or self.records[0].gaps is None:
            raise ValueError("run was made without an expert policy; no gaps logged")
        return np.stack([r.gaps for r in self.records])

    def regret_curve(self) -> np.ndarray:
        """``Regret(k) = max_r sum_{i<=k} gap_i(r)`` for ``k = 1..K``."""
        return np.cumsum(self.gap_matrix(), axis=0).max(axis=1)

    def mixture_gap_curve(self) -> np.ndarray:
        """AIL gap of the uniform mixture of the first ``k`` policies, ``Regret(k) / k``."""
        return self.regret_curve() / np.arange(1, self.num_rounds + 1)

    def regret(self) -> float:
        return float(self.regret_curve()[-1])

    def loss_matrix(self) -> np.ndarray:
        return np.stack([r.loss for r in self.records])

    def learner_losses(self) -> np.ndarray:
        """Loss of the reward actually used with each collected trajectory.

        The trajectory of round ``k`` comes from the policy planned after round
        ``k - 1``, i.e. for weights ``w_{k-1}``; round 1 uses the zero reward.
        """
        L = self.loss_matrix()
        W = np.stack([r.weights for r in self.records])
        used = np.zeros(len(L))
        used[1:] = (W[:-1] * L[1:]).sum(axis=1)
        return used

    def opt_error_curve(self) -> np.ndarray:
        """Realised reward optimisation error after each round (normalised by ``k``)."""
        L = self.loss_matrix()
        k = np.arange(1, len(L) + 1)
        return (np.cumsum(self.learner_losses()) - np.cumsum(L, axis=0).min(axis=1)) / k

    def truth_containment(self) -> float | None:
        flags = [r.truth_in_vs for r in self.records]
        if any(f is None for f in flags):
            return None
        return float(np.mean(flags))

    def mixture_value(self, mdp: TabularMdp, reward: np.ndarray):
        return np.mean([exact_policy_value(mdp, pi, reward) for pi in self.policies], axis=0)


def run_mbail(
    mdp: TabularMdp,
    expert_data: Dataset,
    reward_class: RewardClass,
    model_class: ModelClass,
    num_rounds: int,
    rng: np.random.Generator,
    beta: float | None = None,
    eta: float | None = None,
    reward_mode: str = "mixture",
    expert_policy: Policy | None = None,
    keep_policies: bool = True,
) -> RunLog:
    """Run the interaction loop for ``num_rounds`` rounds.

    ``mdp`` is used only to sample transitions and, when ``expert_policy`` is
    given, to log the exact per-round gaps for every reward in the class.
    """
    if num_rounds < 1:
        raise ValidationError("need at least one round")
    if len(expert_data) == 0:
        raise ValidationError("expert dataset is empty")
    if model_class.kernels.shape[1:] != mdp.kernel.shape:
        raise ValidationError("model class skeleton does not match the environment")
    beta = default_beta(num_rounds, len(model_class)) if beta is None else float(beta)
    eta = default_eta(len(reward_class), num_rounds) if eta is None else float(eta)

    S, A = mdp.num_states, mdp.num_actions
    expert_values = empirical_value(reward_class.tables, expert_data)
    true_expert = exact_policy_value(mdp, expert_policy, reward_class.tables) if expert_policy is not None else None

    hedge = HedgeState.start(len(reward_class), eta)
    counts = np.zeros((S, A, S))
    policy = Policy.uniform(mdp.horizon, S, A)
    log = RunLog(reward_mode, beta, eta, reward_names=list(reward_class.names))

    for k in range(1, num_rounds + 1):
        traj = sample_trajectory(mdp, policy, rng)
        tr = traj.transitions()
        np.add.at(counts, (tr[:, 0], tr[:, 1], tr[:, 2]), 1.0)

        realized = reward_class.tables[:, traj.states, traj.actions].sum(axis=-1)
        loss = realized - expert_values
        hedge, weights = hedge_step(hedge, np.clip(loss, -1.0, 1.0))
        reward, reward_index = select_reward(weights, reward_class, reward_mode, rng)

        vs = mle_version_space(model_class, None, beta, counts=counts)
        policy, model_index, value = optimistic_plan(vs, model_class, reward, mdp)

        gaps = None
        if true_expert is not None:
            gaps = true_expert - exact_policy_value(mdp, policy, reward_class.tables)
        truth = (model_class.true_index in vs) if model_class.realizable else None
        log.records.append(
            RoundRecord(k, weights, reward_index, len(vs), truth, model_index, value, loss, realized, gaps)
        )
        if keep_policies:
            log.policies.append(policy)
    return log
