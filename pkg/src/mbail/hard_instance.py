"""The two-stage hard instance used by the imitation-learning lower bound.

States are pairs ``[s, flag]`` with ``s`` a sign vector in ``{-1, +1}^d_R`` or
the fail marker ``s_0``. Start at a uniformly random ``[s, 0]``; the first
step either locks into the absorbing ``[s, 1]`` or falls into ``[s_0, 1]``.
Reward is only collected at ``[s, 1]``; the episode lasts ``H + 1`` steps.

Enumeration: sign patterns in lexicographic order (``-1`` before ``+1``) with
``s_0`` last; all ``flag = 0`` states precede ``flag = 1`` states. Actions are
``(a_P, a_R)`` with ``a_R`` the last coordinate, also lexicographic.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .learner import RewardClass
from .mdp import Policy, TabularMdp, ValidationError, exact_policy_value

MAX_DIM = 6


class ConstructionError(RuntimeError):
    pass


def sign_vectors(d: int) -> np.ndarray:
    return np.array(list(itertools.product((-1, 1), repeat=d)), dtype=int).reshape(-1, d)


# ---------------------------------------------------------------------------
# Packing sets
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class PackingSet:
    d: int
    gamma: float
    vectors: np.ndarray

    def __len__(self):
        return len(self.vectors)

    def max_inner(self) -> float:
        if len(self.vectors) < 2:
            return -math.inf
        G = self.vectors @ self.vectors.T
        np.fill_diagonal(G, np.iinfo(G.dtype).min)
        return float(G.max())

    def is_valid(self) -> bool:
        v = self.vectors
        return (
            v.ndim == 2
            and v.shape[1] == self.d
            and bool(np.all(np.abs(v) == 1))
            and len(np.unique(v, axis=0)) == len(v)
            and self.max_inner() <= self.d * self.gamma + 1e-12
        )


def packing_target_size(d: int, gamma: float) -> int:
    return math.ceil(math.exp(d * gamma**2 / 4.0)) - 1


def build_packing_set(
    d: int,
    gamma: float = 0.5,
    rng: np.random.Generator | None = None,
    exhaustive_max: int = 16,
    retry_factor: int = 100,
    size: int | None = None,
) -> PackingSet:
    """Sign vectors with pairwise inner products at most ``d * gamma``.

    For ``d <= exhaustive_max`` a greedy pass over all ``2^d`` vectors in
    lexicographic order returns a maximal set. Above that, ``target`` random
    vectors are drawn one at a time and rejected on any violation, giving up
    after ``retry_factor * target`` draws. ``size`` overrides the target
    ``ceil(exp(d gamma^2 / 4)) - 1``.
    """
    if d < 1 or not 0.0 < gamma < 1.0:
        raise ValidationError("need d >= 1 and gamma in (0, 1)")
    bound = d * gamma
    if d <= exhaustive_max:
        chosen = np.zeros((0, d), dtype=int)
        for v in sign_vectors(d):
            if len(chosen) == 0 or (chosen @ v).max() <= bound:
                chosen = np.vstack([chosen, v])
        return PackingSet(d, gamma, chosen)

    rng = rng if rng is not None else np.random.default_rng(0)
    target = max(packing_target_size(d, gamma) if size is None else size, 1)
    chosen = np.zeros((0, d), dtype=int)
    draws = 0
    while len(chosen) < target:
        if draws >= retry_factor * target:
            raise ConstructionError(
                f"packing construction gave up after {draws} draws with {len(chosen)}/{target} vectors"
            )
        draws += 1
        v = rng.choice((-1, 1), size=d)
        if len(chosen) == 0 or (chosen @ v).max() <= bound and not np.any(np.all(chosen == v, axis=1)):
            chosen = np.vstack([chosen, v])
    return PackingSet(d, gamma, chosen)


# ---------------------------------------------------------------------------
# Instance
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class HardInstanceParams:
    d_R: int
    d_P: int
    eps_P: float
    eps_pi: float
    tau: float
    theta_star: np.ndarray
    mu_star: np.ndarray
    packing: np.ndarray
    horizon: int = 5
    max_dim: int = MAX_DIM

    def __post_init__(self):
        self.theta_star = np.asarray(self.theta_star, dtype=int)
        self.mu_star = np.asarray(self.mu_star, dtype=int)
        self.packing = np.asarray(self.packing, dtype=int).reshape(-1, self.d_R)
        if self.d_R < 1 or self.d_P < 1:
            raise ValidationError("dimensions must be positive")
        if self.d_R > self.max_dim or self.d_P > self.max_dim:
            raise ValidationError(f"dimensions exceed the cap of {self.max_dim}")
        if not 0.0 <= self.eps_pi <= 1.0 / (4 * self.d_R) + 1e-15:
            raise ValidationError("eps_pi must lie in [0, 1/(4 d_R)]")
        if not 0.0 <= self.eps_P <= 1.0 / (4 * self.d_P) + 1e-15:
            raise ValidationError("eps_P must lie in [0, 1/(4 d_P)]")
        if not 0.0 < self.tau <= 1.0:
            raise ValidationError("tau must lie in (0, 1]")
        if self.horizon < 1:
            raise ValidationError("horizon must be positive")
        if self.mu_star.shape != (self.d_P,) or self.theta_star.shape != (self.d_R,):
            raise ValidationError("parameter vectors have the wrong dimension")
        for v in (self.mu_star, self.theta_star, self.packing):
            if not np.all(np.abs(v) == 1):
                raise ValidationError("parameter vectors must be sign vectors")
        if not PackingSet(self.d_R, 0.5, self.packing).is_valid():
            raise ValidationError("packing set violates the pairwise inner-product bound")
        if not np.any(np.all(self.packing == self.theta_star, axis=1)):
            raise ValidationError("theta_star must belong to the packing set")

    @classmethod
    def default(cls, d_R: int = 3, d_P: int = 3, horizon: int = 5, tau: float = 1.0, rng=None, **kw):
        """Largest admissible perturbations, exhaustive packing set, random truth."""
        rng = rng if rng is not None else np.random.default_rng(0)
        packing = build_packing_set(d_R, 0.5).vectors
        theta = packing[rng.integers(len(packing))]
        mu = rng.choice((-1, 1), size=d_P)
        kw.setdefault("eps_P", 1.0 / (4 * d_P))
        kw.setdefault("eps_pi", 1.0 / (4 * d_R))
        return cls(d_R, d_P, tau=tau, theta_star=theta, mu_star=mu, packing=packing, horizon=horizon, **kw)

    @property
    def num_patterns(self) -> int:
        return 2**self.d_R

    @property
    def num_states(self) -> int:
        return 2 * (self.num_patterns + 1)

    @property
    def num_actions(self) -> int:
        return 2 ** (self.d_P + 1)

    def state_index(self, pattern: int | None, flag: int) -> int:
        """``pattern=None`` is ``s_0``."""
        j = self.num_patterns if pattern is None else pattern
        return flag * (self.num_patterns + 1) + j

    def to_dict(self) -> dict:
        return {
            "env": "hard_instance",
            "d_R": self.d_R,
            "d_P": self.d_P,
            "eps_P": self.eps_P,
            "eps_pi": self.eps_pi,
            "tau": self.tau,
            "theta_star": self.theta_star.tolist(),
            "mu_star": self.mu_star.tolist(),
            "packing": self.packing.tolist(),
            "horizon": self.horizon,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HardInstanceParams":
        d = {k: v for k, v in d.items() if k != "env"}
        return cls(**d)


def _state_vectors(params: HardInstanceParams) -> np.ndarray:
    """Sign vector of every state, zeros for the ``s_0`` states. Shape ``(S, d_R)``."""
    pats = np.vstack([sign_vectors(params.d_R), np.zeros((1, params.d_R), dtype=int)])
    return np.vstack([pats, pats])


def _action_parts(params: HardInstanceParams) -> tuple[np.ndarray, np.ndarray]:
    acts = sign_vectors(params.d_P + 1)
    return acts[:, :-1], acts[:, -1]


def hard_instance_kernel(params: HardInstanceParams, mu: np.ndarray | None = None) -> np.ndarray:
    mu = params.mu_star if mu is None else np.asarray(mu)
    S, A, m = params.num_states, params.num_actions, params.num_patterns
    a_P, _ = _action_parts(params)
    p_lock = 0.5 + params.eps_P * (a_P @ mu)
    kernel = np.zeros((S, A, S))
    fail = params.state_index(None, 1)
    for j in range(m):
        start, lock = params.state_index(j, 0), params.state_index(j, 1)
        kernel[start, :, lock] = p_lock
        kernel[start, :, fail] = 1.0 - p_lock
        kernel[lock, :, lock] = 1.0
    # [s_0, 0] is never visited; it moves to the fail state deterministically
    kernel[params.state_index(None, 0), :, fail] = 1.0
    kernel[fail, :, fail] = 1.0
    return kernel


def hard_instance_reward(params: HardInstanceParams, theta: np.ndarray) -> np.ndarray:
    """``r([s, 1], a) = tau / H * (1/2 + a_R <theta, s> / (2 d_R))``, zero elsewhere."""
    theta = np.asarray(theta)
    _, a_R = _action_parts(params)
    svec = _state_vectors(params)
    reward = np.zeros((params.num_states, params.num_actions))
    locked = np.arange(params.num_patterns) + params.state_index(0, 1)
    inner = svec[locked] @ theta
    reward[locked] = params.tau / params.horizon * (0.5 + np.outer(inner, a_R) / (2 * params.d_R))
    return reward


def hard_instance_policy(params: HardInstanceParams, mu_hat, theta_hat) -> Policy:
    """Independent Rademacher coordinates: ``P(a_P,i = +1) = 1/2 + eps_pi d_R mu_i``,
    ``P(a_R = +1 | s) = 1/2 + eps_pi <s, theta>`` (``s_0`` counts as the zero vector)."""
    mu_hat, theta_hat = np.asarray(mu_hat), np.asarray(theta_hat)
    q_P = 0.5 + params.eps_pi * params.d_R * mu_hat
    q_R = 0.5 + params.eps_pi * (_state_vectors(params) @ theta_hat)
    if np.any((q_P < 0) | (q_P > 1)) or np.any((q_R < 0) | (q_R > 1)):
        raise ValidationError("policy parameters produce probabilities outside [0, 1]")
    a_P, a_R = _action_parts(params)
    p_aP = np.prod(np.where(a_P > 0, q_P, 1.0 - q_P), axis=1)
    p_aR = np.where(a_R[None, :] > 0, q_R[:, None], 1.0 - q_R[:, None])
    table = p_aR * p_aP[None, :]
    return Policy.stationary(table, params.horizon + 1)


def build_hard_instance(params: HardInstanceParams) -> tuple[TabularMdp, RewardClass, Policy]:
    init = np.zeros(params.num_states)
    init[: params.num_patterns] = 1.0 / params.num_patterns
    mdp = TabularMdp(hard_instance_kernel(params), init, params.horizon + 1)
    tables = np.stack([hard_instance_reward(params, th) for th in params.packing])
    names = ["theta=" + "".join("+" if t > 0 else "-" for t in th) for th in params.packing]
    rewards = RewardClass(tables, names)
    expert = hard_instance_policy(params, params.mu_star, params.theta_star)
    return mdp, rewards, expert


def analytic_value(params: HardInstanceParams, mu_hat, theta_hat, theta_tilde) -> float:
    """Value of the ``(mu_hat, theta_hat)`` policy under reward ``theta_tilde`` without DP.

    Built from the sampling rules: lock-in probability uses ``E[a_P,i] = 2 eps_pi d_R mu_i``,
    each of the ``H`` absorbing steps pays ``tau/H (1/2 + E[a_R] <theta~, s> / (2 d_R))``
    with ``E[a_R] = 2 eps_pi <s, theta_hat>``.
    """
    mu_hat, theta_hat, theta_tilde = map(np.asarray, (mu_hat, theta_hat, theta_tilde))
    mean_aP = 2.0 * params.eps_pi * params.d_R * mu_hat
    p_lock = 0.5 + params.eps_P * (params.mu_star @ mean_aP)
    svec = sign_vectors(params.d_R)
    mean_aR = 2.0 * params.eps_pi * (svec @ theta_hat)
    per_state = params.tau * (0.5 + mean_aR * (svec @ theta_tilde) / (2 * params.d_R))
    return float(p_lock * per_state.mean())


def gap_bound_rhs(params: HardInstanceParams, mu_hat, theta_hat) -> float:
    l1 = np.abs(params.mu_star - np.asarray(mu_hat)).sum()
    mismatch = float(not np.array_equal(params.theta_star, np.asarray(theta_hat)))
    return float(
        params.tau * params.eps_P * params.eps_pi * params.d_R / 2.0 * l1
        + params.eps_pi * params.tau / 2.0 * mismatch
    )


def evaluate_gap_bound(params: HardInstanceParams, mu_hat, theta_hat, instance=None) -> tuple[float, float]:
    """Exact worst-case value gap to the expert over the reward class, and the lower-bound RHS."""
    mdp, rewards, expert = instance if instance is not None else build_hard_instance(params)
    policy = hard_instance_policy(params, mu_hat, theta_hat)
    gaps = exact_policy_value(mdp, expert, rewards.tables) - exact_policy_value(mdp, policy, rewards.tables)
    return float(np.max(gaps)), gap_bound_rhs(params, mu_hat, theta_hat)


def state_table(params: HardInstanceParams) -> list[dict]:
    rows = []
    pats = sign_vectors(params.d_R)
    for flag in (0, 1):
        for j in range(params.num_patterns + 1):
            label = "s0" if j == params.num_patterns else "".join("+" if v > 0 else "-" for v in pats[j])
            rows.append({"state": params.state_index(j if j < params.num_patterns else None, flag),
                         "pattern": label, "flag": flag})
    return rows


def action_table(params: HardInstanceParams) -> list[dict]:
    a_P, a_R = _action_parts(params)
    return [
        {"action": i, "a_P": "".join("+" if v > 0 else "-" for v in a_P[i]), "a_R": int(a_R[i])}
        for i in range(params.num_actions)
    ]
