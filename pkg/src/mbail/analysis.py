"""Distances, complexity measures and regret post-processing."""
from __future__ import annotations

import itertools
import math
from typing import NamedTuple

import numpy as np

from .mdp import ValidationError


def _as_distribution(p, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise ValidationError(f"{name} is not a probability vector")
    return p


def hellinger_sq(p, q) -> float:
    """Squared Hellinger distance ``sum_i (sqrt p_i - sqrt q_i)^2`` (range ``[0, 2]``)."""
    p, q = _as_distribution(p, "p"), _as_distribution(q, "q")
    if p.shape != q.shape:
        raise ValidationError("distributions live on different supports")
    return float(np.sum((np.sqrt(p) - np.sqrt(q)) ** 2))


def kl_divergence(p, q) -> float:
    p, q = _as_distribution(p, "p"), _as_distribution(q, "q")
    if p.shape != q.shape:
        raise ValidationError("distributions live on different supports")
    mask = p > 0
    if np.any(q[mask] == 0):
        return math.inf
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def kl_rademacher(eps: float) -> float:
    """KL between Rademacher laws with ``P(+1) = 1/2 + eps`` and ``1/2 - eps``."""
    if abs(eps) >= 0.5:
        raise ValidationError("need |eps| < 1/2")
    if eps == 0:
        return 0.0
    return 2.0 * eps * math.log((1.0 + 2.0 * eps) / (1.0 - 2.0 * eps))


# ---------------------------------------------------------------------------
# Eluder dimension and covering numbers
# ---------------------------------------------------------------------------

class EluderResult(NamedTuple):
    length: int
    exact: bool


def eluder_dim_bruteforce(
    values,
    eps: float,
    p: int = 1,
    max_points: int = 10,
    max_len: int | None = None,
    fallback: bool = False,
) -> EluderResult:
    """Longest eps-independent sequence for a finite class.

    ``values[g, x]`` is ``g(x)``. Point ``x_t`` is independent of its prefix if
    some ``g`` has ``sum_{l<t} |g(x_l)|^p <= eps^p`` and ``|g(x_t)|^p >= eps^p``.
    Points may repeat. Exact depth-first search with memoisation over prefix
    sums; above ``max_points`` a greedy pass gives a lower bound
    (``exact=False``) when ``fallback`` is set.
    """
    if p not in (1, 2):
        raise ValueError("only p in {1, 2} is supported")
    if eps <= 0:
        raise ValidationError("eps must be positive")
    F = np.abs(np.asarray(values, dtype=float)) ** p
    if F.ndim != 2:
        raise ValidationError("values must be a (members, points) array")
    thresh = eps**p
    tol = 1e-12
    # each member can witness at most twice: the first witness lifts its prefix to >= eps^p
    cap = 2 * F.shape[0] if max_len is None else max_len
    active = F >= thresh - tol

    def extensions(prefix):
        alive = prefix <= thresh + tol
        for x in range(F.shape[1]):
            if np.any(alive & active[:, x]):
                yield x

    if F.shape[1] > max_points:
        if not fallback:
            raise ValidationError(f"exact search limited to {max_points} points; enable fallback")
        prefix = np.zeros(F.shape[0])
        length = 0
        while length < cap:
            x = next(extensions(prefix), None)
            if x is None:
                break
            prefix = prefix + F[:, x]
            length += 1
        return EluderResult(length, False)

    memo: dict = {}

    def longest(prefix, depth):
        if depth >= cap:
            return 0
        key = (depth, tuple(np.round(prefix, 12)))
        if key in memo:
            return memo[key]
        best = 0
        for x in extensions(prefix):
            best = max(best, 1 + longest(prefix + F[:, x], depth + 1))
            if depth + best >= cap:
                break
        memo[key] = best
        return best

    return EluderResult(longest(np.zeros(F.shape[0]), 0), True)


def sup_distances(tables) -> np.ndarray:
    T = np.asarray(tables, dtype=float).reshape(len(tables), -1)
    return np.abs(T[:, None, :] - T[None, :, :]).max(axis=-1)


def covering_number_toy(tables, rho: float, exact_max: int = 20) -> int:
    """Smallest sub-family covering every member within ``rho`` in sup-norm.

    Exhaustive for ``len(tables) <= exact_max``, greedy set cover otherwise.
    """
    D = sup_distances(tables)
    n = len(D)
    covers = D <= rho + 1e-12
    if n <= exact_max:
        full = (1 << n) - 1
        masks = [sum(1 << j for j in np.flatnonzero(covers[i])) for i in range(n)]
        for size in range(1, n + 1):
            for combo in itertools.combinations(range(n), size):
                acc = 0
                for i in combo:
                    acc |= masks[i]
                if acc == full:
                    return size
        return n
    uncovered = np.ones(n, dtype=bool)
    count = 0
    while uncovered.any():
        gains = (covers & uncovered[None, :]).sum(axis=1)
        i = int(gains.argmax())
        uncovered &= ~covers[i]
        count += 1
    return count


def bracketing_number_toy(tables, eps: float) -> int:
    """Finite classes: each bracket ``[l, u]`` with ``||u - l||_inf <= eps`` is built
    from pointwise min/max of a group, so this reduces to covering groups of
    sup-diameter ``<= eps``; computed greedily (an upper bound)."""
    D = sup_distances(tables)
    remaining = list(range(len(D)))
    count = 0
    T = np.asarray(tables, dtype=float).reshape(len(tables), -1)
    while remaining:
        group = [remaining[0]]
        for j in remaining[1:]:
            cand = group + [j]
            if (T[cand].max(axis=0) - T[cand].min(axis=0)).max() <= eps + 1e-12:
                group = cand
        remaining = [j for j in remaining if j not in group]
        count += 1
    return count


# ---------------------------------------------------------------------------
# Regret curves
# ---------------------------------------------------------------------------

class RegretSummary(NamedTuple):
    checkpoints: np.ndarray
    average_regret: np.ndarray
    sublinearity_ratio: float
    opt_error: np.ndarray | None


def _ratio(num: float, den: float) -> float:
    if den > 0:
        return num / den
    return 0.0 if num <= 0 else math.inf


def regret_summary(log, checkpoints=None) -> RegretSummary:
    """Average regret ``Regret(k) / k`` at checkpoints and the ratio between
    the final average and the average at ``K / 20``.

    ``log`` is a ``RunLog`` or a per-round gap array (``(K,)`` or ``(K, |R|)``).
    """
    opt_error = None
    if hasattr(log, "gap_matrix"):
        gaps = log.gap_matrix()
        opt_error = log.opt_error_curve()
    else:
        gaps = np.asarray(log, dtype=float)
        if gaps.ndim == 1:
            gaps = gaps[:, None]
    K = len(gaps)
    if K == 0:
        raise ValidationError("empty log")
    regret = np.cumsum(gaps, axis=0).max(axis=1)
    avg = regret / np.arange(1, K + 1)
    early = max(K // 20, 1)
    ratio = _ratio(avg[-1], avg[early - 1])
    if checkpoints is None:
        checkpoints = np.unique(np.r_[np.geomspace(1, K, num=min(K, 20)).astype(int), early, K])
    checkpoints = np.asarray(checkpoints, dtype=int)
    return RegretSummary(checkpoints, avg[checkpoints - 1], float(ratio), opt_error)


def hedge_regret(weights, losses) -> tuple[float, float]:
    """Realised regret of a weight sequence against the best fixed expert.

    ``weights[t]`` must be chosen before ``losses[t]`` is revealed.
    Returns ``(regret, regret / K)``; the latter is the optimisation error.
    """
    W, L = np.asarray(weights), np.asarray(losses)
    regret = float((W * L).sum() - L.sum(axis=0).min())
    return regret, regret / len(L)
