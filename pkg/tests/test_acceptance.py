"""Acceptance criteria, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary prints one
PASS/FAIL line per criterion with the measured quantities.
"""
import math
import time

import numpy as np
import pytest
from scipy.special import softmax

from mbail.analysis import hellinger_sq, hedge_regret, kl_rademacher
from mbail.experiments import (
    ExperimentConfig,
    cmd_gridworld_sweep,
    cmd_mbail_run,
    hard_instance_draws,
    random_mdp,
    rounds_to_gap,
)
from mbail.hard_instance import HardInstanceParams, build_packing_set
from mbail.learner import HedgeState, default_eta, hedge_step
from mbail.mdp import Policy, TabularMdp, exact_return_variance, sample_returns

SEEDS = [0, 1, 2, 3, 4]


def _means(rows):
    out = {}
    for value in sorted({r[1] for r in rows}):
        for agent in ("bc", "online_il"):
            out[value, agent] = float(np.mean([r[4] for r in rows if r[1] == value and r[3] == agent]))
    return out


def _inversions(seq):
    return sum(b < a for a, b in zip(seq, seq[1:]))


@pytest.mark.criterion("gridworld reward-space sweep")
def test_gridworld_reward_sweep(record_property):
    t0 = time.perf_counter()
    rows, _ = cmd_gridworld_sweep(ExperimentConfig("gridworld-reward-sweep", seeds=SEEDS), write=False)
    elapsed = time.perf_counter() - t0
    m = _means(rows)
    il = [m[n, "online_il"] for n in (1, 2, 3, 4)]
    bc = [m[n, "bc"] for n in (1, 2, 3, 4)]
    record_property("measured", f"IL={np.round(il, 2).tolist()} BC={np.round(bc, 2).tolist()} "
                                f"IL4-IL1={il[3] - il[0]:.2f} (>=1.0) IL4={il[3]:.2f} (>=5.6) {elapsed:.0f}s")
    assert all(i >= b for i, b in zip(il, bc))
    assert il[3] - il[0] >= 1.0
    assert il[3] >= 0.7 * 8.0
    assert elapsed <= 300


@pytest.mark.criterion("gridworld stochasticity sweep")
def test_gridworld_stochasticity_sweep(record_property):
    t0 = time.perf_counter()
    rows, _ = cmd_gridworld_sweep(ExperimentConfig("gridworld-stochasticity-sweep", seeds=SEEDS), write=False)
    elapsed = time.perf_counter() - t0
    ps = (0.45, 0.55, 0.65, 0.75)
    m = _means(rows)
    il = [m[p, "online_il"] for p in ps]
    bc = [m[p, "bc"] for p in ps]
    record_property("measured", f"IL={np.round(il, 2).tolist()} BC={np.round(bc, 2).tolist()} {elapsed:.0f}s")
    assert all(i >= b for i, b in zip(il, bc))
    assert _inversions(il) <= 1 and _inversions(bc) <= 1
    assert elapsed <= 300


@pytest.mark.criterion("MB-AIL sublinear regret")
def test_mbail_sublinear_regret(record_property):
    t0 = time.perf_counter()
    cfg = ExperimentConfig("mbail-run", {"instance": "random_small", "K": 2000, "N": 1000}, seeds=SEEDS)
    results = cmd_mbail_run(cfg, write=False)
    elapsed = time.perf_counter() - t0
    ratios, contain = [], []
    for _, log, summary in results:
        avg = log.mixture_gap_curve()
        ratios.append(avg[1999] / avg[99])
        contain.append(summary["truth_containment_rate"])
    record_property("measured", f"ratio={np.round(ratios, 3).tolist()} (<=0.5) containment={contain} {elapsed:.0f}s")
    assert all(r <= 0.5 for r in ratios)
    assert all(c >= 0.95 for c in contain)
    assert elapsed <= 600


@pytest.mark.criterion("deterministic-regime speedup")
def test_deterministic_regime(record_property):
    K = 300
    counts = {}
    for p in (1.0, 0.65):
        cfg = ExperimentConfig("mbail-run", {"instance": "gridworld", "p": p, "K": K, "N": 20}, seeds=SEEDS)
        counts[p] = [rounds_to_gap(log, 0.1) or math.inf for _, log, _ in cmd_mbail_run(cfg, write=False)]
    wins = sum(a < b for a, b in zip(counts[1.0], counts[0.65]))
    record_property("measured", f"rounds p=1.0 {counts[1.0]} vs p=0.65 {counts[0.65]}; wins {wins}/5 (>=4)")
    assert wins >= 4


@pytest.mark.criterion("hard-instance gap bound certification")
def test_gap_certification(record_property):
    t0 = time.perf_counter()
    params = HardInstanceParams.default(3, 3, rng=np.random.default_rng(0))
    assert len(params.packing) == 8  # exhaustive M at d_R = 3
    rows = hard_instance_draws(params, 100, np.random.default_rng(2024))
    elapsed = time.perf_counter() - t0
    held = sum(bool(r[5]) for r in rows[1:])
    worst = min(r[3] - r[4] for r in rows[1:])
    record_property("measured", f"held {held}/100 (need 100), worst gap-rhs {worst:.4f}, expert row "
                                f"({rows[0][3]}, {rows[0][4]}) {elapsed:.1f}s")
    assert rows[0][3] == 0.0 and rows[0][4] == 0.0
    assert elapsed <= 60
    assert held == 100


@pytest.mark.criterion("packing set")
def test_packing_set(record_property):
    ps = build_packing_set(64, 0.5, np.random.default_rng(0))
    small = [build_packing_set(d, 0.5) for d in range(1, 17)]
    record_property("measured", f"d=64 size {len(ps)} max inner {ps.max_inner():.0f} (<=32); "
                                f"d<=16 sizes {[len(s) for s in small]}")
    assert len(ps) == 54 and ps.max_inner() <= 32 and ps.is_valid()
    assert all(s.is_valid() for s in small)


@pytest.mark.criterion("variance oracle")
def test_variance_oracle(record_property):
    rng = np.random.default_rng(123)
    n = 1_000_000
    worst = 0.0
    for _ in range(20):
        mdp, policy, reward = random_mdp(rng)
        ret = sample_returns(mdp, policy, reward, n, rng)
        var = exact_return_variance(mdp, policy, reward)
        se = math.sqrt(np.var((ret - ret.mean()) ** 2) / n)
        worst = max(worst, abs(ret.var() - var) / se if se > 0 else abs(ret.var() - var) * math.inf)
    kernel = np.zeros((4, 2, 4))
    for s in range(4):
        kernel[s, 0, (s + 1) % 4] = kernel[s, 1, s] = 1.0
    det = TabularMdp(kernel, np.eye(4)[0], 6)
    acts = np.random.default_rng(0).integers(0, 2, size=(6, 4))
    det_var = exact_return_variance(det, Policy.deterministic(acts, 2), np.random.default_rng(1).random((4, 2)) / 6)
    record_property("measured", f"max |MC-DP|/SE = {worst:.2f} (<=3); deterministic variance {det_var}")
    assert worst <= 3.0
    assert det_var == 0.0


def _hedge_weights(losses, eta):
    """Weights before each round: softmax of minus eta times the losses seen so far."""
    seen = np.vstack([np.zeros((1, losses.shape[1])), np.cumsum(losses, axis=0)[:-1]])
    return softmax(-eta * seen, axis=1)


@pytest.mark.criterion("Hedge regret bound")
def test_hedge_regret(record_property):
    K = 10_000
    rng = np.random.default_rng(7)
    # the batched weights reproduce the incremental learner exactly
    probe = rng.choice((-1.0, 1.0), size=(200, 8))
    state, W = HedgeState.start(8, default_eta(8, K)), [np.full(8, 1 / 8)]
    for t in range(199):
        state, w = hedge_step(state, probe[t])
        W.append(w)
    np.testing.assert_allclose(np.array(W), _hedge_weights(probe, default_eta(8, K)), atol=1e-12)

    worst, fails = {}, 0
    for N in (2, 8, 64):
        bound = math.sqrt(K / 2 * math.log(N)) + 1
        eta = default_eta(N, K)
        ratios = []
        for _ in range(100):
            L = rng.choice((-1.0, 1.0), size=(K, N))
            regret, eps_opt = hedge_regret(_hedge_weights(L, eta), L)
            ratios.append(regret / bound)
            fails += regret > bound or eps_opt > bound / K
        worst[N] = round(max(ratios), 3)
    record_property("measured", f"max regret/bound per |R| {worst}; {fails}/300 sequences exceed")
    assert fails == 0


@pytest.mark.criterion("KL and Hellinger identities")
def test_kl_hellinger(record_property):
    grid = np.linspace(0.0, 0.25, 1000)
    slack = min(16 * e**2 - kl_rademacher(e) for e in grid)
    rng = np.random.default_rng(0)
    viol = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 8))
        p, q = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
        h = hellinger_sq(p, q)
        viol = max(viol, abs(h - hellinger_sq(q, p)), -h, h - 2.0)
    worked = hellinger_sq([0.5, 0.5], [0.9, 0.1])
    record_property("measured", f"min(16e^2-KL)={slack:.3g} (>=0); bound/symmetry violation {viol:.1e}; "
                                f"worked value {worked:.10f} vs 0.1894 at 1e-9")
    assert slack >= 0.0
    assert viol <= 1e-12
    assert hellinger_sq([0.0, 1.0], [1.0, 0.0]) == pytest.approx(2.0)
    assert abs(worked - 0.1894) <= 1e-9
