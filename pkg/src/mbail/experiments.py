"""Seeded experiment protocols that write CSV results with JSON metadata sidecars."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import hedge_regret, hellinger_sq, kl_divergence, kl_rademacher, regret_summary
from .baselines import QParams, bc_policy, evaluate_agent, run_online_il
from .gridworld import (
    GridWorldSpec,
    block_partition,
    block_reward_class,
    build_gridworld,
    gridworld_model_class,
)
from .hard_instance import (
    HardInstanceParams,
    PackingSet,
    build_hard_instance,
    build_packing_set,
    evaluate_gap_bound,
)
from .learner import HedgeState, ModelClass, RewardClass, default_eta, hedge_step, run_mbail
from .mdp import (
    Dataset,
    Policy,
    TabularMdp,
    Trajectory,
    ValidationError,
    exact_policy_value,
    exact_return_variance,
    optimal_policy,
    sample_batch,
    sample_dataset,
    sample_returns,
)

KINDS = (
    "gridworld-reward-sweep",
    "gridworld-stochasticity-sweep",
    "mbail-run",
    "hard-instance-verify",
    "unit-oracles",
)

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_ACCEPTANCE = 0, 1, 2, 3


class ExpertNotFound(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    params: dict = field(default_factory=dict)
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    out_dir: str = "results"
    threads: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown experiment kind {self.kind!r}")
        if not self.seeds:
            raise ValidationError("seed list must be non-empty")
        self.seeds = [int(s) for s in self.seeds]

    @classmethod
    def from_file(cls, path, kind: str | None = None) -> "ExperimentConfig":
        with open(path) as fh:
            raw = json.load(fh)
        kind = kind or raw.pop("kind")
        raw.pop("kind", None)
        known = {k: raw.pop(k) for k in ("seeds", "out_dir", "threads") if k in raw}
        params = raw.pop("params", {})
        params.update(raw)
        return cls(kind, params, **known)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params, "seeds": self.seeds, "threads": self.threads}


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path: Path, header: list[str], rows: list[list], metadata: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(header, rows))
    meta = {"code_version": __version__, **metadata}
    path.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(type(o))


def _rng(*keys) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


def _map(fn, jobs, threads: int):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


# ---------------------------------------------------------------------------
# GridWorld protocol
# ---------------------------------------------------------------------------

def gridworld_expert_trajectory(
    spec: GridWorldSpec, rng: np.random.Generator, target: float = 8.0, cap: int = 100_000, batch: int = 1000
) -> Trajectory:
    """First rollout of the optimal policy whose return (times ``H``) equals ``target``."""
    mdp, reward = build_gridworld(spec)
    policy, _ = optimal_policy(mdp, reward)
    tried = 0
    while tried < cap:
        n = min(batch, cap - tried)
        states, actions, final = sample_batch(mdp, policy, n, rng)
        returns = spec.horizon * reward[states, actions].sum(axis=1)
        hits = np.flatnonzero(np.abs(returns - target) < 1e-9)
        if len(hits):
            i = hits[0]
            return Trajectory(states[i], actions[i], int(final[i]))
        tried += n
    raise ExpertNotFound(f"no rollout with return {target} in {cap} tries (p={spec.p})")


GRIDWORLD_DEFAULTS = {
    "p": 0.65,
    "n": 4,
    "n_list": [1, 2, 3, 4],
    "p_list": [0.45, 0.55, 0.65, 0.75],
    "eval_episodes": 10,
    "expert_return": 8.0,
    "partition": "cell_size",
    "goal_size": 5,
    "side": 9,
    "horizon": 20,
    "q": QParams().to_dict(),
}


def _grid_params(params: dict) -> dict:
    out = {**GRIDWORLD_DEFAULTS, **params}
    out["q"] = {**GRIDWORLD_DEFAULTS["q"], **params.get("q", {})}
    return out


def gridworld_cell(job) -> list[list]:
    """Train and evaluate both agents for one ``(p, n, seed)`` cell."""
    sweep_var, value, p, n, seed, prm = job
    spec = GridWorldSpec.from_dict({"side": prm["side"], "p": p, "horizon": prm["horizon"], "goal_size": prm["goal_size"]})
    mdp, reward = build_gridworld(spec)
    expert = gridworld_expert_trajectory(spec, _rng(seed, 1, int(round(p * 1000))), prm["expert_return"])
    data = Dataset([expert])
    bc = bc_policy(data, mdp.num_states, mdp.num_actions, mdp.horizon)
    labels = block_partition(spec.side, n, prm["partition"])
    il, _ = run_online_il(mdp, data, labels, _rng(seed, 2, int(round(p * 1000)), n), QParams(**prm["q"]))
    rows = []
    for agent, pol in (("bc", bc), ("online_il", il)):
        mean, std = evaluate_agent(mdp, pol, reward, prm["eval_episodes"], _rng(seed, 3, int(round(p * 1000))))
        rows.append([sweep_var, value, seed, agent, mean, std])
    return rows


def cmd_gridworld_sweep(config: ExperimentConfig, mode: str | None = None, write: bool = True):
    """Reward-space (vary ``n``) or stochasticity (vary ``p``) sweep; returns ``(rows, path)``."""
    mode = mode or ("reward" if config.kind == "gridworld-reward-sweep" else "stochasticity")
    prm = _grid_params(config.params)
    if mode == "reward":
        jobs = [("n", n, prm["p"], n, s, prm) for n in prm["n_list"] for s in config.seeds]
    elif mode == "stochasticity":
        jobs = [("p", p, p, prm["n"], s, prm) for p in prm["p_list"] for s in config.seeds]
    else:
        raise ValueError(f"unknown sweep mode {mode!r}")
    rows = [row for cell in _map(gridworld_cell, jobs, config.threads) for row in cell]
    rows.sort(key=lambda r: (r[1], r[2], r[3]))
    header = ["sweep_var", "value", "seed", "agent", "mean_return", "std_return"]
    path = None
    if write:
        spec = GridWorldSpec.from_dict({"side": prm["side"], "horizon": prm["horizon"], "goal_size": prm["goal_size"]})
        meta = {
            "config": config.to_dict(),
            "mode": mode,
            "goal_region": [list(c) for c in spec.goal],
            "start_region": [list(c) for c in spec.start],
            "block_partition": prm["partition"],
            "q_learning": prm["q"],
            "expert_rule": f"first optimal-policy rollout with return {prm['expert_return']}",
            "reward_scale": "returns multiplied by horizon",
        }
        path = write_csv(Path(config.out_dir) / f"gridworld_{mode}_sweep.csv", header, rows, meta)
    return rows, path


# ---------------------------------------------------------------------------
# MB-AIL runs
# ---------------------------------------------------------------------------

@dataclass
class MbailInstance:
    mdp: TabularMdp
    expert_policy: Policy
    rewards: RewardClass
    models: ModelClass
    description: dict


def chain_instance(length: int = 4, horizon: int = 4) -> MbailInstance:
    """Deterministic chain: action 1 moves right, action 0 stays. A wrong model swaps the actions.

    The true reward pays ``1/H`` at the last state; the other reward is zero.
    """
    S, A = length, 2
    kernel = np.zeros((S, A, S))
    for s in range(S):
        kernel[s, 0, s] = 1.0
        kernel[s, 1, min(s + 1, S - 1)] = 1.0
    wrong = kernel[:, ::-1, :].copy()
    init = np.zeros(S)
    init[0] = 1.0
    mdp = TabularMdp(kernel, init, horizon)
    goal = np.zeros((S, A))
    goal[S - 1] = 1.0 / horizon
    rewards = RewardClass(np.stack([goal, np.zeros((S, A))]), ["goal", "zero"])
    models = ModelClass(np.stack([kernel, wrong]), ["truth", "swapped"], true_index=0)
    expert, _ = optimal_policy(mdp, goal)
    return MbailInstance(mdp, expert, rewards, models, {"instance": "chain", "length": length, "horizon": horizon})


def random_small_instance(
    seed: int, num_states: int = 5, num_actions: int = 3, horizon: int = 5, num_models: int = 16, num_rewards: int = 8
) -> MbailInstance:
    """Random kernel plus ``num_models - 1`` perturbed alternatives; random rewards of
    per-step scale ``1/H``; the expert is optimal for reward 0 under the true kernel."""
    rng = _rng(seed, 77)
    S, A, H = num_states, num_actions, horizon
    truth = rng.dirichlet(np.ones(S), size=(S, A))
    kernels = [truth]
    for j in range(num_models - 1):
        lam = 0.15 + 0.85 * j / max(num_models - 2, 1)
        other = rng.dirichlet(np.ones(S), size=(S, A))
        kernels.append((1 - lam) * truth + lam * other)
    kernels = np.stack(kernels)
    init = np.zeros(S)
    init[0] = 1.0
    mdp = TabularMdp(truth, init, H)
    tables = rng.random((num_rewards, S, A)) / H
    tables[-1] = 0.0
    rewards = RewardClass(tables, [f"r{i}" for i in range(num_rewards - 1)] + ["zero"])
    expert, _ = optimal_policy(mdp, tables[0])
    models = ModelClass(kernels, ["truth"] + [f"alt{j}" for j in range(num_models - 1)], true_index=0)
    return MbailInstance(mdp, expert, rewards, models, {"instance": "random_small", "seed": seed, "S": S, "A": A, "H": H})


def gridworld_mbail_instance(
    p: float = 0.65, n: int = 4, model_ps=(0.45, 0.55, 0.65, 0.75, 1.0), goal_size: int = 5, partition: str = "per_axis"
) -> MbailInstance:
    spec = GridWorldSpec.from_dict({"p": p, "goal_size": goal_size})
    mdp, reward = build_gridworld(spec)
    expert, _ = optimal_policy(mdp, reward)
    rewards = block_reward_class(n, spec.side, spec.horizon, partition)
    models = gridworld_model_class(spec.side, model_ps, true_p=p)
    return MbailInstance(
        mdp, expert, rewards, models,
        {"instance": "gridworld", "p": p, "n": n, "model_ps": list(model_ps), "goal_size": goal_size,
         "partition": partition},
    )


def build_mbail_instance(params: dict, seed: int) -> MbailInstance:
    kind = params.get("instance", "chain")
    if kind == "chain":
        return chain_instance(params.get("length", 4), params.get("horizon", 4))
    if kind == "random_small":
        return random_small_instance(seed, **{k: params[k] for k in ("num_states", "num_actions", "horizon",
                                                                     "num_models", "num_rewards") if k in params})
    if kind == "gridworld":
        return gridworld_mbail_instance(
            params.get("p", 0.65), params.get("n", 4), tuple(params.get("model_ps", (0.45, 0.55, 0.65, 0.75, 1.0))),
            params.get("goal_size", 5), params.get("partition", "per_axis"),
        )
    raise ValidationError(f"unknown MB-AIL instance {kind!r}")


def rounds_to_gap(log, threshold: float) -> int | None:
    """First round whose mixture policy has AIL gap at most ``threshold``."""
    hits = np.flatnonzero(log.mixture_gap_curve() <= threshold)
    return int(hits[0]) + 1 if len(hits) else None


def mbail_seed(job):
    params, seed = job
    inst = build_mbail_instance(params, seed)
    rng = _rng(seed, 5)
    expert_data = sample_dataset(inst.mdp, inst.expert_policy, params.get("N", 20), rng)
    log = run_mbail(
        inst.mdp, expert_data, inst.rewards, inst.models, params.get("K", 100), rng,
        beta=params.get("beta"), eta=params.get("eta"), reward_mode=params.get("reward_mode", "mixture"),
        expert_policy=inst.expert_policy, keep_policies=False,
    )
    return inst, log


def cmd_mbail_run(config: ExperimentConfig, write: bool = True):
    """One MB-AIL run per seed; returns ``[(seed, log, summary)]``."""
    params = {"instance": "chain", "K": 100, "N": 20, **config.params}
    results = _map(mbail_seed, [(params, s) for s in config.seeds], config.threads)
    out = []
    for seed, (inst, log) in zip(config.seeds, results):
        summ = regret_summary(log)
        summary = {
            "seed": seed,
            "rounds": log.num_rounds,
            "final_average_regret": float(log.mixture_gap_curve()[-1]),
            "regret": log.regret(),
            "sublinearity_ratio": summ.sublinearity_ratio,
            "truth_containment_rate": log.truth_containment(),
            "final_opt_error": float(log.opt_error_curve()[-1]),
            "rounds_to_gap_0.1": rounds_to_gap(log, 0.1),
            "beta": log.beta,
            "eta": log.eta,
        }
        out.append((seed, log, summary))
        if write:
            names = log.reward_names
            header = ["k", "reward_mode", "vs_size", "truth_in_vs", "model_index", "opt_value"] + [
                f"gap_{n}" for n in names
            ] + ["cum_regret", "opt_error"]
            regret = log.regret_curve()
            eps = log.opt_error_curve()
            rows = [
                [r.k, log.reward_mode, r.vs_size, "" if r.truth_in_vs is None else r.truth_in_vs, r.model_index,
                 r.opt_value, *r.gaps.tolist(), regret[i], eps[i]]
                for i, r in enumerate(log.records)
            ]
            meta = {"config": config.to_dict(), "instance": inst.description, "seed": seed,
                    "model_names": inst.models.names, "reward_names": names}
            base = Path(config.out_dir) / f"mbail_seed{seed}"
            write_csv(base.with_suffix(".csv"), header, rows, meta)
            base.with_suffix(".summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return out


# ---------------------------------------------------------------------------
# Hard instance
# ---------------------------------------------------------------------------

def hard_instance_draws(params: HardInstanceParams, draws: int, rng: np.random.Generator):
    """Rows ``(draw, mu_hat, theta_hat, exact_gap, bound_rhs, holds)``; row 0 is the expert itself."""
    instance = build_hard_instance(params)
    rows = []
    gap, rhs = evaluate_gap_bound(params, params.mu_star, params.theta_star, instance)
    rows.append(["expert", _signs(params.mu_star), _signs(params.theta_star), gap, rhs, gap >= rhs - 1e-12])
    for i in range(draws):
        mu = rng.choice((-1, 1), size=params.d_P)
        theta = params.packing[rng.integers(len(params.packing))]
        gap, rhs = evaluate_gap_bound(params, mu, theta, instance)
        rows.append([i, _signs(mu), _signs(theta), gap, rhs, gap >= rhs - 1e-12])
    return rows


def _signs(v) -> str:
    return "".join("+" if x > 0 else "-" for x in v)


def cmd_hard_instance_verify(config: ExperimentConfig, write: bool = True):
    prm = {"d_R": 3, "d_P": 3, "H": 5, "tau": 1.0, "draws": 100, "packing_d": 64, "gamma": 0.5, **config.params}
    seed = config.seeds[0]
    params = HardInstanceParams.default(
        prm["d_R"], prm["d_P"], prm["H"], prm["tau"], rng=_rng(seed, 11),
        **{k: prm[k] for k in ("eps_P", "eps_pi") if k in prm},
    )
    rows = hard_instance_draws(params, prm["draws"], _rng(seed, 12))
    pack_rows = []
    for d in sorted({prm["d_R"], prm["packing_d"]}):
        ps = build_packing_set(d, prm["gamma"], _rng(seed, 13, d))
        pack_rows.append(_packing_row(ps))
    if write:
        meta = {"config": config.to_dict(), "instance": params.to_dict(),
                "state_enumeration": "sign patterns lexicographic, s_0 last, flag-0 block first"}
        out = Path(config.out_dir)
        write_csv(out / "hard_instance_gap.csv", ["draw", "mu_hat", "theta_hat", "exact_gap", "bound_rhs", "holds"],
                  rows, meta)
        write_csv(out / "packing.csv", ["d", "gamma", "size", "max_inner", "bound", "valid"], pack_rows, meta)
    return rows, pack_rows


def _packing_row(ps: PackingSet) -> list:
    return [ps.d, ps.gamma, len(ps), ps.max_inner(), ps.d * ps.gamma, ps.is_valid()]


# ---------------------------------------------------------------------------
# Oracle suites
# ---------------------------------------------------------------------------

def random_mdp(rng: np.random.Generator, max_states: int = 6, max_actions: int = 3, max_horizon: int = 5):
    S = int(rng.integers(2, max_states + 1))
    A = int(rng.integers(1, max_actions + 1))
    H = int(rng.integers(1, max_horizon + 1))
    kernel = rng.dirichlet(np.ones(S) * 0.5, size=(S, A))
    init = rng.dirichlet(np.ones(S))
    mdp = TabularMdp(kernel, init, H)
    policy = Policy(rng.dirichlet(np.ones(A), size=(H, S)))
    reward = rng.random((S, A)) / H
    return mdp, policy, reward


def _suite_mc_vs_dp(rng, samples: int = 200_000, instances: int = 5):
    worst = 0.0
    for _ in range(instances):
        mdp, policy, reward = random_mdp(rng)
        ret = sample_returns(mdp, policy, reward, samples, rng)
        v, var = exact_policy_value(mdp, policy, reward), exact_return_variance(mdp, policy, reward)
        se_mean = math.sqrt(var / samples) + 1e-15
        dev = (ret - ret.mean()) ** 2
        se_var = math.sqrt(dev.var() / samples) + 1e-15
        worst = max(worst, abs(ret.mean() - v) / se_mean, abs(ret.var() - var) / se_var)
    return worst <= 4.0, worst, "max |MC - DP| / SE <= 4"


def _suite_hedge(rng, K: int = 2000):
    worst = 0.0
    for N in (2, 8, 64):
        eta = default_eta(N, K)
        losses = rng.random((K, N))
        state = HedgeState.start(N, eta)
        W = [state.weights]
        for t in range(K - 1):
            state, w = hedge_step(state, losses[t])
            W.append(w)
        regret, _ = hedge_regret(np.array(W), losses)
        worst = max(worst, regret / math.sqrt(K * math.log(N) / 2))
    return worst <= 1.0, worst, "Hedge regret / sqrt(K ln N / 2) on [0,1] losses <= 1"


def _suite_kl(rng):
    grid = np.linspace(0, 0.25, 1000)
    slack = min(16 * e**2 - kl_rademacher(e) for e in grid)
    e = 0.2
    generic = kl_divergence([0.5 + e, 0.5 - e], [0.5 - e, 0.5 + e])
    ok = slack >= 0 and abs(generic - kl_rademacher(e)) < 1e-12
    return ok, slack, "min(16 eps^2 - KL) >= 0 on [0, 1/4]"


def _suite_hellinger(rng):
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 8))
        p, q = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
        h = hellinger_sq(p, q)
        worst = max(worst, abs(h - hellinger_sq(q, p)), max(0.0, h - 2.0), max(0.0, -h), hellinger_sq(p, p))
    return worst <= 1e-12, worst, "symmetry / range / identity violations <= 1e-12"


ORACLE_SUITES = {
    "mc_vs_dp": _suite_mc_vs_dp,
    "hedge_regret": _suite_hedge,
    "kl_bound": _suite_kl,
    "hellinger": _suite_hellinger,
}


def cmd_unit_oracles(config: ExperimentConfig, stream=None) -> int:
    """Run the property suites; print one line per suite and return an exit code."""
    import sys

    stream = stream or sys.stdout
    if config.params.get("inject_bad_kernel"):
        try:
            kernel = np.full((2, 1, 2), 0.5)
            kernel[0, 0] = (0.5, 0.4)
            TabularMdp(kernel, np.array([1.0, 0.0]), 1)
        except ValidationError as err:
            print(f"FAIL validation: {err}", file=stream)
            return EXIT_VALIDATION
    rng = _rng(config.seeds[0], 99)
    failed = False
    for name, suite in ORACLE_SUITES.items():
        ok, measured, tol = suite(rng)
        failed |= not ok
        print(f"{'PASS' if ok else 'FAIL'} {name}: measured={measured:.6g} ({tol})", file=stream)
    return EXIT_ACCEPTANCE if failed else EXIT_OK
