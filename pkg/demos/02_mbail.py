# %% [markdown]
# # MB-AIL on a small random MDP
# Sixteen candidate kernels (one of them true), eight candidate rewards. Each
# round collects one trajectory, updates the exponential-weights reward learner,
# shrinks the likelihood version space and plans optimistically.

# %%
import numpy as np

from mbail.analysis import regret_summary
from mbail.experiments import random_small_instance
from mbail.learner import run_mbail
from mbail.mdp import sample_dataset

inst = random_small_instance(seed=0)
rng = np.random.default_rng(0)
expert_data = sample_dataset(inst.mdp, inst.expert_policy, 1000, rng)
log = run_mbail(inst.mdp, expert_data, inst.rewards, inst.models, 2000, rng, expert_policy=inst.expert_policy)

# %%
summary = regret_summary(log, checkpoints=[10, 100, 500, 1000, 2000])
for k, avg in zip(summary.checkpoints, summary.average_regret):
    print(f"K={k:5d}  Regret(K)/K = {avg:.4f}")
print("sublinearity ratio", round(summary.sublinearity_ratio, 3))
print("version-space size at the end", log.records[-1].vs_size)
print("true kernel kept in", log.truth_containment() * 100, "% of rounds")

# %% [markdown]
# The realised reward optimisation error shrinks like ``1/sqrt(K)``.

# %%
eps = log.opt_error_curve()
print([round(float(eps[k - 1]), 4) for k in (10, 100, 1000, 2000)])
