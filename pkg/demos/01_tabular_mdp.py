# %% [markdown]
# # Exact dynamic programming on a tabular MDP
# Policy values and return variances are computed exactly by backward recursion
# and checked against Monte-Carlo rollouts.

# %%
import numpy as np

from mbail.experiments import random_mdp
from mbail.mdp import exact_policy_value, exact_return_variance, optimal_policy, sample_returns

rng = np.random.default_rng(0)
mdp, policy, reward = random_mdp(rng)
print(f"S={mdp.num_states} A={mdp.num_actions} H={mdp.horizon}")

# %%
value = exact_policy_value(mdp, policy, reward)
var = exact_return_variance(mdp, policy, reward)
returns = sample_returns(mdp, policy, reward, 200_000, rng)
print(f"value    exact {value:.5f}  MC {returns.mean():.5f}")
print(f"variance exact {var:.6f}  MC {returns.var():.6f}")

# %% [markdown]
# Value iteration breaks ties toward the lowest action index and returns a
# deterministic stage-dependent policy.

# %%
pi_star, v_star = optimal_policy(mdp, reward)
print("optimal value", v_star, ">= random policy", value)
print("stage-0 actions", pi_star.greedy_actions()[0])
