# %% [markdown]
# # Complexity measures at toy scale

# %%
import numpy as np

from mbail.analysis import covering_number_toy, eluder_dim_bruteforce, hellinger_sq, kl_rademacher
from mbail.gridworld import block_reward_class

print("eluder, 3 indicators:", eluder_dim_bruteforce(np.eye(3), 0.5))
rc = block_reward_class(2)
for rho in (0.0, 0.04, 0.06):
    print(f"covering number of the n=2 block class at rho={rho}:", covering_number_toy(rc.tables, rho))

# %%
for eps in (0.05, 0.1, 0.25):
    print(f"KL({eps}) = {kl_rademacher(eps):.4f} <= {16 * eps**2:.4f}")
print("H^2((.5,.5),(.9,.1)) =", round(hellinger_sq([0.5, 0.5], [0.9, 0.1]), 4))
