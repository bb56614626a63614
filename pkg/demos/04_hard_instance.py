# %% [markdown]
# # The lower-bound instance
# Sign-vector states and actions, a lock-in transition biased by ``mu*`` and a
# reward tilted by ``theta*``. We compare the exact worst-case gap of perturbed
# policies with the closed-form lower bound.

# %%
import numpy as np

from mbail.hard_instance import HardInstanceParams, build_packing_set, evaluate_gap_bound, sign_vectors

params = HardInstanceParams.default(3, 3, rng=np.random.default_rng(0))
print("states", params.num_states, "actions", params.num_actions, "|M|", len(params.packing))

# %%
holds = 0
worst = np.inf
for mu in sign_vectors(3):
    for theta in params.packing:
        gap, rhs = evaluate_gap_bound(params, mu, theta)
        holds += gap >= rhs - 1e-12
        worst = min(worst, gap - rhs)
print(f"bound holds for {holds}/64 policies; worst gap - rhs = {worst:.4f}")

# %%
ps = build_packing_set(64, 0.5, np.random.default_rng(0))
print("packing d=64:", len(ps), "vectors, max inner product", ps.max_inner())
