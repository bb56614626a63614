# %% [markdown]
# # GridWorld: behavioural cloning versus online imitation
# A single expert trajectory of return 8. Online IL rewards itself for matching
# expert pairs; coarser blocks (larger ``n``) share that reward across cells.

# %%
import numpy as np

from mbail.experiments import ExperimentConfig, cmd_gridworld_sweep

rows, _ = cmd_gridworld_sweep(ExperimentConfig("gridworld-reward-sweep", seeds=[0, 1, 2]), write=False)
for n in (1, 2, 3, 4):
    il = np.mean([r[4] for r in rows if r[1] == n and r[3] == "online_il"])
    bc = np.mean([r[4] for r in rows if r[1] == n and r[3] == "bc"])
    print(f"n={n}  BC {bc:.2f}  online IL {il:.2f}")

# %%
rows, _ = cmd_gridworld_sweep(ExperimentConfig("gridworld-stochasticity-sweep", seeds=[0, 1, 2]), write=False)
for p in (0.45, 0.55, 0.65, 0.75):
    il = np.mean([r[4] for r in rows if r[1] == p and r[3] == "online_il"])
    bc = np.mean([r[4] for r in rows if r[1] == p and r[3] == "bc"])
    print(f"p={p}  BC {bc:.2f}  online IL {il:.2f}")
