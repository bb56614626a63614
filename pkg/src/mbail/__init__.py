"""Model-based adversarial imitation learning on finite-horizon tabular MDPs."""

__version__ = "0.1.0"

from .mdp import (  # noqa: E402
    Dataset,
    Policy,
    TabularMdp,
    Trajectory,
    ValidationError,
    exact_policy_value,
    exact_return_variance,
    optimal_policy,
    sample_dataset,
    sample_returns,
    sample_trajectory,
)
from .learner import (  # noqa: E402
    HedgeState,
    ModelClass,
    RewardClass,
    RunLog,
    hedge_step,
    mle_version_space,
    optimistic_plan,
    run_mbail,
    value_difference_loss,
)
from .gridworld import GridWorldSpec, block_reward_class, build_gridworld  # noqa: E402
from .hard_instance import HardInstanceParams, build_hard_instance, build_packing_set  # noqa: E402
from .baselines import bc_policy, run_online_il  # noqa: E402
