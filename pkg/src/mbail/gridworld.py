"""Stochastic GridWorld with block-partitioned reward classes.

Cells are ``(x, y)`` with ``x`` growing to the right and ``y`` growing up;
state index is ``y * side + x``. Moving off the grid leaves the agent in place.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .learner import RewardClass
from .mdp import TabularMdp, ValidationError

ACTIONS = ("up", "down", "left", "right")
MOVES = ((0, 1), (0, -1), (-1, 0), (1, 0))
UP, DOWN, LEFT, RIGHT = range(4)

START_REGION = ((0, 0), (0, 1), (1, 0), (1, 1))


def corner_block(side: int, size: int) -> tuple[tuple[int, int], ...]:
    """The ``size x size`` block of cells in the top-right corner."""
    lo = side - size
    return tuple((x, y) for y in range(lo, side) for x in range(lo, side))


@dataclass
class GridWorldSpec:
    side: int = 9
    p: float = 0.65
    horizon: int = 20
    goal: tuple = field(default_factory=lambda: corner_block(9, 5))
    start: tuple = START_REGION

    def __post_init__(self):
        self.goal = tuple(tuple(int(c) for c in cell) for cell in self.goal)
        self.start = tuple(tuple(int(c) for c in cell) for cell in self.start)
        if not 0.0 < self.p <= 1.0:
            raise ValidationError(f"success probability must lie in (0, 1], got {self.p}")
        if self.side < 2 or self.horizon < 1:
            raise ValidationError("side must be >= 2 and horizon >= 1")
        for cell in self.goal + self.start:
            if not all(0 <= c < self.side for c in cell):
                raise ValidationError(f"cell {cell} lies outside the {self.side}x{self.side} grid")
        if not self.goal or not self.start:
            raise ValidationError("goal and start regions must be non-empty")

    @property
    def num_states(self) -> int:
        return self.side * self.side

    def index(self, x: int, y: int) -> int:
        return y * self.side + x

    def cell(self, s: int) -> tuple[int, int]:
        return s % self.side, s // self.side

    def to_dict(self) -> dict:
        d = asdict(self)
        d["goal"] = [list(c) for c in self.goal]
        d["start"] = [list(c) for c in self.start]
        return {"env": "gridworld", **d}

    @classmethod
    def from_dict(cls, d: dict) -> "GridWorldSpec":
        d = {k: v for k, v in d.items() if k != "env"}
        if "goal_size" in d:
            size = d.pop("goal_size")
            d["goal"] = corner_block(d.get("side", 9), size)
        return cls(**d)


def gridworld_kernel(side: int, p: float) -> np.ndarray:
    """Intended move with probability ``p``, each other direction ``(1 - p) / 3``."""
    S = side * side
    kernel = np.zeros((S, 4, S))
    for y in range(side):
        for x in range(side):
            s = y * side + x
            for a in range(4):
                for b, (dx, dy) in enumerate(MOVES):
                    prob = p if a == b else (1.0 - p) / 3.0
                    nx, ny = x + dx, y + dy
                    if not (0 <= nx < side and 0 <= ny < side):
                        nx, ny = x, y
                    kernel[s, a, ny * side + nx] += prob
    return kernel


def build_gridworld(spec: GridWorldSpec) -> tuple[TabularMdp, np.ndarray]:
    """MDP plus the true reward, which pays ``1 / H`` per step spent in the goal region."""
    init = np.zeros(spec.num_states)
    init[[spec.index(*c) for c in spec.start]] = 1.0 / len(spec.start)
    mdp = TabularMdp(gridworld_kernel(spec.side, spec.p), init, spec.horizon)
    reward = np.zeros((spec.num_states, 4))
    reward[[spec.index(*c) for c in set(spec.goal)]] = 1.0 / spec.horizon
    return mdp, reward


def axis_blocks(side: int, n: int, mode: str = "per_axis") -> np.ndarray:
    """Block label of each coordinate along one axis.

    ``per_axis``: ``n`` blocks per axis, larger blocks first (9 cells, n=4 -> 3,2,2,2).
    ``cell_size``: blocks of ``n`` consecutive cells (9 cells, n=4 -> 4,4,1).
    """
    if not 1 <= n <= side:
        raise ValidationError(f"partition granularity must lie in [1, {side}], got {n}")
    if mode == "per_axis":
        base, rem = divmod(side, n)
        sizes = [base + 1] * rem + [base] * (n - rem)
        return np.repeat(np.arange(n), sizes)
    if mode == "cell_size":
        return np.arange(side) // n
    raise ValueError(f"unknown partition mode {mode!r}")


def block_partition(side: int, n: int, mode: str = "per_axis") -> np.ndarray:
    """Block label per state index, labels ``0 .. B-1`` in row-major block order."""
    lab = axis_blocks(side, n, mode)
    per_row = lab.max() + 1
    ys, xs = np.divmod(np.arange(side * side), side)
    return lab[ys] * per_row + lab[xs]


def block_reward_class(n: int, side: int = 9, horizon: int = 20, mode: str = "per_axis") -> RewardClass:
    """One member per block paying ``1 / H`` per step inside it, plus the all-zero reward (last)."""
    labels = block_partition(side, n, mode)
    num_blocks = labels.max() + 1
    tables = np.zeros((num_blocks + 1, side * side, 4))
    for b in range(num_blocks):
        tables[b, labels == b] = 1.0 / horizon
    names = [f"block{b}" for b in range(num_blocks)] + ["zero"]
    return RewardClass(tables, names)


def gridworld_model_class(side: int, ps, true_p: float | None = None):
    """Candidate kernels for several success probabilities."""
    from .learner import ModelClass

    ps = [float(p) for p in ps]
    kernels = np.stack([gridworld_kernel(side, p) for p in ps])
    true_index = None
    if true_p is not None:
        matches = [i for i, p in enumerate(ps) if abs(p - true_p) < 1e-12]
        true_index = matches[0] if matches else None
    return ModelClass(kernels, [f"p={p:g}" for p in ps], true_index)


def state_table(spec: GridWorldSpec) -> list[dict]:
    """Canonical state index table for debugging dumps."""
    return [{"state": s, "x": spec.cell(s)[0], "y": spec.cell(s)[1]} for s in range(spec.num_states)]
