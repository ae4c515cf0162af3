"""W x W grid with random walls and five discrete moves.

State is the agent cell ``(x, y)`` stored as floats. Actions: 0 up (+y),
1 down (-y), 2 left (-x), 3 right (+x), 4 stay.
"""

from __future__ import annotations

from collections import deque
from functools import lru_cache

import numpy as np

from ..core import ContractError, CostModel, DiscreteActionSpace, action_norm_constraints
from ..rng import RandomStream
from .base import World, register
from .variation import Constraint, FactorSpec, VariationError, VariationSpace

MOVES = np.array([[0, 1], [0, -1], [-1, 0], [1, 0], [0, 0]], dtype=float)
ACTION_NAMES = ("up", "down", "left", "right", "stay")


@lru_cache(maxsize=256)
def _layout(size: int, seed: int, density: float) -> np.ndarray:
    rng = RandomStream(seed, (1,))
    walls = rng.uniform(0.0, 1.0, size=(size, size)) < density
    walls.setflags(write=False)
    return walls


def wall_layout(size: int, seed: int, density: float) -> np.ndarray:
    """Boolean ``(size, size)`` array indexed ``[x, y]``; True marks a wall."""
    return _layout(int(size), int(seed), float(density))


def to_cell(frac, size: int) -> np.ndarray:
    return np.minimum(np.floor(np.asarray(frac, dtype=float) * size), size - 1)


def bfs_distances(walls: np.ndarray, goal) -> np.ndarray:
    """Shortest-path step counts to ``goal`` (-1 where unreachable)."""
    size = walls.shape[0]
    dist = -np.ones(walls.shape, dtype=int)
    gx, gy = int(goal[0]), int(goal[1])
    if walls[gx, gy]:
        return dist
    dist[gx, gy] = 0
    queue = deque([(gx, gy)])
    while queue:
        x, y = queue.popleft()
        for dx, dy in MOVES[:4].astype(int):
            nx, ny = x + dx, y + dy
            if 0 <= nx < size and 0 <= ny < size and not walls[nx, ny] and dist[nx, ny] < 0:
                dist[nx, ny] = dist[x, y] + 1
                queue.append((nx, ny))
    return dist


def _open_moves(walls: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """``(..., 5)`` mask: 1 where the move from ``cells`` lands on a free cell."""
    size = walls.shape[0]
    target = cells[..., None, :] + MOVES
    inside = np.all((target >= 0) & (target <= size - 1), axis=-1)
    t = np.clip(target, 0, size - 1).astype(int)
    return (inside & ~walls[t[..., 0], t[..., 1]]).astype(float)


def _task_feasible(v) -> bool:
    size = v["grid.size"]
    walls = wall_layout(size, v["walls.seed"], v["walls.density"])
    s = to_cell(v["agent.start"], size).astype(int)
    g = to_cell(v["goal.position"], size).astype(int)
    if walls[s[0], s[1]] or walls[g[0], g[1]] or np.array_equal(s, g):
        return False
    return bfs_distances(walls, g)[s[0], s[1]] > 0


@register("gridworld")
class GridWorld(World):
    state_dim = 2
    max_steps = 200
    task_keys = ("agent.start", "goal.position")

    def variation_space(self) -> VariationSpace:
        return VariationSpace(
            [
                FactorSpec("grid.size", "discrete", 8, values=tuple(range(5, 13)), description="side length W"),
                FactorSpec("walls.seed", "discrete", 0, values=tuple(range(1000)), description="wall layout seed"),
                FactorSpec("walls.density", "box", 0.1, low=0.0, high=0.3, description="wall probability per cell"),
                FactorSpec("agent.start", "box", np.array([0.1, 0.1]), low=[0.0, 0.0], high=[1.0, 1.0],
                           description="start cell as a fraction of the grid"),
                FactorSpec("goal.position", "box", np.array([0.9, 0.9]), low=[0.0, 0.0], high=[1.0, 1.0],
                           description="goal cell as a fraction of the grid"),
            ],
            constraints=[Constraint("start and goal free, distinct and connected",
                                    ("grid.size", "walls.seed", "walls.density", "agent.start", "goal.position"),
                                    _task_feasible)],
        )

    def _configure(self, values):
        self.size = int(values["grid.size"])
        self.walls = wall_layout(self.size, values["walls.seed"], values["walls.density"])
        start = to_cell(values["agent.start"], self.size)
        goal = to_cell(values["goal.position"], self.size)
        for name, cell in (("start", start), ("goal", goal)):
            if self.walls[int(cell[0]), int(cell[1])]:
                raise VariationError(f"{name} cell {cell.astype(int).tolist()} is a wall")
        return start, goal

    @property
    def action_space(self):
        return DiscreteActionSpace(5)

    def _transition(self, state, action):
        a = int(action)
        if not 0 <= a < 5:
            raise ContractError(f"gridworld action must be in 0..4, got {action!r}")
        mask = _open_moves(self.walls, np.asarray(state, dtype=float))
        return state + mask[a] * MOVES[a]

    def success(self, state, goal) -> bool:
        return bool(np.array_equal(np.asarray(state), np.asarray(goal)))

    def distances_to_goal(self) -> np.ndarray:
        return bfs_distances(self.walls, self.goal.astype(int))

    def cost_model(self, goal=None, action_weight: float = 0.01, a_max: float = 1.0):
        goal = self.goal if goal is None else np.asarray(goal, dtype=float)
        return GridCost(self.walls, goal, action_weight, a_max)


class GridCost(CostModel):
    """Relaxed rollout over probability rows.

    Each step moves by the probability-weighted displacement, where a move
    counts only if it is open from the rounded current cell, then clips to
    the grid. One-hot rows reproduce the discrete world exactly. The gradient
    treats the open-move mask as locally constant.
    """

    def __init__(self, walls, goal, action_weight=0.01, a_max=1.0):
        self.walls = np.asarray(walls, dtype=bool)
        self.goal = np.asarray(goal, dtype=float)
        if self.goal.shape != (2,):
            raise ValueError("gridworld goals are 2-vectors (x, y)")
        self.action_weight = action_weight
        self.a_max = a_max
        self.action_space = DiscreteActionSpace(5)

    def _rollout(self, s0, P):
        N, H, _ = P.shape
        hi = self.walls.shape[0] - 1
        pos = np.repeat(np.asarray(s0, dtype=float)[None], N, axis=0)
        traj = np.empty((N, H + 1, 2))
        masks = np.empty((N, H, 5))
        inner = np.empty((N, H, 2), dtype=bool)
        traj[:, 0] = pos
        for t in range(H):
            cells = np.clip(np.floor(pos + 0.5), 0, hi)
            masks[:, t] = _open_moves(self.walls, cells)
            raw = pos + (P[:, t] * masks[:, t]) @ MOVES
            inner[:, t] = (raw >= 0) & (raw <= hi)
            pos = np.clip(raw, 0, hi)
            traj[:, t + 1] = pos
        return traj, masks, inner

    def _costs(self, P, traj):
        err = traj[:, 1:] - self.goal
        return np.sum(err**2, axis=(1, 2)) + self.action_weight * np.sum(P**2, axis=(1, 2))

    def batched_cost(self, s0, candidates):
        P = np.asarray(candidates, dtype=float)
        traj, _, _ = self._rollout(s0, P)
        return self._costs(P, traj)

    def batched_cost_and_grad(self, s0, candidates):
        P = np.asarray(candidates, dtype=float)
        N, H, _ = P.shape
        traj, masks, inner = self._rollout(s0, P)
        costs = self._costs(P, traj)
        grad = np.empty_like(P)
        adj = np.zeros((N, 2))
        for t in range(H - 1, -1, -1):
            adj = (adj + 2.0 * (traj[:, t + 1] - self.goal)) * inner[:, t]
            grad[:, t] = masks[:, t] * (adj @ MOVES.T) + 2.0 * self.action_weight * P[:, t]
        return costs, grad

    def cost_and_grad(self, s0, A):
        c, g = self.batched_cost_and_grad(s0, np.asarray(A, dtype=float)[None])
        return float(c[0]), g[0]

    def constraints_and_jac(self, s0, A):
        return action_norm_constraints(A, self.a_max)
