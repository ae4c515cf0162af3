"""Point mass in the unit square split by a vertical wall with a door.

State layout: ``(x, y, vx, vy)``. Actions: accelerations in ``[-1, 1]^2``.
"""

from __future__ import annotations

import numpy as np

from ..core import ContinuousActionSpace, CostModel, action_norm_constraints
from .base import World, register
from .variation import Constraint, FactorSpec, VariationSpace

WALL_X = 0.5
WALL_GAP = 1e-3
SUCCESS_RADIUS = 0.05
ROOM_MARGIN = 0.05
DOOR_INSET = 0.02


def _opposite_rooms(v) -> bool:
    sx, gx = v["agent.start"][0], v["goal.position"][0]
    return (
        (sx - WALL_X) * (gx - WALL_X) < 0
        and abs(sx - WALL_X) >= ROOM_MARGIN
        and abs(gx - WALL_X) >= ROOM_MARGIN
    )


def route_distance(pos, goal, door_center: float, door_width: float) -> np.ndarray:
    """Shortest path length from each row of ``pos`` to ``goal`` inside the
    unit square, passing through the door when the two are in different rooms.

    The door is shrunk slightly at both ends so routes do not graze the
    wall corners.
    """
    pos = np.asarray(pos, dtype=float)
    goal = np.asarray(goal, dtype=float)
    direct = np.linalg.norm(pos - goal, axis=-1)
    split = (pos[..., 0] - WALL_X) * (goal[0] - WALL_X) < 0
    if not np.any(split):
        return direct
    inset = min(DOOR_INSET, 0.25 * door_width)
    lo = door_center - 0.5 * door_width + inset
    hi = door_center + 0.5 * door_width - inset
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = (WALL_X - pos[..., 0]) / (goal[0] - pos[..., 0])
    y_cross = pos[..., 1] + frac * (goal[1] - pos[..., 1])
    door_y = np.clip(y_cross, lo, hi)
    via = np.hypot(pos[..., 0] - WALL_X, pos[..., 1] - door_y) + np.hypot(goal[0] - WALL_X, goal[1] - door_y)
    return np.where(split, via, direct)


def tworoom_dynamics(pos, vel, action, params, walls: bool = True):
    """One semi-implicit Euler step for a batch: ``pos, vel, action`` are ``(B, 2)``.

    ``params`` needs ``dt, drag, v_max, door_center, door_width``.
    """
    dt, drag, vmax = params["dt"], params["drag"], params["v_max"]
    a = np.clip(action, -1.0, 1.0)
    v = np.clip((1.0 - drag) * vel + dt * a, -vmax, vmax)
    p = pos + dt * v
    if walls:
        x0, x1 = pos[:, 0] - WALL_X, p[:, 0] - WALL_X
        crossing = ((x0 < 0) & (x1 >= 0)) | ((x0 > 0) & (x1 <= 0))
        if crossing.any():
            with np.errstate(divide="ignore", invalid="ignore"):
                frac = np.where(crossing, -x0 / (x1 - x0), 0.0)
            y_cross = pos[:, 1] + frac * (p[:, 1] - pos[:, 1])
            in_door = np.abs(y_cross - params["door_center"]) <= 0.5 * params["door_width"]
            blocked = crossing & ~in_door
            if blocked.any():
                p = p.copy()
                v = v.copy()
                p[blocked, 0] = np.where(x0[blocked] < 0, WALL_X - WALL_GAP, WALL_X + WALL_GAP)
                v[blocked, 0] = 0.0
    low, high = WALL_GAP, 1.0 - WALL_GAP
    out = (p < low) | (p > high)
    if out.any():
        p = np.clip(p, low, high)
        v = np.where(out, 0.0, v)
    return p, v


@register("tworoom")
class TwoRoom(World):
    state_dim = 4
    max_steps = 200
    task_keys = ("agent.start", "goal.position")

    def variation_space(self) -> VariationSpace:
        return VariationSpace(
            [
                FactorSpec("agent.start", "box", np.array([0.25, 0.5]), low=[0.05, 0.05], high=[0.95, 0.95],
                           description="initial position"),
                FactorSpec("goal.position", "box", np.array([0.75, 0.5]), low=[0.05, 0.05], high=[0.95, 0.95],
                           description="goal position"),
                FactorSpec("door.center", "box", 0.5, low=0.3, high=0.7, description="door centre (y)"),
                FactorSpec("door.width", "box", 0.3, low=0.15, high=0.4, description="door opening (y extent)"),
                FactorSpec("physics.dt", "box", 0.1, low=0.05, high=0.15, description="integration step"),
                FactorSpec("physics.drag", "box", 0.05, low=0.0, high=0.3, description="velocity drag per step"),
                FactorSpec("physics.v_max", "box", 0.5, low=0.3, high=1.0, description="speed limit per axis"),
            ],
            constraints=[Constraint("start and goal in different rooms",
                                    ("agent.start", "goal.position"), _opposite_rooms)],
        )

    def _configure(self, values):
        self.params = {
            "dt": values["physics.dt"],
            "drag": values["physics.drag"],
            "v_max": values["physics.v_max"],
            "door_center": values["door.center"],
            "door_width": values["door.width"],
        }
        start = np.concatenate([values["agent.start"], [0.0, 0.0]])
        goal = np.concatenate([values["goal.position"], [0.0, 0.0]])
        return start, goal

    @property
    def action_space(self):
        return ContinuousActionSpace.box(2)

    def _transition(self, state, action):
        a = np.asarray(action, dtype=float).reshape(1, 2)
        p, v = tworoom_dynamics(state[None, :2], state[None, 2:], a, self.params)
        return np.concatenate([p[0], v[0]])

    def success(self, state, goal) -> bool:
        return bool(np.linalg.norm(np.asarray(state)[:2] - np.asarray(goal)[:2]) <= SUCCESS_RADIUS)

    @staticmethod
    def room(x) -> int:
        return 0 if x < WALL_X else 1

    def cost_model(self, goal=None, free: bool = False, action_weight: float = 0.01,
                   a_max: float = 1.0, metric: str = "route"):
        """Walled rollout cost by default; ``free=True`` gives the wall-free
        differentiable surrogate (always Euclidean)."""
        goal = self.goal if goal is None else np.asarray(goal, dtype=float)
        if free:
            return PointMassCost(dict(self.params), goal, action_weight, a_max, metric="euclidean")
        return TwoRoomCost(dict(self.params), goal, action_weight, a_max, metric=metric)


class TwoRoomCost(CostModel):
    """Rollout cost on the true walled dynamics; not differentiable.

    ``metric="route"`` measures goal distance along the shortest path through
    the door, which removes the dead end of pressing against the wall on the
    straight line to a goal in the other room. ``metric="euclidean"`` uses the
    straight-line distance.
    """

    def __init__(self, params, goal, action_weight=0.01, a_max=1.0, metric: str = "route"):
        if metric not in ("route", "euclidean"):
            raise ValueError(f"unknown metric {metric!r}")
        self.params = params
        self.goal = np.asarray(goal, dtype=float)
        if self.goal.shape != (4,):
            raise ValueError("two-room goals are 4-vectors (x, y, vx, vy)")
        self.metric = metric
        self.action_weight = action_weight
        self.a_max = a_max
        self.action_space = ContinuousActionSpace.box(2)

    def rollout(self, s0, candidates):
        A = np.asarray(candidates, dtype=float)
        N, H, _ = A.shape
        pos = np.repeat(np.asarray(s0, dtype=float)[None, :2], N, axis=0)
        vel = np.repeat(np.asarray(s0, dtype=float)[None, 2:], N, axis=0)
        out = np.empty((N, H, 4))
        for t in range(H):
            pos, vel = tworoom_dynamics(pos, vel, A[:, t], self.params, walls=True)
            out[:, t, :2] = pos
            out[:, t, 2:] = vel
        return out

    def batched_cost(self, s0, candidates):
        A = np.clip(np.asarray(candidates, dtype=float), -1.0, 1.0)
        traj = self.rollout(s0, A)
        if self.metric == "route":
            d = route_distance(traj[..., :2], self.goal[:2], self.params["door_center"],
                               self.params["door_width"])
            dist = np.sum(d**2, axis=1)
        else:
            dist = np.sum((traj[..., :2] - self.goal[:2]) ** 2, axis=(1, 2))
        return dist + self.action_weight * np.sum(A**2, axis=(1, 2))

    def constraints_and_jac(self, s0, A):
        return action_norm_constraints(A, self.a_max)


class PointMassCost(TwoRoomCost):
    """Wall-free, unclipped point mass: the rollout is affine in the actions,
    so the cost is a convex quadratic with an exact adjoint gradient."""

    def _matrices(self):
        dt, k = self.params["dt"], self.params["drag"]
        F = np.eye(4)
        F[0, 2] = F[1, 3] = dt * (1.0 - k)
        F[2, 2] = F[3, 3] = 1.0 - k
        G = np.zeros((4, 2))
        G[0, 0] = G[1, 1] = dt * dt
        G[2, 0] = G[3, 1] = dt
        return F, G

    def predict(self, states, actions):
        F, G = self._matrices()
        return np.asarray(states, dtype=float) @ F.T + np.asarray(actions, dtype=float) @ G.T

    def action_jacobian(self, states, actions):
        _, G = self._matrices()
        return np.broadcast_to(G, (np.shape(states)[0],) + G.shape).copy()

    def state_jacobian(self, states, actions):
        F, _ = self._matrices()
        return np.broadcast_to(F, (np.shape(states)[0],) + F.shape).copy()

    def rollout(self, s0, candidates):
        A = np.asarray(candidates, dtype=float)
        N, H, _ = A.shape
        F, G = self._matrices()
        x = np.repeat(np.asarray(s0, dtype=float)[None], N, axis=0)
        out = np.empty((N, H, 4))
        for t in range(H):
            x = x @ F.T + A[:, t] @ G.T
            out[:, t] = x
        return out

    def batched_cost(self, s0, candidates):
        A = np.asarray(candidates, dtype=float)
        traj = self.rollout(s0, A)
        dist = np.sum((traj[..., :2] - self.goal[:2]) ** 2, axis=(1, 2))
        return dist + self.action_weight * np.sum(A**2, axis=(1, 2))

    def batched_cost_and_grad(self, s0, candidates):
        A = np.asarray(candidates, dtype=float)
        N, H, _ = A.shape
        F, G = self._matrices()
        traj = self.rollout(s0, A)
        err = traj[..., :2] - self.goal[:2]
        costs = np.sum(err**2, axis=(1, 2)) + self.action_weight * np.sum(A**2, axis=(1, 2))
        grad = np.empty_like(A)
        adj = np.zeros((N, 4))
        for t in range(H - 1, -1, -1):
            adj[:, :2] += 2.0 * err[:, t]
            grad[:, t] = adj @ G + 2.0 * self.action_weight * A[:, t]
            adj = adj @ F
        return costs, grad

    def cost_and_grad(self, s0, A):
        c, g = self.batched_cost_and_grad(s0, np.asarray(A, dtype=float)[None])
        return float(c[0]), g[0]
