"""Torque-driven pendulum. State ``(theta, omega)``, scalar torque action.

Dynamics: ``omega' = omega + dt * ((g/l) sin(theta) + u/(m l^2) - b omega)``,
``theta' = wrap(theta + dt * omega')`` with ``wrap`` onto ``(-pi, pi]``.
The target is the rest state at ``theta = pi``.
"""

from __future__ import annotations

import numpy as np

from ..core import ContinuousActionSpace, CostModel, action_norm_constraints
from .base import World, register
from .variation import FactorSpec, VariationSpace

DT = 0.05
ANGLE_TOL = 0.1
SPEED_TOL = 1.0


def wrap_angle(theta):
    """Map angles onto ``(-pi, pi]``."""
    w = np.mod(np.asarray(theta, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


def pendulum_dynamics(theta, omega, u, p):
    acc = (p["g"] / p["l"]) * np.sin(theta) + u / (p["m"] * p["l"] ** 2) - p["b"] * omega
    omega = omega + DT * acc
    return wrap_angle(theta + DT * omega), omega


@register("pendulum")
class Pendulum(World):
    state_dim = 2
    max_steps = 200
    task_keys = ("agent.theta0",)

    def variation_space(self) -> VariationSpace:
        return VariationSpace([
            FactorSpec("physics.gravity", "box", 9.8, low=8.0, high=12.0, description="g"),
            FactorSpec("pole.length", "box", 1.0, low=0.5, high=1.5, description="l"),
            FactorSpec("pole.mass", "box", 1.0, low=0.5, high=2.0, description="m"),
            FactorSpec("physics.damping", "box", 0.1, low=0.0, high=0.5, description="b"),
            FactorSpec("actuator.u_max", "box", 2.0, low=1.0, high=3.0, description="torque limit"),
            FactorSpec("agent.theta0", "box", 0.0, low=-np.pi, high=np.pi, description="initial angle"),
        ])

    def _configure(self, values):
        self.params = {
            "g": values["physics.gravity"],
            "l": values["pole.length"],
            "m": values["pole.mass"],
            "b": values["physics.damping"],
            "u_max": values["actuator.u_max"],
        }
        start = np.array([float(wrap_angle(values["agent.theta0"])), 0.0])
        return start, np.array([np.pi, 0.0])

    @property
    def action_space(self):
        return ContinuousActionSpace.box(1, self.params["u_max"])

    def _transition(self, state, action):
        u = float(np.clip(np.asarray(action, dtype=float).reshape(-1)[0],
                          -self.params["u_max"], self.params["u_max"]))
        theta, omega = pendulum_dynamics(state[0], state[1], u, self.params)
        return np.array([float(theta), float(omega)])

    def success(self, state, goal) -> bool:
        return bool(abs(wrap_angle(state[0] - goal[0])) <= ANGLE_TOL and abs(state[1] - goal[1]) <= SPEED_TOL)

    def cost_model(self, goal=None, action_weight: float = 0.01, a_max: float | None = None):
        goal = self.goal if goal is None else np.asarray(goal, dtype=float)
        return PendulumCost(dict(self.params), goal, action_weight, a_max)


class PendulumCost(CostModel):
    """``J = sum_t ||e(theta_{t+1}) - e(theta_goal)||^2 + w u_t^2`` with the
    angle embedded as ``e(theta) = (sin theta, cos theta)``.

    Torques are clipped to the actuator limit as in the world; the analytic
    gradient is the chained step Jacobian and is zero where clipping is active.
    """

    def __init__(self, params, goal, action_weight=0.01, a_max=None):
        self.params = params
        self.goal = np.asarray(goal, dtype=float)
        if self.goal.shape != (2,):
            raise ValueError("pendulum goals are 2-vectors (theta, omega)")
        self.action_weight = action_weight
        self.a_max = params["u_max"] if a_max is None else a_max
        self.action_space = ContinuousActionSpace.box(1, params["u_max"])

    def _rollout(self, s0, A):
        N, H, _ = A.shape
        u = np.clip(A[..., 0], -self.params["u_max"], self.params["u_max"])
        theta = np.empty((N, H + 1))
        omega = np.empty((N, H + 1))
        theta[:, 0], omega[:, 0] = s0[0], s0[1]
        for t in range(H):
            theta[:, t + 1], omega[:, t + 1] = pendulum_dynamics(theta[:, t], omega[:, t], u[:, t], self.params)
        return u, theta, omega

    def _costs(self, u, theta):
        sg, cg = np.sin(self.goal[0]), np.cos(self.goal[0])
        th = theta[:, 1:]
        dist = (np.sin(th) - sg) ** 2 + (np.cos(th) - cg) ** 2
        return np.sum(dist, axis=1) + self.action_weight * np.sum(u**2, axis=1)

    def batched_cost(self, s0, candidates):
        A = np.asarray(candidates, dtype=float)
        u, theta, _ = self._rollout(np.asarray(s0, dtype=float), A)
        return self._costs(u, theta)

    def predict(self, states, actions):
        states = np.asarray(states, dtype=float)
        u = np.clip(np.asarray(actions, dtype=float)[..., 0], -self.params["u_max"], self.params["u_max"])
        theta, omega = pendulum_dynamics(states[..., 0], states[..., 1], u, self.params)
        return np.stack([theta, omega], axis=-1)

    def action_jacobian(self, states, actions):
        k = DT / (self.params["m"] * self.params["l"] ** 2)
        n = np.shape(states)[0]
        jac = np.zeros((n, 2, 1))
        jac[:, 0, 0] = DT * k
        jac[:, 1, 0] = k
        return jac

    def batched_cost_and_grad(self, s0, candidates):
        A = np.asarray(candidates, dtype=float)
        N, H, _ = A.shape
        p = self.params
        u, theta, omega = self._rollout(np.asarray(s0, dtype=float), A)
        costs = self._costs(u, theta)
        active = np.abs(A[..., 0]) < p["u_max"]
        sg, cg = np.sin(self.goal[0]), np.cos(self.goal[0])
        ku = DT / (p["m"] * p["l"] ** 2)
        damp = 1.0 - DT * p["b"]
        grad = np.zeros_like(A)
        adj_th = np.zeros(N)
        adj_om = np.zeros(N)
        for t in range(H - 1, -1, -1):
            th1 = theta[:, t + 1]
            # d/dtheta of (sin - sg)^2 + (cos - cg)^2
            adj_th = adj_th + 2.0 * ((np.sin(th1) - sg) * np.cos(th1) - (np.cos(th1) - cg) * np.sin(th1))
            # theta' = theta + DT * omega', so omega' feeds theta' with weight DT
            adj_om_new = adj_om + DT * adj_th
            grad[:, t, 0] = np.where(active[:, t], ku * adj_om_new, 0.0) + 2.0 * self.action_weight * u[:, t]
            dacc_dth = (p["g"] / p["l"]) * np.cos(theta[:, t])
            adj_th, adj_om = adj_th + DT * dacc_dth * adj_om_new, damp * adj_om_new
        return costs, grad

    def cost_and_grad(self, s0, A):
        c, g = self.batched_cost_and_grad(s0, np.asarray(A, dtype=float)[None])
        return float(c[0]), g[0]

    def constraints_and_jac(self, s0, A):
        return action_norm_constraints(A, self.a_max)
