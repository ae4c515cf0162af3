"""Closed-form cost models with known optima, for checking solvers."""

from __future__ import annotations

import numpy as np

from .core import ContinuousActionSpace, CostModel, action_norm_constraints


class QuadraticCost(CostModel):
    """``J(A) = sum_t ||a_t - c||^2``, independent of the state.

    With ``action_limit`` set, exposes ``||a_t||^2 - limit^2 <= 0`` per step;
    with ``constant_constraint`` set, exposes a single constraint fixed at
    that value (useful for an always-inactive constraint).
    """

    def __init__(self, center, dim: int = 1, bound: float = 1.0,
                 action_limit: float | None = None, constant_constraint: float | None = None):
        self.center = np.broadcast_to(np.asarray(center, dtype=float), (dim,)).copy()
        self.action_space = ContinuousActionSpace.box(dim, bound)
        self.action_limit = action_limit
        self.constant_constraint = constant_constraint

    def batched_cost(self, s0, candidates):
        A = np.asarray(candidates, dtype=float)
        return np.sum((A - self.center) ** 2, axis=(1, 2))

    def cost_and_grad(self, s0, A):
        A = np.asarray(A, dtype=float)
        diff = A - self.center
        return float(np.sum(diff**2)), 2.0 * diff

    def batched_cost_and_grad(self, s0, candidates):
        diff = np.asarray(candidates, dtype=float) - self.center
        return np.sum(diff**2, axis=(1, 2)), 2.0 * diff

    def constraints_and_jac(self, s0, A):
        A = np.asarray(A, dtype=float)
        if self.action_limit is not None:
            return action_norm_constraints(A, self.action_limit)
        if self.constant_constraint is not None:
            return np.array([self.constant_constraint]), np.zeros((1,) + A.shape)
        raise NotImplementedError("QuadraticCost built without constraints")

    @property
    def constrained(self):
        return self.action_limit is not None or self.constant_constraint is not None
