"""Shared types: action spaces, the cost-model contract, solver results and
a finite-difference gradient adapter.

Action sequences are plain ``numpy`` arrays of shape ``(H, d)``; batches of
candidates are ``(N, H, d)``. In the relaxed discrete case ``d`` is the
number of actions and every row is a probability vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


class ContractError(ValueError):
    """An argument violates an operation's preconditions."""


class SolverError(RuntimeError):
    """A solver could not produce a valid result."""


class ConfigurationError(ValueError):
    """A component was combined with an incompatible model or config."""


class EpisodeError(RuntimeError):
    """A policy or world failed inside an episode; the message names it."""


@dataclass(frozen=True)
class ContinuousActionSpace:
    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        low = np.atleast_1d(np.asarray(self.low, dtype=float))
        high = np.atleast_1d(np.asarray(self.high, dtype=float))
        if low.shape != high.shape or low.ndim != 1:
            raise ContractError("low and high must be vectors of equal length")
        if not (np.all(np.isfinite(low)) and np.all(np.isfinite(high))):
            raise ContractError("action bounds must be finite")
        if np.any(low >= high):
            raise ContractError("every low bound must be strictly below its high bound")
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    @classmethod
    def box(cls, dim: int, bound: float = 1.0) -> "ContinuousActionSpace":
        return cls(-bound * np.ones(dim), bound * np.ones(dim))

    @property
    def dim(self) -> int:
        return self.low.shape[0]

    def contains(self, a) -> bool:
        a = np.asarray(a)
        return bool(np.all(a >= self.low) and np.all(a <= self.high))


@dataclass(frozen=True)
class DiscreteActionSpace:
    cardinality: int

    def __post_init__(self):
        if int(self.cardinality) < 2:
            raise ContractError("a discrete action space needs at least two actions")

    @property
    def dim(self) -> int:
        return self.cardinality

    def contains(self, a) -> bool:
        a = np.asarray(a)
        return bool(np.all((a >= 0) & (a < self.cardinality)))


def clip_to_bounds(A, space: ContinuousActionSpace) -> np.ndarray:
    """Clamp every entry of ``A`` (shape ``(..., d)``) into the box."""
    A = np.asarray(A, dtype=float)
    if A.shape[-1] != space.dim:
        raise ContractError(
            f"action dimension {A.shape[-1]} does not match space dimension {space.dim}"
        )
    return np.minimum(space.high, np.maximum(space.low, A))


def one_hot(indices, cardinality: int) -> np.ndarray:
    indices = np.asarray(indices, dtype=int)
    return np.eye(cardinality)[indices]


def decode_argmax(P) -> np.ndarray:
    """Row-wise argmax; ``np.argmax`` already returns the lowest index on ties."""
    return np.argmax(np.asarray(P), axis=-1)


class CostModel:
    """Trajectory cost ``J(s0, A)`` over a planning horizon.

    Subclasses must implement :meth:`batched_cost`. Gradient-based solvers
    additionally need :meth:`cost_and_grad` (or wrap the model in
    :class:`FiniteDifferenceModel`); the Lagrangian solver needs
    :meth:`constraints` with its Jacobian. Implementations must be pure:
    repeated calls with equal arguments return equal values.
    """

    action_space: ContinuousActionSpace | DiscreteActionSpace | None = None

    def batched_cost(self, s0, candidates) -> np.ndarray:
        raise NotImplementedError

    def cost(self, s0, A) -> float:
        return float(self.batched_cost(s0, np.asarray(A)[None])[0])

    def cost_and_grad(self, s0, A) -> tuple[float, np.ndarray]:
        raise NotImplementedError(f"{type(self).__name__} is not differentiable")

    def batched_cost_and_grad(self, s0, candidates) -> tuple[np.ndarray, np.ndarray]:
        out = [self.cost_and_grad(s0, A) for A in np.asarray(candidates)]
        return np.array([c for c, _ in out]), np.stack([g for _, g in out])

    def constraints_and_jac(self, s0, A) -> tuple[np.ndarray, np.ndarray]:
        """Constraint values ``g`` (feasible iff ``g <= 0``), shape ``(m,)``,
        and their Jacobian with respect to ``A``, shape ``(m, H, d)``."""
        raise NotImplementedError(f"{type(self).__name__} exposes no constraints")

    def constraints(self, s0, A) -> np.ndarray:
        return self.constraints_and_jac(s0, A)[0]

    def batched_constraints_and_jac(self, s0, candidates) -> tuple[np.ndarray, np.ndarray]:
        out = [self.constraints_and_jac(s0, A) for A in np.asarray(candidates)]
        return np.stack([g for g, _ in out]), np.stack([j for _, j in out])

    @property
    def differentiable(self) -> bool:
        return _overrides(self, "cost_and_grad") or _overrides(self, "batched_cost_and_grad")

    @property
    def constrained(self) -> bool:
        return _overrides(self, "constraints_and_jac")


def _overrides(obj, name: str) -> bool:
    return getattr(type(obj), name) is not getattr(CostModel, name)


def finite_difference_gradient(model: CostModel, s0, A, h: float = 1e-4) -> np.ndarray:
    """Central-difference estimate of ``dJ/dA``.

    All ``2 * H * d`` perturbed sequences are evaluated in one batched call.
    """
    if h <= 0:
        raise ContractError("finite-difference step must be positive")
    A = np.asarray(A, dtype=float)
    n = A.size
    eye = np.eye(n).reshape((n,) + A.shape)
    batch = np.concatenate([A + h * eye, A - h * eye])
    costs = np.asarray(model.batched_cost(s0, batch), dtype=float)
    if not np.all(np.isfinite(costs)):
        raise FloatingPointError("non-finite cost during finite differencing")
    return ((costs[:n] - costs[n:]) / (2.0 * h)).reshape(A.shape)


def action_norm_constraints(A, a_max: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-step constraints ``||a_t||^2 - a_max^2 <= 0`` and their Jacobian."""
    A = np.asarray(A, dtype=float)
    H, d = A.shape
    jac = np.zeros((H, H, d))
    jac[np.arange(H), np.arange(H)] = 2.0 * A
    return np.sum(A**2, axis=-1) - a_max**2, jac


class FiniteDifferenceModel(CostModel):
    """Gives any cost model a ``cost_and_grad`` via central differences.

    Constraints, if the base model has them, are passed through; a
    constraint-only base (values without Jacobian) is not supported.
    """

    def __init__(self, base: CostModel, h: float = 1e-4):
        self.base = base
        self.h = h
        self.action_space = base.action_space

    def batched_cost(self, s0, candidates):
        return self.base.batched_cost(s0, candidates)

    def cost_and_grad(self, s0, A):
        return self.base.cost(s0, A), finite_difference_gradient(self.base, s0, A, self.h)

    def constraints_and_jac(self, s0, A):
        return self.base.constraints_and_jac(s0, A)

    @property
    def constrained(self):
        return self.base.constrained

    def __getattr__(self, name):
        # dynamics hooks (predict, jacobians) of the wrapped model
        if name == "base":
            raise AttributeError(name)
        return getattr(self.base, name)


@dataclass
class SolverResult:
    best_sequence: np.ndarray
    best_cost: float
    iterations_run: int
    cost_evaluations: int
    wall_time: float
    extras: dict[str, Any] = field(default_factory=dict)
