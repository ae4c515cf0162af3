from __future__ import annotations

import numpy as np

from ..core import ContinuousActionSpace, ContractError, CostModel, SolverError, clip_to_bounds
from ..rng import RandomStream, make_rng


def resolve_space(model: CostModel, space):
    return space if space is not None else getattr(model, "action_space", None)


def action_dim(space, init, model=None) -> int:
    if init is not None:
        return np.asarray(init).shape[-1]
    if space is not None:
        return space.dim
    raise ContractError("cannot infer the action dimension: pass an action space or an init")


def initial_sequence(init, H: int, d: int) -> np.ndarray:
    if init is None:
        return np.zeros((H, d))
    init = np.array(init, dtype=float)
    if init.shape != (H, d):
        raise ContractError(f"init has shape {init.shape}, expected {(H, d)}")
    return init


def clip(A, space) -> np.ndarray:
    if isinstance(space, ContinuousActionSpace):
        return clip_to_bounds(A, space)
    return A


def default_rng(rng: RandomStream | None) -> RandomStream:
    return rng if rng is not None else make_rng(0)


def evaluate(model: CostModel, s0, batch) -> np.ndarray:
    """One batched cost call; non-finite costs rank last."""
    costs = np.asarray(model.batched_cost(s0, batch), dtype=float)
    if costs.shape != (len(batch),):
        raise SolverError(f"batched_cost returned shape {costs.shape}, expected ({len(batch)},)")
    finite = np.isfinite(costs)
    if not finite.any():
        raise SolverError("cost model returned non-finite cost for every candidate")
    return np.where(finite, costs, np.inf)


def elite_indices(costs, E: int) -> np.ndarray:
    # stable sort: equal costs keep candidate order, so ties go to the lowest index
    return np.argsort(costs, kind="stable")[:E]


def fit_elites(elites, floor: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean and population std of an elite stack ``(E, H, d)``."""
    # centre on the first elite so identical elites reproduce it bit-exactly
    mu = elites[0] + (elites - elites[0]).mean(axis=0)
    sigma = np.sqrt(np.mean((elites - mu) ** 2, axis=0))
    if floor > 0:
        sigma = np.maximum(sigma, floor)
    return mu, sigma


def perturbations(rng: RandomStream, N: int, H: int, d: int) -> np.ndarray:
    """``(N, H, d)`` standard normals with the first slot zeroed."""
    eps = np.zeros((N, H, d))
    if N > 1:
        eps[1:] = rng.normal((N - 1, H, d))
    return eps
