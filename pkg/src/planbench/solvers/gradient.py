"""First-order solvers: gradient descent, projected gradient descent on the
simplex, and the augmented-Lagrangian solver for inequality constraints."""

from __future__ import annotations

import time
from typing import Callable

import numpy as np

from ..core import (
    ConfigurationError,
    ContractError,
    CostModel,
    DiscreteActionSpace,
    SolverError,
    SolverResult,
    one_hot,
)
from ..rng import RandomStream
from . import _common as C
from .config import GradientSolverConfig, LagrangianConfig
from .simplex import project_simplex


def _require_grad(model: CostModel):
    if not model.differentiable:
        raise ConfigurationError(
            f"{type(model).__name__} has no gradient; wrap it in FiniteDifferenceModel"
        )


def clip_gradient_norm(grads, max_norm: float) -> np.ndarray:
    """Rescale each candidate's gradient to global norm at most ``max_norm``."""
    if max_norm <= 0:
        return grads
    norms = np.sqrt(np.sum(grads**2, axis=tuple(range(1, grads.ndim)), keepdims=True))
    scale = np.minimum(1.0, max_norm / np.maximum(norms, 1e-300))
    return grads * scale


def _grads(model, s0, A, k: int):
    costs, grads = model.batched_cost_and_grad(s0, A)
    grads = np.asarray(grads, dtype=float)
    if not np.all(np.isfinite(grads)):
        raise SolverError(f"non-finite gradient at iteration {k}")
    return np.asarray(costs, dtype=float), grads


def init_candidates(rng, base, N: int, scale: float, space) -> np.ndarray:
    """Candidate 0 is ``base``; the rest are Gaussian perturbations of it."""
    H, d = base.shape
    return C.clip(base + scale * C.perturbations(rng, N, H, d), space)


def gd_solve(
    model: CostModel,
    s0,
    cfg: GradientSolverConfig,
    init=None,
    *,
    space=None,
    rng: RandomStream | None = None,
    callback: Callable | None = None,
) -> SolverResult:
    t0 = time.perf_counter()
    _require_grad(model)
    space = C.resolve_space(model, space)
    rng = C.default_rng(rng)
    H, N = cfg.horizon, cfg.num_candidates
    d = C.action_dim(space, init)
    A = init_candidates(rng, C.initial_sequence(init, H, d), N, cfg.init_scale, space)
    for k in range(cfg.iterations):
        _, g = _grads(model, s0, A, k)
        A = A - cfg.step_size * clip_gradient_norm(g, cfg.gradient_clip)
        if cfg.action_noise > 0:
            A = A + cfg.action_noise * rng.normal(A.shape)
        A = C.clip(A, space)
        if callback is not None:
            callback(k, A)
    costs = C.evaluate(model, s0, A)
    i = int(np.argmin(costs))
    return SolverResult(
        A[i], float(costs[i]), cfg.iterations, N * (cfg.iterations + 1), time.perf_counter() - t0,
        extras={"candidates": A, "costs": costs},
    )


def pgd_solve(
    model: CostModel,
    s0,
    space: DiscreteActionSpace,
    cfg: GradientSolverConfig,
    init=None,
    *,
    rng: RandomStream | None = None,
    callback: Callable | None = None,
) -> SolverResult:
    """Gradient descent on per-step action distributions, projected onto the
    simplex after every step and decoded by row-wise argmax.

    ``init`` is an optional sequence of action indices or an ``(H, K)``
    matrix of per-step distributions. The returned
    ``best_sequence`` is one-hot; ``extras["relaxed"]`` holds the optimised
    distributions of the winning candidate.
    """
    if not isinstance(space, DiscreteActionSpace):
        raise ContractError("PGD needs a discrete action space")
    t0 = time.perf_counter()
    _require_grad(model)
    rng = C.default_rng(rng)
    H, N, K = cfg.horizon, cfg.num_candidates, space.cardinality
    if init is None:
        base = np.full((H, K), 1.0 / K)
    elif np.ndim(init) == 2:
        base = np.asarray(init, dtype=float)
        if base.shape != (H, K):
            raise ContractError(f"init distributions must have shape {(H, K)}")
        base = project_simplex(base)
    else:
        init = np.asarray(init, dtype=int)
        if init.shape != (H,):
            raise ContractError(f"init must be {H} action indices or an {(H, K)} matrix")
        base = one_hot(init, K)
    P = np.empty((N, H, K))
    P[0] = base
    if N > 1:
        P[1:] = project_simplex(base + cfg.init_scale * rng.normal((N - 1, H, K)))
    for k in range(cfg.iterations):
        _, g = _grads(model, s0, P, k)
        step = P - cfg.step_size * clip_gradient_norm(g, cfg.gradient_clip)
        if cfg.action_noise > 0:
            step = step + cfg.action_noise * rng.normal(P.shape)
        P = project_simplex(step)
        if callback is not None:
            callback(k, P)
    costs = C.evaluate(model, s0, P)
    i = int(np.argmin(costs))
    actions = np.argmax(P[i], axis=-1)
    seq = one_hot(actions, K)
    best = model.cost(s0, seq)
    return SolverResult(
        seq, best, cfg.iterations, N * (cfg.iterations + 1) + 1, time.perf_counter() - t0,
        extras={"actions": actions, "relaxed": P[i], "relaxed_cost": float(costs[i])},
    )


def _constraints(model, s0, A):
    G, dG = model.batched_constraints_and_jac(s0, A)
    G = np.asarray(G, dtype=float)
    dG = np.asarray(dG, dtype=float)
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(dG))):
        raise SolverError("non-finite constraint value")
    return G, dG


def lagrangian_solve(
    model: CostModel,
    s0,
    cfg: LagrangianConfig,
    init=None,
    *,
    space=None,
    rng: RandomStream | None = None,
    callback: Callable | None = None,
) -> SolverResult:
    """Minimise ``J`` subject to ``g_j(s0, A) <= 0`` by an augmented Lagrangian.

    Inner loop: ``K`` gradient steps on ``J + lam . g + rho * ||[g]_+||^2``
    for every candidate. Outer loop: ``lam <- [lam + rho * mean_i g_i]_+``
    and ``rho <- min(rho_max, rho_scale * rho)``. The final pick is the
    candidate with the lowest raw ``J``. ``callback(l, lam, rho)`` runs after
    every outer update.
    """
    t0 = time.perf_counter()
    _require_grad(model)
    if not model.constrained:
        raise ConfigurationError(f"{type(model).__name__} exposes no constraints")
    space = C.resolve_space(model, space)
    rng = C.default_rng(rng)
    base = cfg.base
    H, N = base.horizon, base.num_candidates
    d = C.action_dim(space, init)
    A = init_candidates(rng, C.initial_sequence(init, H, d), N, base.init_scale, space)
    lam = None
    rho = cfg.penalty_init
    history = []
    for outer in range(cfg.outer_iterations):
        for k in range(base.iterations):
            _, g = _grads(model, s0, A, outer * base.iterations + k)
            G, dG = _constraints(model, s0, A)
            if lam is None:
                lam = np.zeros(G.shape[1])
            weight = lam + 2.0 * rho * np.maximum(G, 0.0)  # (N, m)
            g = g + np.einsum("nm,nmhd->nhd", weight, dG)
            A = A - base.step_size * clip_gradient_norm(g, base.gradient_clip)
            if base.action_noise > 0:
                A = A + base.action_noise * rng.normal(A.shape)
            A = C.clip(A, space)
        G, _ = _constraints(model, s0, A)
        if lam is None:
            lam = np.zeros(G.shape[1])
        lam = np.maximum(lam + rho * G.mean(axis=0), 0.0)
        rho = min(cfg.penalty_max, cfg.penalty_scale * rho)
        history.append(lam.copy())
        if callback is not None:
            callback(outer, lam, rho)
    costs = C.evaluate(model, s0, A)
    i = int(np.argmin(costs))
    iters = cfg.outer_iterations * base.iterations
    return SolverResult(
        A[i], float(costs[i]), iters, N * (iters + 1), time.perf_counter() - t0,
        extras={"multipliers": lam, "multiplier_history": history, "penalty": rho,
                "max_violation": float(np.max(G[i]))},
    )
