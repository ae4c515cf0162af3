"""Gradient planning over actions and intermediate virtual states."""

from __future__ import annotations

import time
from typing import Callable

import numpy as np

from ..core import ConfigurationError, CostModel, SolverResult
from ..rng import RandomStream
from . import _common as C
from .config import GraspConfig, SamplingSolverConfig
from .sampling import cem_solve


def cem_sync(iterations: int = 3, candidates: int = 100, elites: int = 10, scale: float = 0.3):
    """Sync operator: a short CEM run on the rollout cost, warm-started at ``A``."""

    def sync(model, s0, A, rng, space=None):
        cfg = SamplingSolverConfig(
            horizon=A.shape[0], num_candidates=candidates, iterations=iterations,
            num_elites=elites, init_scale=scale,
        )
        return cem_solve(model, s0, cfg, init=A, space=space, rng=rng).best_sequence

    return sync


def grasp_solve(
    model: CostModel,
    s0,
    s_goal,
    cfg: GraspConfig,
    init=None,
    *,
    sync: Callable | None = None,
    space=None,
    rng: RandomStream | None = None,
    callback: Callable | None = None,
) -> SolverResult:
    """Jointly optimise actions and virtual states ``z_1 .. z_{H-1}``.

    The model must provide ``predict(states, actions)`` and
    ``action_jacobian(states, actions)`` for batches over time. Each
    iteration minimises

        sum_t ||P(z_t, a_t) - z_{t+1}||^2 + gamma_k ||P(z_t, a_t) - s_goal||^2

    with ``z_t`` held constant inside ``P``, adds ``sigma_k`` Gaussian noise
    to the free states, and every ``sync_interval`` iterations hands the
    actions to ``sync(model, s0, A, rng, space)`` which re-optimises them on
    the full rollout cost. ``callback(k, z, A)`` sees every iterate.
    """
    t0 = time.perf_counter()
    if not (callable(getattr(model, "predict", None)) and callable(getattr(model, "action_jacobian", None))):
        raise ConfigurationError(
            f"{type(model).__name__} must expose predict() and action_jacobian() for GRASP"
        )
    space = C.resolve_space(model, space)
    rng = C.default_rng(rng)
    if sync is None:
        sync = cem_sync(cfg.sync_iterations, cfg.sync_candidates, cfg.sync_elites, cfg.sync_scale)
    s0 = np.asarray(s0, dtype=float)
    sg = np.asarray(s_goal, dtype=float)
    H = cfg.horizon
    d = C.action_dim(space, init)
    A = C.initial_sequence(init, H, d)

    frac = (np.arange(H + 1) / H)[:, None]
    z = (1.0 - frac) * s0 + frac * sg
    evals = 0
    for k in range(cfg.iterations):
        zhat = model.predict(z[:-1], A)
        jac = model.action_jacobian(z[:-1], A)  # (H, ds, d)
        gamma = cfg.goal_weights[k]
        r_state = zhat - z[1:]
        r_goal = zhat - sg
        grad_a = 2.0 * np.einsum("tsd,ts->td", jac, r_state + gamma * r_goal)
        # z_{t+1} only enters its own matching term; it is stop-gradient inside P
        grad_z = -2.0 * r_state[:-1]
        A = C.clip(A - cfg.action_step * grad_a, space)
        z[1:H] = z[1:H] - cfg.state_step * grad_z
        if cfg.state_noise[k] > 0:
            z[1:H] = z[1:H] + cfg.state_noise[k] * rng.normal(z[1:H].shape)
        if cfg.sync_interval > 0 and k > 0 and (k + 1) % cfg.sync_interval == 0:
            A = np.asarray(sync(model, s0, A, rng.split(k), space), dtype=float)
            evals += 1
        if callback is not None:
            callback(k, z.copy(), A.copy())
    best = model.cost(s0, A)
    return SolverResult(
        A, best, cfg.iterations, evals + 1, time.perf_counter() - t0,
        extras={"virtual_states": z},
    )
