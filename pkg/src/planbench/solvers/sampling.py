"""Zeroth-order solvers: predictive sampling, CEM, MPPI, iCEM and categorical CEM."""

from __future__ import annotations

import time

import numpy as np

from ..core import ContractError, CostModel, DiscreteActionSpace, SolverResult, one_hot
from ..noise import ColoredNoiseSpec, gumbel_max_sample, sample_colored
from ..rng import RandomStream
from . import _common as C
from .config import SamplingSolverConfig


def predictive_sampling_solve(
    model: CostModel,
    s0,
    cfg: SamplingSolverConfig,
    nominal=None,
    *,
    space=None,
    rng: RandomStream | None = None,
) -> SolverResult:
    """Single pass of random search around a nominal sequence.

    Candidate 0 is the nominal itself, so the result is never worse than it.
    """
    t0 = time.perf_counter()
    space = C.resolve_space(model, space)
    rng = C.default_rng(rng)
    H, N = cfg.horizon, cfg.num_candidates
    d = C.action_dim(space, nominal)
    base = C.initial_sequence(nominal, H, d)
    A = C.clip(base + cfg.init_scale * C.perturbations(rng, N, H, d), space)
    costs = C.evaluate(model, s0, A)
    i = int(np.argmin(costs))
    return SolverResult(A[i], float(costs[i]), 1, N, time.perf_counter() - t0)


def cem_solve(
    model: CostModel,
    s0,
    cfg: SamplingSolverConfig,
    init=None,
    *,
    space=None,
    rng: RandomStream | None = None,
) -> SolverResult:
    t0 = time.perf_counter()
    space = C.resolve_space(model, space)
    rng = C.default_rng(rng)
    H, N, E = cfg.horizon, cfg.num_candidates, cfg.num_elites
    d = C.action_dim(space, init)
    mu = C.initial_sequence(init, H, d)
    sigma = np.full((H, d), float(cfg.init_scale))
    # a zero initial scale is a request for a deterministic run, so no floor
    floor = cfg.var_floor if cfg.init_scale > 0 else 0.0
    for _ in range(cfg.iterations):
        A = C.clip(mu + sigma * C.perturbations(rng, N, H, d), space)
        costs = C.evaluate(model, s0, A)
        mu, sigma = C.fit_elites(A[C.elite_indices(costs, E)], floor)
    mu = C.clip(mu, space)
    best = model.cost(s0, mu)
    return SolverResult(
        mu, best, cfg.iterations, N * cfg.iterations + 1, time.perf_counter() - t0,
        extras={"sigma": sigma},
    )


def mppi_weights(costs, temperature: float) -> np.ndarray:
    """Soft-min weights ``exp(-(C_i - C_min) / lambda)``, normalised."""
    costs = np.asarray(costs, dtype=float)
    w = np.exp(-(costs - costs.min()) / temperature)
    return w / w.sum()


def mppi_solve(
    model: CostModel,
    s0,
    cfg: SamplingSolverConfig,
    init=None,
    *,
    space=None,
    rng: RandomStream | None = None,
) -> SolverResult:
    """MPPI with a fixed sampling scale, weighting only the ``E`` best samples.

    ``num_elites == num_candidates`` is classic MPPI.
    """
    t0 = time.perf_counter()
    space = C.resolve_space(model, space)
    rng = C.default_rng(rng)
    H, N, E = cfg.horizon, cfg.num_candidates, cfg.num_elites
    d = C.action_dim(space, init)
    mu = C.initial_sequence(init, H, d)
    for _ in range(cfg.iterations):
        A = C.clip(mu + cfg.init_scale * C.perturbations(rng, N, H, d), space)
        costs = C.evaluate(model, s0, A)
        top = C.elite_indices(costs, E)
        w = mppi_weights(costs[top], cfg.temperature)
        ref = A[top[0]]
        mu = ref + np.tensordot(w, A[top] - ref, axes=1)
    best = model.cost(s0, mu)
    return SolverResult(mu, best, cfg.iterations, N * cfg.iterations + 1, time.perf_counter() - t0)


def icem_solve(
    model: CostModel,
    s0,
    cfg: SamplingSolverConfig,
    init=None,
    *,
    space=None,
    rng: RandomStream | None = None,
) -> SolverResult:
    """CEM with colored-noise sampling, elite retention and momentum.

    ``extras["best_elite_costs"]`` holds the lowest cost of each iteration.
    """
    t0 = time.perf_counter()
    space = C.resolve_space(model, space)
    rng = C.default_rng(rng)
    H, N, E = cfg.horizon, cfg.num_candidates, cfg.num_elites
    d = C.action_dim(space, init)
    alpha = cfg.momentum
    mu = C.initial_sequence(init, H, d)
    sigma = np.full((H, d), float(cfg.init_scale))
    floor = cfg.var_floor if cfg.init_scale > 0 else 0.0
    spec = ColoredNoiseSpec(cfg.noise_beta, H, d)
    kept = np.empty((0, H, d))
    history = []
    for it in range(cfg.iterations):
        xi = np.zeros((N, H, d))
        if N > 1:
            xi[1:] = sample_colored(rng, spec, N - 1)
        A = mu + sigma * xi
        if it > 0:
            r = min(cfg.elites_keep, len(kept), N - 1)
            A[1 : 1 + r] = kept[:r]
        A = C.clip(A, space)
        costs = C.evaluate(model, s0, A)
        idx = C.elite_indices(costs, E)
        history.append(float(costs[idx[0]]))
        kept = A[idx]
        mu_hat, sigma_hat = C.fit_elites(kept, floor)
        mu = alpha * mu + (1.0 - alpha) * mu_hat
        sigma = alpha * sigma + (1.0 - alpha) * sigma_hat
    mu = C.clip(mu, space)
    best = model.cost(s0, mu)
    return SolverResult(
        mu, best, cfg.iterations, N * cfg.iterations + 1, time.perf_counter() - t0,
        extras={"best_elite_costs": history, "sigma": sigma},
    )


def refit_categorical(elite_actions, K: int, smoothing: float = 0.0) -> np.ndarray:
    """Per-step elite frequencies ``(H, K)`` from elite index rows ``(E, H)``."""
    freq = one_hot(elite_actions, K).mean(axis=0)
    if smoothing > 0:
        freq = (freq + smoothing) / (1.0 + K * smoothing)
    return freq


def categorical_cem_solve(
    model: CostModel,
    s0,
    space: DiscreteActionSpace,
    cfg: SamplingSolverConfig,
    *,
    rng: RandomStream | None = None,
) -> SolverResult:
    """CEM over independent per-step categoricals.

    Candidates are passed to the model as one-hot ``(N, H, K)`` stacks. The
    returned sequence is one-hot; ``extras["actions"]`` has the indices and
    ``extras["probs"]`` the final distribution.
    """
    if not isinstance(space, DiscreteActionSpace):
        raise ContractError("categorical CEM needs a discrete action space")
    t0 = time.perf_counter()
    rng = C.default_rng(rng)
    H, N, E, K = cfg.horizon, cfg.num_candidates, cfg.num_elites, space.cardinality
    alpha = cfg.momentum
    pi = np.full((H, K), 1.0 / K)
    for _ in range(cfg.iterations):
        idx = gumbel_max_sample(rng, pi, N)
        idx[0] = np.argmax(pi, axis=-1)
        costs = C.evaluate(model, s0, one_hot(idx, K))
        elites = idx[C.elite_indices(costs, E)]
        pi = alpha * pi + (1.0 - alpha) * refit_categorical(elites, K, cfg.smoothing)
    actions = np.argmax(pi, axis=-1)
    seq = one_hot(actions, K)
    best = model.cost(s0, seq)
    return SolverResult(
        seq, best, cfg.iterations, N * cfg.iterations + 1, time.perf_counter() - t0,
        extras={"actions": actions, "probs": pi},
    )
