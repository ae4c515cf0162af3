from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import ContractError


@dataclass
class SamplingSolverConfig:
    """Hyper-parameters shared by the sampling solvers.

    Fields that a solver does not use are ignored by it (``temperature`` is
    MPPI only, ``noise_beta``/``elites_keep`` iCEM only, ``smoothing``
    categorical CEM only, ``momentum`` iCEM and categorical CEM).
    """

    horizon: int
    num_candidates: int = 300
    iterations: int = 30
    num_elites: int = 30
    init_scale: float = 1.0
    temperature: float = 1.0
    noise_beta: float = 2.0
    momentum: float = 0.1
    elites_keep: int = 0
    smoothing: float = 0.0
    var_floor: float = 1e-6

    def __post_init__(self):
        if self.horizon < 1:
            raise ContractError("horizon must be >= 1")
        if self.num_candidates < 1:
            raise ContractError("num_candidates must be >= 1")
        if self.iterations < 1:
            raise ContractError("iterations must be >= 1")
        if not 1 <= self.num_elites <= self.num_candidates:
            raise ContractError("need 1 <= num_elites <= num_candidates")
        if self.init_scale < 0:
            raise ContractError("init_scale must be >= 0")
        if self.temperature <= 0:
            raise ContractError("temperature must be > 0")
        if not 0.0 <= self.momentum <= 1.0:
            raise ContractError("momentum must lie in [0, 1]")
        if not 0 <= self.elites_keep <= self.num_elites:
            raise ContractError("need 0 <= elites_keep <= num_elites")
        if self.smoothing < 0:
            raise ContractError("smoothing must be >= 0")


@dataclass
class GradientSolverConfig:
    horizon: int
    num_candidates: int = 1
    iterations: int = 100
    step_size: float = 0.1
    init_scale: float = 0.0
    action_noise: float = 0.0
    gradient_clip: float = 0.0

    def __post_init__(self):
        if self.horizon < 1:
            raise ContractError("horizon must be >= 1")
        if self.num_candidates < 1:
            raise ContractError("num_candidates must be >= 1")
        if self.iterations < 0:
            raise ContractError("iterations must be >= 0")
        if self.step_size <= 0:
            raise ContractError("step_size must be > 0")
        if self.init_scale < 0 or self.action_noise < 0 or self.gradient_clip < 0:
            raise ContractError("init_scale, action_noise and gradient_clip must be >= 0")


@dataclass
class LagrangianConfig:
    base: GradientSolverConfig
    outer_iterations: int = 10
    penalty_init: float = 1.0
    penalty_max: float = 1e3
    penalty_scale: float = 2.0

    def __post_init__(self):
        if self.outer_iterations < 1:
            raise ContractError("outer_iterations must be >= 1")
        if self.penalty_init <= 0:
            raise ContractError("penalty_init must be > 0")
        if self.penalty_max < self.penalty_init:
            raise ContractError("penalty_max must be >= penalty_init")
        if self.penalty_scale < 1:
            raise ContractError("penalty_scale must be >= 1")


@dataclass
class GraspConfig:
    horizon: int
    iterations: int = 100
    action_step: float = 1.0
    state_step: float = 0.1
    goal_weights: np.ndarray | None = None
    state_noise: np.ndarray | None = None
    sync_interval: int = 10
    sync_iterations: int = 3
    sync_candidates: int = 100
    sync_elites: int = 10
    sync_scale: float = 0.3

    def __post_init__(self):
        if self.horizon < 2:
            raise ContractError("GRASP needs a horizon of at least 2")
        if self.iterations < 0 or self.sync_interval < 0:
            raise ContractError("iterations and sync_interval must be >= 0")
        if self.action_step <= 0 or self.state_step <= 0:
            raise ContractError("step sizes must be > 0")
        K = self.iterations
        if self.goal_weights is None:
            self.goal_weights = np.full(K, 0.1)
        if self.state_noise is None:
            self.state_noise = np.zeros(K)
        self.goal_weights = np.asarray(self.goal_weights, dtype=float)
        self.state_noise = np.asarray(self.state_noise, dtype=float)
        if self.goal_weights.shape != (K,) or self.state_noise.shape != (K,):
            raise ContractError("goal_weights and state_noise schedules must have length K")
        if np.any(self.goal_weights < 0) or np.any(self.state_noise < 0):
            raise ContractError("schedules must be non-negative")
