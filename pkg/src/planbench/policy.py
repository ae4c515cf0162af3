"""Action-selection policies: uniform random, scripted experts and MPC.

A policy serves every slot of an environment pool. ``on_reset`` is called
once per episode with the slot's world and a per-episode random stream;
``get_action(info, slot)`` then returns one action for that slot.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .core import (
    ConfigurationError,
    ContinuousActionSpace,
    ContractError,
    DiscreteActionSpace,
    FiniteDifferenceModel,
    SolverError,
    clip_to_bounds,
)
from .rng import RandomStream, make_rng
from .solvers import (
    GradientSolverConfig,
    GraspConfig,
    LagrangianConfig,
    SamplingSolverConfig,
    categorical_cem_solve,
    cem_solve,
    gd_solve,
    grasp_solve,
    icem_solve,
    lagrangian_solve,
    mppi_solve,
    pgd_solve,
    predictive_sampling_solve,
)
from .worlds.gridworld import MOVES, GridWorld, bfs_distances
from .worlds.pendulum import Pendulum, wrap_angle
from .worlds.tworoom import WALL_X, TwoRoom


class Policy:
    def on_reset(self, env, slot: int = 0, rng: RandomStream | None = None, episode: int | None = None):
        pass

    def get_action(self, info: dict, slot: int = 0):
        raise NotImplementedError

    def get_actions(self, infos) -> list:
        """One action per environment; ``infos[i]`` belongs to slot ``i``."""
        return [self.get_action(info, slot) for slot, info in enumerate(infos)]


class RandomPolicy(Policy):
    """Uniform actions. Each slot draws from its own stream, replaced at every
    reset by the episode stream when one is supplied."""

    def __init__(self, space, seed: int = 0):
        self.space = space
        self.seed = seed
        self._streams: dict[int, RandomStream] = {}

    def on_reset(self, env, slot=0, rng=None, episode=None):
        self.space = env.action_space
        self._streams[slot] = rng if rng is not None else make_rng(self.seed).split(slot)

    def get_action(self, info, slot=0):
        rng = self._streams.get(slot)
        if rng is None:
            rng = self._streams[slot] = make_rng(self.seed).split(slot)
        if isinstance(self.space, DiscreteActionSpace):
            return int(rng.integers(self.space.cardinality))
        return rng.uniform(self.space.low, self.space.high)


def random_policy(rng_or_seed, space) -> RandomPolicy:
    seed = rng_or_seed.seed if isinstance(rng_or_seed, RandomStream) else int(rng_or_seed)
    return RandomPolicy(space, seed)


# -- scripted experts ----------------------------------------------------

class TwoRoomExpert(Policy):
    """Velocity tracking towards a waypoint: the near side of the door, then
    the far side, then the goal."""

    def __init__(self, cruise_fraction: float = 0.8, gain: float = 3.0, door_margin: float = 0.05,
                 approach: float = 0.05):
        self.cruise_fraction = cruise_fraction
        self.gain = gain
        self.door_margin = door_margin
        self.approach = approach
        self._envs: dict = {}

    def on_reset(self, env, slot=0, rng=None, episode=None):
        self._envs[slot] = env

    def target(self, pos, goal, params) -> tuple[np.ndarray, bool]:
        """Next waypoint and whether it is the final goal."""
        side, goal_side = np.sign(pos[0] - WALL_X), np.sign(goal[0] - WALL_X)
        if side == goal_side:
            return goal, True
        half = 0.5 * params["door_width"]
        margin = min(self.door_margin, 0.4 * half)
        door_y = float(np.clip(pos[1], params["door_center"] - half + margin,
                               params["door_center"] + half - margin))
        if abs(pos[1] - door_y) < 0.5 * margin and abs(pos[0] - WALL_X) < 2 * self.approach:
            return np.array([WALL_X + goal_side * self.approach, door_y]), False
        return np.array([WALL_X + side * self.approach, door_y]), False

    def get_action(self, info, slot=0):
        env = self._envs[slot]
        p = env.params
        state, goal = info["state"], info["goal"]
        pos, vel = state[:2], state[2:]
        target, final = self.target(pos, goal[:2], p)
        delta = target - pos
        dist = np.linalg.norm(delta)
        cruise = self.cruise_fraction * p["v_max"]
        speed = min(cruise, self.gain * dist) if final else cruise
        v_des = delta / dist * speed if dist > 1e-12 else np.zeros(2)
        a = (v_des - (1.0 - p["drag"]) * vel) / p["dt"]
        return np.clip(a, -1.0, 1.0)


class PendulumExpert(Policy):
    """Energy shaping towards the goal energy, then PD capture."""

    def __init__(self, capture: float = 0.6, kp: float = 8.0, kd: float = 4.0, k_energy: float = 2.0):
        self.capture = capture
        self.kp, self.kd, self.k_energy = kp, kd, k_energy
        self._envs: dict = {}

    def on_reset(self, env, slot=0, rng=None, episode=None):
        self._envs[slot] = env

    def get_action(self, info, slot=0):
        p = self._envs[slot].params
        theta, omega = info["state"]
        target = info["goal"][0]
        inertia = p["m"] * p["l"] ** 2
        err = float(wrap_angle(theta - target))
        if abs(err) < self.capture:
            u = inertia * (-self.kp * err - self.kd * omega)
        else:
            # energy of the passive system; its gradient field points at the goal
            energy = 0.5 * omega**2 + (p["g"] / p["l"]) * np.cos(theta)
            goal_energy = (p["g"] / p["l"]) * np.cos(target)
            if abs(omega) < 1e-3:
                u = p["u_max"] * (np.sign(-err) or 1.0)
            else:
                u = -self.k_energy * inertia * (energy - goal_energy) * np.sign(omega)
        return np.array([float(np.clip(u, -p["u_max"], p["u_max"]))])


class GridExpert(Policy):
    """Greedy descent on BFS distance; ties go to the lowest action index."""

    def __init__(self):
        self._dist: dict = {}
        self._envs: dict = {}

    def on_reset(self, env, slot=0, rng=None, episode=None):
        self._envs[slot] = env
        self._dist[slot] = (env.goal.copy(), env.distances_to_goal())

    def get_action(self, info, slot=0):
        env = self._envs[slot]
        goal, dist = self._dist[slot]
        if not np.array_equal(goal, info["goal"]):
            dist = bfs_distances(env.walls, info["goal"].astype(int))
            self._dist[slot] = (info["goal"].copy(), dist)
        cell = info["state"].astype(int)
        here = dist[cell[0], cell[1]]
        if here <= 0:
            return 4
        size = dist.shape[0]
        best, best_d = 4, here
        for a in range(4):
            nx, ny = cell + MOVES[a].astype(int)
            if 0 <= nx < size and 0 <= ny < size and 0 <= dist[nx, ny] < best_d:
                best, best_d = a, dist[nx, ny]
        return best


def expert_policy(world) -> Policy:
    """Scripted expert for one of the shipped worlds (instance or name)."""
    name = world if isinstance(world, str) else getattr(world, "name", None)
    experts = {TwoRoom.name: TwoRoomExpert, Pendulum.name: PendulumExpert, GridWorld.name: GridExpert}
    if name not in experts:
        raise ConfigurationError(f"no expert for world {name!r}")
    return experts[name]()


# -- model-predictive control ----------------------------------------------

@dataclass
class SolverSpec:
    """How a named solver is called from the MPC loop."""

    fn: Callable
    config_type: type
    discrete: bool = False
    needs_gradient: bool = False
    needs_goal: bool = False


def _call(fn):
    def call(model, s0, goal, space, cfg, init, rng):
        return fn(model, s0, cfg, init, space=space, rng=rng)
    return call


def _call_ccem(model, s0, goal, space, cfg, init, rng):
    # starts from uniform rows; one-hot warm starts would freeze the sampler
    return categorical_cem_solve(model, s0, space, cfg, rng=rng)


def _call_pgd(model, s0, goal, space, cfg, init, rng):
    return pgd_solve(model, s0, space, cfg, init, rng=rng)


def _call_grasp(model, s0, goal, space, cfg, init, rng):
    return grasp_solve(model, s0, goal, cfg, init, space=space, rng=rng)


SOLVERS: dict[str, SolverSpec] = {
    "predictive_sampling": SolverSpec(_call(predictive_sampling_solve), SamplingSolverConfig),
    "cem": SolverSpec(_call(cem_solve), SamplingSolverConfig),
    "mppi": SolverSpec(_call(mppi_solve), SamplingSolverConfig),
    "icem": SolverSpec(_call(icem_solve), SamplingSolverConfig),
    "categorical_cem": SolverSpec(_call_ccem, SamplingSolverConfig, discrete=True),
    "gd": SolverSpec(_call(gd_solve), GradientSolverConfig, needs_gradient=True),
    "pgd": SolverSpec(_call_pgd, GradientSolverConfig, discrete=True, needs_gradient=True),
    "lagrangian": SolverSpec(_call(lagrangian_solve), LagrangianConfig, needs_gradient=True),
    "grasp": SolverSpec(_call_grasp, GraspConfig, needs_gradient=True, needs_goal=True),
}


def solver_names() -> list:
    return list(SOLVERS)


def _horizon(cfg) -> int:
    return cfg.base.horizon if isinstance(cfg, LagrangianConfig) else cfg.horizon


@dataclass
class MPCPolicyConfig:
    solver: str = "cem"
    config: Any = None
    replan_every: int = 1
    warm_start: bool = True

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ConfigurationError(f"unknown solver {self.solver!r}; available: {solver_names()}")
        if self.config is None:
            raise ConfigurationError("MPC needs a solver config")
        spec = SOLVERS[self.solver]
        if not isinstance(self.config, spec.config_type):
            raise ConfigurationError(
                f"solver {self.solver!r} takes a {spec.config_type.__name__}, got {type(self.config).__name__}"
            )
        if not 1 <= self.replan_every <= self.horizon:
            raise ConfigurationError("replan_every must lie in [1, horizon]")

    @property
    def horizon(self) -> int:
        return _horizon(self.config)


def default_model_factory(env, goal):
    return env.cost_model(goal)


@dataclass
class _Slot:
    env: Any
    rng: RandomStream
    episode: int | None
    plan: np.ndarray | None = None
    plan_step: int = 0
    solves: int = 0


class MPCPolicy(Policy):
    """Replans every ``replan_every`` steps and executes the stored plan in
    between. ``model_factory(env, goal)`` builds the cost model for a solve.

    Gradient solvers on a model without gradients get a finite-difference
    wrapper. ``solve_counts[slot]`` counts solves in the current episode.
    """

    def __init__(self, model_factory: Callable | None, cfg: MPCPolicyConfig, seed: int = 0):
        self.model_factory = model_factory or default_model_factory
        self.cfg = cfg
        self.spec = SOLVERS[cfg.solver]
        self.seed = seed
        self._slots: dict[int, _Slot] = {}
        self.total_solves = 0

    @property
    def solve_counts(self) -> dict:
        return {k: s.solves for k, s in self._slots.items()}

    def on_reset(self, env, slot=0, rng=None, episode=None):
        space = env.action_space
        if self.spec.discrete != isinstance(space, DiscreteActionSpace):
            kind = "discrete" if self.spec.discrete else "continuous"
            raise ConfigurationError(f"solver {self.cfg.solver!r} needs a {kind} action space")
        self._slots[slot] = _Slot(env, rng if rng is not None else make_rng(self.seed).split(slot), episode)

    def _model(self, env, goal):
        model = self.model_factory(env, goal)
        if self.spec.needs_gradient and not model.differentiable:
            model = FiniteDifferenceModel(model)
        return model

    def warm_start(self, plan: np.ndarray, space) -> np.ndarray:
        """Shift ``plan`` left by ``replan_every`` rows and pad the tail with
        zeros (continuous) or uniform rows (discrete)."""
        k = self.cfg.replan_every
        pad = np.zeros((k, plan.shape[1]))
        if isinstance(space, DiscreteActionSpace):
            pad[:] = 1.0 / space.cardinality
        return np.vstack([plan[k:], pad])

    def get_action(self, info, slot=0):
        st = self._slots.get(slot)
        if st is None:
            raise ContractError(f"get_action before on_reset for slot {slot}")
        step = int(info["step"])
        k = self.cfg.replan_every
        space = st.env.action_space
        if st.plan is None or step - st.plan_step >= k:
            init = None
            if self.cfg.warm_start and st.plan is not None:
                init = self.warm_start(st.plan, space)
            model = self._model(st.env, info["goal"])
            try:
                result = self.spec.fn(model, info["state"], info["goal"], space, self.cfg.config, init,
                                      st.rng.split(step))
            except (SolverError, FloatingPointError) as exc:
                raise SolverError(f"episode {st.episode}, step {step}: {exc}") from exc
            st.plan = np.asarray(result.best_sequence, dtype=float)
            st.plan_step = step
            st.solves += 1
            self.total_solves += 1
        row = st.plan[step - st.plan_step]
        if isinstance(space, DiscreteActionSpace):
            return int(np.argmax(row))
        if isinstance(space, ContinuousActionSpace):
            return clip_to_bounds(row[None], space)[0]
        return row


def mpc_policy(model_factory: Callable | None, cfg: MPCPolicyConfig, seed: int = 0) -> MPCPolicy:
    return MPCPolicy(model_factory, cfg, seed)


class ReplayPolicy(Policy):
    """Plays back fixed action sequences; ``sequences[episode][step]``."""

    def __init__(self, sequences):
        self.sequences = sequences
        self._episode: dict = {}

    def on_reset(self, env, slot=0, rng=None, episode=None):
        self._episode[slot] = episode

    def get_action(self, info, slot=0):
        seq = self.sequences[self._episode[slot]]
        step = int(info["step"])
        if step >= len(seq):
            raise ContractError(f"replay ran past its {len(seq)} recorded actions")
        return seq[step]
