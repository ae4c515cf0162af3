from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Sequence

import numpy as np

from ..core import ContractError
from ..rng import make_rng
from .variation import ResetOptions, VariationSpace, sample_variation


class World:
    """A resettable, steppable environment with factors of variation.

    Subclasses define ``name``, ``state_dim``, ``task_keys`` (factors that are
    re-drawn at every reset unless pinned, i.e. the task randomiser),
    ``variation_space()``, ``_configure(values)`` which applies factor values
    and returns ``(initial_state, goal_state)``, ``_transition(state, action)``,
    ``success(state, goal)`` and ``cost_model(goal)``.
    """

    name = "world"
    state_dim = 0
    max_steps = 200
    task_keys: tuple = ()

    def __init__(self):
        self.state = None
        self.goal = None
        self.values: dict = {}
        self.steps = 0
        self._space = self.variation_space()
        # default parameters, so descriptors such as action_space work before reset
        self._configure(self._space.defaults())

    # -- subclass hooks -------------------------------------------------
    def variation_space(self) -> VariationSpace:
        raise NotImplementedError

    def _configure(self, values: dict) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def _transition(self, state, action) -> np.ndarray:
        raise NotImplementedError

    def success(self, state, goal) -> bool:
        raise NotImplementedError

    def cost_model(self, goal=None, **kwargs):
        raise NotImplementedError

    @property
    def action_space(self):
        raise NotImplementedError

    # -- public API -----------------------------------------------------
    def reset(self, seed: int, options=None) -> tuple[np.ndarray, dict]:
        opts = ResetOptions.coerce(options)
        rng = make_rng(seed)
        values = sample_variation(self._space, rng, opts, extra_keys=self.task_keys)
        self.values = values
        state, goal = self._configure(values)
        self.state = np.asarray(state, dtype=float)
        self.goal = np.asarray(goal, dtype=float)
        self.steps = 0
        return self.state.copy(), self._info()

    def step(self, action) -> tuple[np.ndarray, bool, dict]:
        if self.state is None:
            raise ContractError("step() called before reset()")
        if not np.all(np.isfinite(self.state)):
            raise ContractError("non-finite state")
        self.state = np.asarray(self._transition(self.state, action), dtype=float)
        self.steps += 1
        done = self.success(self.state, self.goal)
        return self.state.copy(), done, self._info()

    def set_state(self, state):
        """Overwrite the current state, e.g. to start from a recorded one."""
        state = np.asarray(state, dtype=float)
        if state.shape != (self.state_dim,):
            raise ContractError(f"state must have shape ({self.state_dim},)")
        self.state = state.copy()

    def set_goal(self, goal):
        goal = np.asarray(goal, dtype=float)
        if goal.shape != (self.state_dim,):
            raise ContractError(f"goal must have shape ({self.state_dim},)")
        self.goal = goal.copy()

    def current_info(self) -> dict:
        """Info map for the current state, e.g. after ``set_state``."""
        return self._info()

    def _info(self) -> dict:
        return {"state": self.state.copy(), "goal": self.goal.copy(), "step": self.steps,
                "variation": dict(self.values)}

    @property
    def variations(self) -> VariationSpace:
        """The world's factor catalogue."""
        return self._space

    def describe_factors(self) -> list:
        return self._space.describe()


_REGISTRY: dict[str, Callable[[], World]] = {}


def register(name: str):
    def deco(cls):
        _REGISTRY[name] = cls
        cls.name = name
        return cls
    return deco


def list_worlds() -> list:
    return sorted(_REGISTRY)


def make_world(name: str) -> World:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ContractError(f"unknown world {name!r}; available: {list_worlds()}") from None


class EnvPool:
    """``num_envs`` independent world instances driven in parallel.

    Work items are assigned to slots round-robin by index and results are
    gathered positionally, so the output never depends on ``num_envs``
    provided each item derives its randomness from its own index.
    """

    def __init__(self, world: str | Callable[[], World], num_envs: int = 1):
        if num_envs < 1:
            raise ContractError("num_envs must be >= 1")
        factory = (lambda: make_world(world)) if isinstance(world, str) else world
        self.envs = [factory() for _ in range(num_envs)]
        self.name = self.envs[0].name

    @property
    def num_envs(self) -> int:
        return len(self.envs)

    def map(self, fn: Callable[[World, int, Any], Any], items: Sequence) -> list:
        """Run ``fn(env, slot, item)`` for every item; results keep item order."""
        n = self.num_envs
        results: list = [None] * len(items)

        def run_slot(slot):
            for i in range(slot, len(items), n):
                results[i] = fn(self.envs[slot], slot, items[i])

        if n == 1:
            run_slot(0)
        else:
            with ThreadPoolExecutor(max_workers=n) as ex:
                for f in [ex.submit(run_slot, s) for s in range(n)]:
                    f.result()
        return results
