from .base import EnvPool, World, list_worlds, make_world, register
from .gridworld import GridCost, GridWorld, bfs_distances, wall_layout
from .pendulum import Pendulum, PendulumCost, wrap_angle
from .tworoom import PointMassCost, TwoRoom, TwoRoomCost, tworoom_dynamics
from .variation import (
    Constraint,
    FactorSpec,
    ResetOptions,
    VariationError,
    VariationSpace,
    sample_variation,
)

__all__ = [
    "Constraint",
    "EnvPool",
    "FactorSpec",
    "GridCost",
    "GridWorld",
    "Pendulum",
    "PendulumCost",
    "PointMassCost",
    "ResetOptions",
    "TwoRoom",
    "TwoRoomCost",
    "VariationError",
    "VariationSpace",
    "World",
    "bfs_distances",
    "list_worlds",
    "make_world",
    "register",
    "sample_variation",
    "tworoom_dynamics",
    "wall_layout",
    "wrap_angle",
]
