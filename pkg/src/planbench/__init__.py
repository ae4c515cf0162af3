"""Model-predictive planning solvers, toy worlds with factors of variation,
goal-conditioned evaluation and a columnar trajectory store."""

from .core import (
    ConfigurationError,
    ContinuousActionSpace,
    ContractError,
    CostModel,
    DiscreteActionSpace,
    EpisodeError,
    FiniteDifferenceModel,
    SolverError,
    SolverResult,
    clip_to_bounds,
    finite_difference_gradient,
)
from .rng import RandomStream, make_rng

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ContinuousActionSpace",
    "ContractError",
    "CostModel",
    "DiscreteActionSpace",
    "EpisodeError",
    "FiniteDifferenceModel",
    "RandomStream",
    "SolverError",
    "SolverResult",
    "clip_to_bounds",
    "finite_difference_gradient",
    "make_rng",
]
