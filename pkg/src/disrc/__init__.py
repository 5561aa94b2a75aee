"""Surprise-regularised deep Q-learning on small gridworlds, built on numpy."""
from .disrc_agent import DISRCAgent
from .dqn import DQNAgent, epsilon_at
from .exceptions import (
    ConfigurationError,
    DisrcError,
    InsufficientDataError,
    NumericError,
    ShapeError,
    UsageError,
)
from .gridworld import GridEnv, make_env
from .surprise import LatentEncoder

__all__ = [
    "DQNAgent",
    "DISRCAgent",
    "LatentEncoder",
    "GridEnv",
    "make_env",
    "epsilon_at",
    "DisrcError",
    "ConfigurationError",
    "UsageError",
    "ShapeError",
    "NumericError",
    "InsufficientDataError",
]

__version__ = "0.1.0"
