"""Experiment harness: configs, seeded runs, comparisons, sweeps and plots."""
from .config import RunConfig
from .plot import plot
from .runner import compare, sweep, train

__all__ = ["RunConfig", "train", "compare", "sweep", "plot"]
