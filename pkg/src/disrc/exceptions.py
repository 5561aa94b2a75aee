"""Exception hierarchy shared by every module in the package."""


class DisrcError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(DisrcError, ValueError):
    """Invalid construction parameters (grid size, hyperparameters, config keys)."""


class UsageError(DisrcError, RuntimeError):
    """API used out of order, e.g. stepping a finished episode or reusing a cache."""


class ShapeError(DisrcError, ValueError):
    """Array dimensions disagree with a network or optimizer."""


class NumericError(DisrcError, ArithmeticError):
    """Non-finite gradient or loss; training cannot continue."""


class InsufficientDataError(DisrcError):
    """Replay buffer holds fewer transitions than the requested batch."""
