"""Exception types raised by the package."""


class PimaxError(Exception):
    """Base class for all package errors."""


class ConfigurationError(PimaxError, ValueError):
    """Invalid sizes, shapes or parameter values."""


class SimulationError(PimaxError, RuntimeError):
    """Non-finite values appeared in the simulation or learner state."""
