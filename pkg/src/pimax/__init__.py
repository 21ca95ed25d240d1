"""Predictive-information maximization for tabular sensorimotor policies."""

from .errors import ConfigurationError, PimaxError, SimulationError
from .infotheory import (
    Binner,
    empirical_mi_from_series,
    entropy,
    joint_from_components,
    mutual_information,
    predictive_information,
)

__version__ = "0.1.0"

__all__ = [
    "Binner",
    "ConfigurationError",
    "PimaxError",
    "SimulationError",
    "empirical_mi_from_series",
    "entropy",
    "joint_from_components",
    "mutual_information",
    "predictive_information",
]
