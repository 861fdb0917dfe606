"""Analytic-weight solvers for thin-strip MHD and its hydrostatic limit."""

from .grid import ConfigError, GridSpec, SpectralField, ValidationError
from .state import MhdState

__all__ = ["ConfigError", "GridSpec", "MhdState", "SpectralField", "ValidationError"]
