"""Exact and stochastic potential theory on homogeneous trees and the unit disk."""
from __future__ import annotations

from .errors import (
    CheckFailed,
    ConfigInvalid,
    HypothesisViolated,
    NotIntegrable,
    NotSubharmonic,
    NotTransient,
    RieszLabError,
)
from .tree_core import End, Vertex, parse_boundary_set

__version__ = "0.1.0"

__all__ = [
    "CheckFailed",
    "ConfigInvalid",
    "End",
    "HypothesisViolated",
    "NotIntegrable",
    "NotSubharmonic",
    "NotTransient",
    "RieszLabError",
    "Vertex",
    "parse_boundary_set",
]
