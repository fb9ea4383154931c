"""Directed link prediction toolkit (C++ core)."""

from ._core import *  # noqa: F401,F403
from ._core import DataError, ParseError, ShapeError, TrainingError  # noqa: F401

__all__ = [name for name in dir() if not name.startswith("_")]
