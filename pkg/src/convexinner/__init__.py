"""Convexity certificates and convex inner approximations of planar and spatial semialgebraic sets."""

__version__ = "0.1.0"

from .polycore import Polynomial  # noqa: E402
from .semialg import SemialgebraicSet  # noqa: E402

__all__ = ["Polynomial", "SemialgebraicSet", "__version__"]
