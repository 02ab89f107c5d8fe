"""Numerical spectral theory of Jacobi operators: subordinacy, m-functions, half-line decompositions."""
from __future__ import annotations

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402

__all__ = ["BACKEND", "__version__"]
