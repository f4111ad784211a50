"""Laplace-domain B-spline wavelet finite elements for 1D elastic waves in rods and beams."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
