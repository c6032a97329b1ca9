"""Two-dimensional Euler flows whose Lagrangian labelling map is harmonic."""

from __future__ import annotations

__version__ = "0.1.0"
