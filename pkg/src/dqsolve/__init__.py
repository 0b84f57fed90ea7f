"""Differential-equation solving on differentiable quantum circuits, with
three trial-function families and instrumented circuit-evaluation accounting."""

from . import (
    circuits,
    config,
    differentiation,
    models,
    pauli,
    problems,
    shadows,
    statevector,
    training,
)

__all__ = [
    "circuits",
    "config",
    "differentiation",
    "models",
    "pauli",
    "problems",
    "shadows",
    "statevector",
    "training",
]

__version__ = "0.1.0"
