"""Qudit statevector simulator and a small workbench for quantum learning
algorithms and attacks on symmetric-key encryption."""

from .errors import AccessViolation, CapExceeded, DimensionError, NoInverse, NormalizationError, QuditlabError
from .state import DensityMatrix, QuditState, UnitaryOp, apply_unitary, qft

__version__ = "0.1.0"

__all__ = [
    "AccessViolation",
    "CapExceeded",
    "DensityMatrix",
    "DimensionError",
    "NoInverse",
    "NormalizationError",
    "QuditState",
    "QuditlabError",
    "UnitaryOp",
    "apply_unitary",
    "qft",
]
