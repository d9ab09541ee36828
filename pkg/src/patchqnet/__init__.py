"""Patch-based quantum image reduction with a jointly trained classifier.

Batched state-vector simulation of a small variational circuit that
reduces image patches to one expectation value each, a classical
attention mask fused with those values, and a quantum (or classical
fully-connected) head trained jointly on the fused features.
"""

from .backend import BACKEND, available_backends
from .errors import (
    ConfigurationError,
    ContractError,
    DataFormatError,
    DatasetError,
    DegenerateInputError,
    InvalidInputError,
    NumericalError,
    PatchQNetError,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "available_backends",
    "PatchQNetError",
    "InvalidInputError",
    "ContractError",
    "ConfigurationError",
    "DegenerateInputError",
    "DataFormatError",
    "DatasetError",
    "NumericalError",
    "__version__",
]
