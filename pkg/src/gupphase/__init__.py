"""Deformed phase-space brackets: closure checks, f reconstruction, rotation
schemes, quantum Jacobi identities and Hamiltonian flows."""

__version__ = "0.1.0"

from .expr import parse, to_str, evaluate, diff, simplify, ParseError, EvalError
from .structure import GupModel, Box, CheckReport, poisson_matrix, symplectic_matrix, bracket
from .closure import closure_check, decompose_L, corrupt
from .modelfile import load_model, ModelFileError
from .kernels import BACKEND

__all__ = [
    "__version__", "parse", "to_str", "evaluate", "diff", "simplify", "ParseError", "EvalError",
    "GupModel", "Box", "CheckReport", "poisson_matrix", "symplectic_matrix", "bracket",
    "closure_check", "decompose_L", "corrupt", "load_model", "ModelFileError", "BACKEND",
]
