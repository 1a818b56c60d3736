"""Sequential kernel independence tests by betting."""
__version__ = "0.1.0"

from .engine import RoundReport, SessionConfig, TestSession, Verdict, d_skit, run_stream
from .errors import (
    ConfigError,
    DegenerateInputError,
    EmptyStateError,
    FormatError,
    InputError,
    InvariantError,
    SkitError,
    StateError,
)
from .kernels import KernelSpec, eval_kernel, gram_matrix, median_heuristic

__all__ = [
    "ConfigError",
    "DegenerateInputError",
    "EmptyStateError",
    "FormatError",
    "InputError",
    "InvariantError",
    "KernelSpec",
    "RoundReport",
    "SessionConfig",
    "SkitError",
    "StateError",
    "TestSession",
    "Verdict",
    "d_skit",
    "eval_kernel",
    "gram_matrix",
    "median_heuristic",
    "run_stream",
]
