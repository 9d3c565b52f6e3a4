"""PSD matrix completion with the spectral bundle method.

Decides whether a partially specified symmetric matrix (full diagonal plus
some off-diagonal entries) has a positive semidefinite completion, and
produces an approximate PSD completion in factored form.
"""

from .bundle import Mode, SolveOutcome, SolverConfig, SolverError, Status
from .completion import (
    CompletionInstance,
    InstanceKind,
    approximate_square,
    check_feasibility,
    generate_instance,
    verify_certificate,
)
from .constraints import ConstraintSet
from .lanczos import LanczosOptions, max_eigs
from .nystrom import NystromSketch, default_sketch_rank
from .smallsdp import IpmOptions
from .sparse_sym import SparseSymMatrix

__version__ = "0.1.0"

__all__ = [
    "CompletionInstance",
    "ConstraintSet",
    "InstanceKind",
    "IpmOptions",
    "LanczosOptions",
    "Mode",
    "NystromSketch",
    "SolveOutcome",
    "SolverConfig",
    "SolverError",
    "SparseSymMatrix",
    "Status",
    "approximate_square",
    "check_feasibility",
    "default_sketch_rank",
    "generate_instance",
    "max_eigs",
    "verify_certificate",
    "__version__",
]
