"""Robust optimal control of a transmon X90 gate.

Modules: ``qmodel`` (Hamiltonian, propagation, fidelities), ``controls``
(control variables, transfer matrix, pulse files), ``scp`` (sequential convex
programming), ``baselines`` (DRAG, BB1, two-level oracle) and
``experiments`` (campaigns, benchmarking simulations, output writers).
"""

__version__ = "0.1.0"

from .controls import (ControlSet, Signal, TransferMatrix, apply_filter,  # noqa: E402
                       build_transfer_matrix, check_feasible)
from .errors import ConfigurationError, InputError, NumericalError  # noqa: E402
from .qmodel import (ErrorSample, LindbladConfig, TransmonModel,  # noqa: E402
                     average_fidelity, propagate_unitary, x90_target)
from .scp import (ErrorEnsemble, ScpConfig, evaluate_worst_case, multistart,  # noqa: E402
                  run_scp)

__all__ = [
    "ConfigurationError", "ControlSet", "ErrorEnsemble", "ErrorSample", "InputError",
    "LindbladConfig", "NumericalError", "ScpConfig", "Signal", "TransferMatrix",
    "TransmonModel", "apply_filter", "average_fidelity", "build_transfer_matrix",
    "check_feasible", "evaluate_worst_case", "multistart", "propagate_unitary",
    "run_scp", "x90_target",
]
