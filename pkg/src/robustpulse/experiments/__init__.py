"""Studies built on the optimizer: campaigns, benchmarking simulations, outputs."""

from .campaigns import (CellResult, CellSpec, cached_cell, compare_objectives,
                        competing_loss_map, difficulty_q, difficulty_stats, fit_quadratic,
                        heatmap_time_controls, load_cell, robust_freq_campaign, run_cell,
                        save_cell, sweep_error)
from .rb import (CliffordDecomposition, ErrorInjection, GateSet, simulate_ape, simulate_rb,
                 virtual_z)
from .perturb import PerturbationConfig, perturb_controls, perturb_reoptimize
from .transfer import AmplitudeTransfer, amplitude_transfer_map

__all__ = [
    "AmplitudeTransfer", "CellResult", "CellSpec", "CliffordDecomposition", "ErrorInjection",
    "GateSet", "PerturbationConfig", "amplitude_transfer_map", "cached_cell",
    "compare_objectives", "competing_loss_map", "difficulty_q", "difficulty_stats",
    "fit_quadratic", "heatmap_time_controls", "load_cell", "perturb_controls",
    "perturb_reoptimize", "robust_freq_campaign", "run_cell", "save_cell", "simulate_ape",
    "simulate_rb", "sweep_error", "virtual_z",
]
