"""Desk-scale reference campaigns.

Each entry fixes a cell (gate time, grid, ensemble, number of starts) and
the SCP settings.  Start counts and iteration caps are far below a cluster
campaign; everything else uses the default model and filter.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from ..qmodel import TransmonModel
from ..scp import ErrorEnsemble, ScpConfig
from .campaigns import CellResult, CellSpec, cached_cell

NS = 1e-9
FREQ_ERROR = 2 * np.pi * 500e3
DOUBLY_AMP_ERROR = 0.075

LIBRARY_TIMES_NS = (120, 130, 150, 200, 250, 300)
LIBRARY_ETAS = (0.05, 0.1)
DIFFICULTY_ETAS = (0.025, 0.05, 0.1)
OBJECTIVE_TIMES_NS = (130, 150, 200)
DOUBLY_TIMES_NS = (150, 175, 200)


def _cfg(max_iterations: int, seed: int = 0) -> ScpConfig:
    return ScpConfig(max_iterations=max_iterations, rng_seed=seed)


def reference_cells() -> dict:
    """Name -> (CellSpec, ScpConfig), in a sensible build order."""
    cells = {}
    cells["nonrobust_T60_N25"] = (
        CellSpec(60 * NS, 25, ErrorEnsemble.nominal(), 50), _cfg(10_000))
    for eta in DIFFICULTY_ETAS:
        cells[f"difficulty_T130_N25_eta{eta:g}"] = (
            CellSpec(130 * NS, 25, ErrorEnsemble.amplitude(eta), 30), _cfg(3000))
    for t in LIBRARY_TIMES_NS:
        for eta in LIBRARY_ETAS:
            if t == 130:
                continue  # the difficulty cells cover 130 ns
            cells[f"library_T{t}_N25_eta{eta:g}"] = (
                CellSpec(t * NS, 25, ErrorEnsemble.amplitude(eta), 6), _cfg(3000))
    cells["freq_T150_N25"] = (
        CellSpec(150 * NS, 25, ErrorEnsemble.detuning(FREQ_ERROR), 10), _cfg(4000))
    for t in DOUBLY_TIMES_NS:
        cells[f"doubly_T{t}_N25"] = (
            CellSpec(t * NS, 25, ErrorEnsemble.doubly(DOUBLY_AMP_ERROR, FREQ_ERROR), 10),
            _cfg(4000))
    for t in OBJECTIVE_TIMES_NS:
        for mode in ("worst_case", "average_case"):
            cells[f"objectives_T{t}_N20_{mode}"] = (
                CellSpec(t * NS, 20, ErrorEnsemble.amplitude(0.1), 20, mode),
                ScpConfig(max_iterations=3000, mode=mode))
    cells["robust_T150_N50_eta0.05"] = (
        CellSpec(150 * NS, 50, ErrorEnsemble.amplitude(0.05), 100), _cfg(4000))
    return cells


def library_dir() -> Path:
    """``$ROBUSTPULSE_LIBRARY`` or ``pulse_library/`` in the working directory."""
    return Path(os.environ.get("ROBUSTPULSE_LIBRARY", "pulse_library"))


def reference_cell(name: str, model: TransmonModel | None = None, jobs: int = 1,
                   directory=None) -> CellResult:
    spec, cfg = reference_cells()[name]
    return cached_cell(directory or library_dir(), name, model or TransmonModel(), spec, cfg, jobs)
