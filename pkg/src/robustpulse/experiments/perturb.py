"""Perturb-and-reoptimize cycles for escaping trapped optimizations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..controls import ControlSet, TransferMatrix, apply_filter, check_feasible
from ..qmodel import TransmonModel
from ..scp import ErrorEnsemble, FidelityEvaluator, OptimizationRecord, ScpConfig, run_scp


@dataclass(frozen=True)
class PerturbationConfig:
    """``magnitude`` bounds each variable's kick (default 1 % of the amplitude
    range); perturbation repeats until the objective infidelity has moved by
    ``target_inflation`` (a factor, either direction)."""

    magnitude: float = 0.01 * np.sqrt(2.0)
    cycles: int = 3
    target_inflation: float = 10.0
    max_rounds: int = 200

    def __post_init__(self):
        if self.magnitude < 0 or self.cycles < 0 or self.target_inflation < 1:
            raise ValueError("invalid perturbation settings")


def _channel_kick(c: np.ndarray, rng: np.random.Generator, magnitude: float,
                  cap: float, slew: float) -> np.ndarray:
    # left to right: each variable's interval respects the box, the already
    # moved left neighbour and the not yet moved right neighbour, so p = 0 is
    # always inside and the result stays feasible
    out = c.copy()
    n = out.size
    for i in range(n):
        lo = max(-cap, c[i] - magnitude)
        hi = min(cap, c[i] + magnitude)
        if i > 0:
            lo, hi = max(lo, out[i - 1] - slew), min(hi, out[i - 1] + slew)
        if i < n - 1:
            lo, hi = max(lo, c[i + 1] - slew), min(hi, c[i + 1] + slew)
        if hi > lo:
            out[i] = rng.uniform(lo, hi)
    return out


def perturb_controls(controls: ControlSet, rng: np.random.Generator,
                     magnitude: float) -> ControlSet:
    """Uniform kick inside the per-variable feasible interval."""
    cap, slew = controls.amplitude_cap, controls.slew_limit
    cx = _channel_kick(controls.cx, rng, magnitude, cap, slew)
    cy = _channel_kick(controls.cy, rng, magnitude, cap, slew)
    return ControlSet(cx, cy, slew, cap)


def manhattan_distance(tm: TransferMatrix, a: ControlSet, b: ControlSet) -> float:
    """L1 distance between the filtered time signals (both quadratures)."""
    sa, sb = apply_filter(tm, a), apply_filter(tm, b)
    return float(np.sum(np.abs(sa.ex - sb.ex)) + np.sum(np.abs(sa.ey - sb.ey)))


@dataclass
class PerturbResult:
    initial_infidelity: float
    best: OptimizationRecord | None
    best_infidelity: float
    cycle_infidelities: list = field(default_factory=list)   # best after each cycle
    perturbed_infidelities: list = field(default_factory=list)
    rounds: list = field(default_factory=list)
    distances: list = field(default_factory=list)
    records: list = field(default_factory=list)

    @property
    def improvement(self) -> float:
        return self.initial_infidelity / max(self.best_infidelity, 1e-300)


def perturb_until_moved(ev: FidelityEvaluator, controls: ControlSet, rng: np.random.Generator,
                        pconfig: PerturbationConfig) -> tuple[ControlSet, int, float]:
    """Accumulate kicks until ``|log10(1 - F_p) - log10(1 - F_u)| >= log10(target)``."""
    base = 1.0 - ev.fidelities(controls).min()
    need = np.log10(pconfig.target_inflation)
    current = controls
    inf = base
    for rounds in range(1, pconfig.max_rounds + 1):
        current = perturb_controls(current, rng, pconfig.magnitude)
        inf = 1.0 - ev.fidelities(current).min()
        if abs(np.log10(max(inf, 1e-300)) - np.log10(max(base, 1e-300))) >= need:
            return current, rounds, inf
    return current, pconfig.max_rounds, inf


def perturb_reoptimize(model: TransmonModel, tm: TransferMatrix, ensemble: ErrorEnsemble,
                       controls: ControlSet, config: ScpConfig,
                       pconfig: PerturbationConfig = PerturbationConfig(),
                       seed: int = 0) -> PerturbResult:
    """Cycles of perturbation and SCP; only the best controls seed the next cycle."""
    rng = np.random.default_rng(seed)
    ev = FidelityEvaluator(model, tm, ensemble.samples)
    best_controls = controls
    best_inf = float(1.0 - ev.fidelities(controls).min())
    result = PerturbResult(best_inf, None, best_inf)
    for _ in range(pconfig.cycles):
        kicked, rounds, kicked_inf = perturb_until_moved(ev, best_controls, rng, pconfig)
        assert check_feasible(kicked)
        rec = run_scp(model, tm, ensemble, config, kicked, seed=seed)
        result.records.append(rec)
        result.rounds.append(rounds)
        result.perturbed_infidelities.append(kicked_inf)
        result.distances.append(manhattan_distance(tm, best_controls, rec.final_controls))
        if rec.worst_case_infidelity < best_inf:
            best_inf = rec.worst_case_infidelity
            best_controls = rec.final_controls
            result.best = rec
        result.cycle_infidelities.append(best_inf)
    result.best_infidelity = best_inf
    return result
