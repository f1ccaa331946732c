"""Optimization campaigns and the studies built on their results."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..controls import ControlSet, Signal, TransferMatrix, apply_filter, build_transfer_matrix
from ..qmodel import MHZ, ErrorSample, LindbladConfig, TransmonModel, average_fidelities
from ..scp import (ErrorEnsemble, MultistartResult, OptimizationRecord, ScpConfig,
                   best_record, error_grid, evaluate_worst_case, multistart)

DEFAULT_BANDWIDTH = 24 * MHZ


@dataclass(frozen=True)
class CellSpec:
    """One optimization setting: gate time, grid, error ensemble and effort."""

    gate_time: float
    n_controls: int
    ensemble: ErrorEnsemble
    n_starts: int = 10
    mode: str = "worst_case"
    bandwidth: float = DEFAULT_BANDWIDTH
    upsample: int = 4
    label: str = ""

    def transfer_matrix(self) -> TransferMatrix:
        return build_transfer_matrix(self.n_controls, self.gate_time, self.bandwidth,
                                     self.upsample)

    def as_dict(self) -> dict:
        return {
            "gate_time": self.gate_time,
            "gate_time_ns": self.gate_time * 1e9,
            "n_controls": self.n_controls,
            "samples": [list(s) for s in self.ensemble.samples],
            "n_starts": self.n_starts,
            "mode": self.mode,
            "bandwidth": self.bandwidth,
            "upsample": self.upsample,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CellSpec":
        return cls(float(d["gate_time"]), int(d["n_controls"]),
                   ErrorEnsemble(tuple(ErrorSample(*s) for s in d["samples"])),
                   int(d["n_starts"]), d["mode"], float(d["bandwidth"]),
                   int(d["upsample"]), d.get("label", ""))


@dataclass
class CellResult:
    spec: CellSpec
    records: list
    config: ScpConfig

    def __post_init__(self):
        self.tm = self.spec.transfer_matrix()

    @property
    def best(self) -> OptimizationRecord:
        return best_record(self.records, self.spec.mode)

    @property
    def best_controls(self) -> ControlSet:
        return self.best.final_controls

    def signal(self, controls: ControlSet | None = None) -> Signal:
        return apply_filter(self.tm, controls or self.best_controls)

    def worst_case_infidelities(self) -> np.ndarray:
        return np.array([r.worst_case_infidelity for r in self.records])

    def mean_infidelities(self) -> np.ndarray:
        return np.array([1.0 - r.mean_fidelity for r in self.records])

    def wall_times(self) -> np.ndarray:
        return np.array([r.wall_time for r in self.records])


def run_cell(model: TransmonModel, spec: CellSpec, config: ScpConfig, jobs: int = 1,
             start_sampler=None) -> CellResult:
    cfg = config if config.mode == spec.mode else ScpConfig(**{**asdict(config), "mode": spec.mode})
    result: MultistartResult = multistart(model, spec.transfer_matrix(), spec.ensemble, cfg,
                                          spec.n_starts, start_sampler, jobs)
    return CellResult(spec, result.records, cfg)


# --------------------------------------------------------------------------
# persistence


def save_cell(path, cell: CellResult) -> Path:
    """Store every record's controls and summary numbers in one ``.npz``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    recs = cell.records
    meta = {"spec": cell.spec.as_dict(), "config": asdict(cell.config)}
    np.savez_compressed(
        path,
        meta=np.array(json.dumps(meta)),
        final=np.array([[r.final_controls.cx, r.final_controls.cy] for r in recs]),
        initial=np.array([[r.initial_controls.cx, r.initial_controls.cy] for r in recs]),
        fidelities=np.array([r.per_sample_fidelities for r in recs]),
        iterations=np.array([r.iterations_used for r in recs]),
        accepted=np.array([r.accepted_steps for r in recs]),
        rejected=np.array([r.rejected_steps for r in recs]),
        seeds=np.array([-1 if r.seed is None else r.seed for r in recs]),
        wall=np.array([r.wall_time for r in recs]),
        termination=np.array([r.termination for r in recs]),
    )
    return path


def load_cell(path) -> CellResult:
    with np.load(Path(path), allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        spec = CellSpec.from_dict(meta["spec"])
        config = ScpConfig(**meta["config"])
        records = []
        for i in range(z["final"].shape[0]):
            fin = ControlSet(z["final"][i, 0], z["final"][i, 1])
            ini = ControlSet(z["initial"][i, 0], z["initial"][i, 1])
            fid = z["fidelities"][i]
            records.append(OptimizationRecord(
                final_controls=fin, per_sample_fidelities=fid,
                worst_case_fidelity=float(fid.min()),
                iterations_used=int(z["iterations"][i]), termination=str(z["termination"][i]),
                accepted_steps=int(z["accepted"][i]), rejected_steps=int(z["rejected"][i]),
                seed=int(z["seeds"][i]), initial_controls=ini, wall_time=float(z["wall"][i]),
                config=meta["config"]))
    return CellResult(spec, records, config)


def cached_cell(cache_dir, name: str, model: TransmonModel, spec: CellSpec,
                config: ScpConfig, jobs: int = 1) -> CellResult:
    """Load ``<cache_dir>/<name>.npz`` if present, otherwise run and store it."""
    path = Path(cache_dir) / f"{name}.npz"
    if path.exists():
        cell = load_cell(path)
        if cell.spec == spec and cell.config == config:
            return cell
    cell = run_cell(model, spec, config, jobs)
    save_cell(path, cell)
    return cell


# --------------------------------------------------------------------------
# error sweeps


@dataclass
class SweepTable:
    etas: np.ndarray
    solid: np.ndarray          # pulse optimized for eta, judged on [-eta, eta]
    dashed: np.ndarray         # best pulse of all, judged on [-eta, eta]
    cross: np.ndarray          # cross[i, j]: pulse i judged on [-eta_j, eta_j]
    curves: dict = field(default_factory=dict)


def sweep_error(model: TransmonModel, pulses: dict, n_grid: int = 41) -> SweepTable:
    """``pulses`` maps the optimized error range to ``(tm, controls)`` or a Signal."""
    etas = np.array(sorted(pulses))
    cross = np.zeros((etas.size, etas.size))
    curves = {}
    for i, eta_i in enumerate(etas):
        item = pulses[eta_i]
        tm, ctrl = item if isinstance(item, tuple) else (None, item)
        for j, eta_j in enumerate(etas):
            curve = evaluate_worst_case(model, tm, ctrl, eta_j, n_grid)
            cross[i, j] = curve.worst_infidelity
            if i == j:
                curves[float(eta_i)] = curve
    solid = np.diag(cross).copy()
    dashed = cross.min(axis=0)
    return SweepTable(etas, solid, dashed, cross, curves)


def fit_quadratic(etas, infidelities) -> tuple[float, float]:
    """Least-squares ``A eta^2`` through the origin; returns ``(A, R^2)``."""
    x = np.asarray(etas, float) ** 2
    y = np.asarray(infidelities, float)
    a = float(x @ y / (x @ x))
    ss_res = float(np.sum((y - a * x) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return a, 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


# --------------------------------------------------------------------------
# gate time x controls


@dataclass
class HeatmapResult:
    times: np.ndarray
    controls: np.ndarray
    infidelity: np.ndarray     # (times, controls), best worst-case on the grid
    leakage: np.ndarray        # max leakage of each best pulse
    cells: dict


def heatmap_time_controls(model: TransmonModel, times, controls, eta: float,
                          n_starts: int, config: ScpConfig, jobs: int = 1,
                          n_grid: int = 41, cache_dir=None) -> HeatmapResult:
    from ..qmodel import propagate_unitary

    times = np.asarray(times, float)
    controls = np.asarray(controls, int)
    inf = np.full((times.size, controls.size), np.nan)
    leak = np.full_like(inf, np.nan)
    cells = {}
    for i, t in enumerate(times):
        for j, nc in enumerate(controls):
            spec = CellSpec(t, int(nc), ErrorEnsemble.amplitude(eta), n_starts)
            if cache_dir is None:
                cell = run_cell(model, spec, config, jobs)
            else:
                name = f"heatmap_T{t * 1e9:.0f}_N{nc}_eta{eta:g}_s{n_starts}"
                cell = cached_cell(cache_dir, name, model, spec, config, jobs)
            cells[(float(t), int(nc))] = cell
            curve = evaluate_worst_case(model, cell.tm, cell.best_controls, eta, n_grid)
            inf[i, j] = curve.worst_infidelity
            leak[i, j] = propagate_unitary(model, cell.signal()).max_leakage
    return HeatmapResult(times, controls, inf, leak, cells)


# --------------------------------------------------------------------------
# relaxation versus amplitude error


@dataclass(frozen=True)
class LibraryPulse:
    label: str
    gate_time: float
    signal: Signal
    robust: bool


@dataclass
class CompetingLossResult:
    t1_values: np.ndarray
    etas: np.ndarray
    best_infidelity: np.ndarray     # (t1, eta)
    best_gate_time: np.ndarray      # (t1, eta), nominal gate time of the winner
    ratio: np.ndarray               # non-robust over best robust worst-case infidelity
    boundary: np.ndarray            # per t1: smallest eta where robust wins (nan if never)
    boundary_gate_time: np.ndarray  # robust gate time winning at the boundary
    k: float
    r2: float
    curves: dict


def _range_worst(curve_etas: np.ndarray, fid: np.ndarray, eta: float) -> float:
    inside = np.abs(curve_etas) <= eta + 1e-12
    return float(fid[inside].min())


def competing_loss_map(model: TransmonModel, library, t1_values, etas,
                       n_grid: int | None = None) -> CompetingLossResult:
    """Winner among library pulses for every ``(T1, eta)``.

    Every pulse's ``F_A`` under relaxation (no pure dephasing) is evaluated
    once per ``T1`` on a symmetric grid containing every ``+-eta``; the worst
    case over ``[-eta, eta]`` is then read off that grid.
    """
    etas = np.asarray(etas, float)
    t1_values = np.asarray(t1_values, float)
    eta_max = float(etas.max())
    if n_grid is None:
        step = np.min(np.diff(np.unique(np.concatenate([[0.0], etas]))))
        n_grid = 2 * int(round(eta_max / step)) + 1
    grid = error_grid(eta_max, n_grid)
    samples = [ErrorSample(e, 0.0) for e in grid]
    best_inf = np.zeros((t1_values.size, etas.size))
    best_t = np.zeros_like(best_inf)
    ratio = np.zeros_like(best_inf)
    curves = {}
    robust_idx = [i for i, p in enumerate(library) if p.robust]
    plain_idx = [i for i, p in enumerate(library) if not p.robust]
    if not robust_idx or not plain_idx:
        raise ValueError("library needs both robust and non-robust pulses")
    for a, t1 in enumerate(t1_values):
        lind = LindbladConfig(t1=t1)
        worst = np.zeros((len(library), etas.size))
        for i, p in enumerate(library):
            fid = average_fidelities(model, p.signal, samples, lind)
            curves[(float(t1), p.label)] = fid
            worst[i] = [1 - _range_worst(grid, fid, e) for e in etas]
        win = worst.argmin(axis=0)
        best_inf[a] = worst[win, np.arange(etas.size)]
        best_t[a] = [library[w].gate_time for w in win]
        ratio[a] = worst[plain_idx].min(axis=0) / worst[robust_idx].min(axis=0)
    boundary = np.full(t1_values.size, np.nan)
    boundary_t = np.full(t1_values.size, np.nan)
    for a, t1 in enumerate(t1_values):
        lr = np.log10(ratio[a])
        above = np.flatnonzero(lr > 0)
        if above.size == 0:
            continue
        j = above[0]
        if j == 0:
            boundary[a] = etas[0]
        else:
            # log-linear crossing between grid points
            f = lr[j - 1] / (lr[j - 1] - lr[j])
            boundary[a] = etas[j - 1] + f * (etas[j] - etas[j - 1])
        w = min(robust_idx, key=lambda i: 1 - _range_worst(grid, curves[(float(t1), library[i].label)],
                                                           etas[j]))
        boundary_t[a] = library[w].gate_time
    ok = np.isfinite(boundary)
    k, r2 = np.nan, np.nan
    if ok.sum() >= 2:
        x = np.sqrt(boundary_t[ok] / t1_values[ok])
        y = boundary[ok]
        k = float(x @ y / (x @ x))
        ss_res = float(np.sum((y - k * x) ** 2))
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return CompetingLossResult(t1_values, etas, best_inf, best_t, ratio, boundary, boundary_t,
                               k, r2, curves)


# --------------------------------------------------------------------------
# difficulty


def difficulty_q(infidelities, best_infidelity: float | None = None, d: float = 0.5) -> float:
    """Fraction of runs within ``d`` decades of the best infidelity."""
    inf = np.asarray(infidelities, float)
    best = inf.min() if best_infidelity is None else best_infidelity
    if np.isinf(d):
        return 1.0
    gap = np.log10(np.maximum(inf, 1e-300)) - np.log10(max(best, 1e-300))
    return float(np.mean(gap < d))


def difficulty_stats(conditions: dict, d_levels=(0.5, 1.0, 2.0)) -> dict:
    """``conditions`` maps a label (an eta or a gate time) to run infidelities."""
    return {key: {d: difficulty_q(v, d=d) for d in d_levels} for key, v in conditions.items()}


# --------------------------------------------------------------------------
# worst-case versus average-case objective


@dataclass
class ObjectiveComparison:
    gate_time: float
    worst_mode: CellResult
    average_mode: CellResult

    def distributions(self) -> dict:
        """Worst-case and mean sample infidelities of every run in both modes."""
        return {
            "worst_mode_worst": self.worst_mode.worst_case_infidelities(),
            "worst_mode_mean": self.worst_mode.mean_infidelities(),
            "average_mode_worst": self.average_mode.worst_case_infidelities(),
            "average_mode_mean": self.average_mode.mean_infidelities(),
        }

    @property
    def runtime_ratios(self) -> np.ndarray:
        return self.average_mode.wall_times() / self.worst_mode.wall_times()


def compare_objectives(model: TransmonModel, times, eta: float, n_starts: int,
                       config: ScpConfig, n_controls: int = 20, jobs: int = 1,
                       cache_dir=None) -> list[ObjectiveComparison]:
    """Same starts, same settings; only the objective (and acceptance) differ."""
    out = []
    for t in times:
        cells = []
        for mode in ("worst_case", "average_case"):
            spec = CellSpec(float(t), n_controls, ErrorEnsemble.amplitude(eta), n_starts, mode)
            if cache_dir is None:
                cells.append(run_cell(model, spec, config, jobs))
            else:
                name = f"objectives_T{t * 1e9:.0f}_N{n_controls}_eta{eta:g}_{mode}_s{n_starts}"
                cells.append(cached_cell(cache_dir, name, model, spec, config, jobs))
        out.append(ObjectiveComparison(float(t), *cells))
    return out


# --------------------------------------------------------------------------
# frequency and doubly robust


@dataclass
class FrequencyCampaign:
    times: np.ndarray
    frequency_robust: np.ndarray     # best worst-case sample infidelity per time
    doubly_robust: np.ndarray
    cells: dict


def robust_freq_campaign(model: TransmonModel, times, n_starts: int, config: ScpConfig,
                         freq_error: float = 2 * np.pi * 500e3, amp_error: float = 0.075,
                         n_controls: int = 25, jobs: int = 1, cache_dir=None,
                         doubly_times=None) -> FrequencyCampaign:
    """``freq_error`` is the shift (rad/s) of the qubit frequency."""
    times = np.asarray(times, float)
    doubly_times = times if doubly_times is None else np.asarray(doubly_times, float)
    freq = np.full(times.size, np.nan)
    dbl = np.full(times.size, np.nan)
    cells = {}
    for i, t in enumerate(times):
        kinds = [("freq", ErrorEnsemble.detuning(freq_error))]
        if np.any(np.isclose(doubly_times, t)):
            kinds.append(("doubly", ErrorEnsemble.doubly(amp_error, freq_error)))
        for kind, ens in kinds:
            spec = CellSpec(float(t), n_controls, ens, n_starts)
            if cache_dir is None:
                cell = run_cell(model, spec, config, jobs)
            else:
                name = (f"{kind}_T{t * 1e9:.0f}_N{n_controls}_f{freq_error / (2 * np.pi):.0f}"
                        f"_a{amp_error:g}_s{n_starts}")
                cell = cached_cell(cache_dir, name, model, spec, config, jobs)
            cells[(kind, float(t))] = cell
            val = cell.best.worst_case_infidelity
            if kind == "freq":
                freq[i] = val
            else:
                dbl[i] = val
    return FrequencyCampaign(times, freq, dbl, cells)
