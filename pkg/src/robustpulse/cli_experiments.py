"""Named studies behind ``robustpulse experiment <name>``.

Each study reads its knobs from the ``[experiment]`` table; the defaults are
small enough for a laptop.  Durations are in ns, T1 in microseconds.
"""

from __future__ import annotations

import numpy as np

from .baselines import make_drag
from .controls import read_pulse_csv
from .experiments import output
from .experiments.campaigns import (CellSpec, LibraryPulse, cached_cell, compare_objectives,
                                    competing_loss_map, difficulty_stats, fit_quadratic,
                                    heatmap_time_controls, robust_freq_campaign, run_cell,
                                    sweep_error)
from .experiments.perturb import PerturbationConfig, perturb_reoptimize
from .experiments.rb import ErrorInjection, simulate_ape, simulate_rb
from .qmodel import MHZ, LindbladConfig
from .scp import ErrorEnsemble

NS = 1e-9
US = 1e-6

# key -> default; anything else in [experiment] is rejected
_KNOBS = {
    "sweep-error": {"gate_time_ns": 150.0, "n_controls": 25, "etas": [0.025, 0.05, 0.1],
                    "n_starts": 4, "n_grid": 41},
    "heatmap": {"times_ns": [100.0, 150.0, 200.0], "controls": [10, 25, 40], "eta": 0.05,
                "n_starts": 3, "n_grid": 41},
    "competing-loss": {"robust_times_ns": [120.0, 150.0, 200.0, 300.0], "opt_etas": [0.05, 0.1],
                       "nonrobust_time_ns": 60.0, "n_controls": 25, "n_starts": 3,
                       "t1_us": [20.0, 50.0, 100.0, 200.0, 500.0],
                       "etas": [0.0, 0.01, 0.02, 0.03, 0.05, 0.07, 0.1]},
    "perturb": {"gate_time_ns": 130.0, "n_controls": 25, "eta": 0.05, "n_starts": 1,
                "base_iterations": 300, "seeds": 5, "cycles": 3, "magnitude": 0.01,
                "target_inflation": 10.0},
    "difficulty": {"gate_time_ns": 130.0, "n_controls": 25, "etas": [0.025, 0.05, 0.1],
                   "n_starts": 10, "d_levels": [0.5, 1.0, 2.0]},
    "objectives": {"times_ns": [130.0, 150.0, 200.0], "eta": 0.1, "n_controls": 20,
                   "n_starts": 5},
    "freq-robust": {"times_ns": [150.0, 175.0, 200.0], "freq_error_mhz": 0.5,
                    "amp_error": 0.075, "n_controls": 25, "n_starts": 3},
    "rb-sim": {"pulse": "", "drag_duration_ns": 72.0, "quadrature_scale": 0.5,
               "scales": [0.9, 0.95, 1.0, 1.05, 1.1], "imbalance": 1.0, "phase_error": 0.0,
               "lengths": [1, 10, 25, 50, 100, 200], "sequences": 6, "shots": 1024},
    "ape-sim": {"pulse": "", "drag_duration_ns": 72.0, "quadrature_scale": 1.0,
                "phase_error": 0.01, "repetitions": [0, 2, 4, 8, 16],
                "correction_span": 0.05, "n_corrections": 101},
}


class Params:
    def __init__(self, camp, name):
        from .cli import ConfigError

        self.camp = camp
        self.knobs = _KNOBS[name]
        sec = camp.raw.get("experiment", {})
        for key in sec:
            if key not in self.knobs and key not in ("cache_dir", "max_iterations"):
                raise ConfigError(f"{camp.where('experiment', key)}: unknown field "
                                  f"'experiment.{key}' for {name}")

    def __getitem__(self, key):
        default = self.knobs[key]
        if isinstance(default, list):
            return self.camp.numbers("experiment", key, default)
        if isinstance(default, str):
            return str(self.camp.get("experiment", key, default))
        if isinstance(default, int):
            return self.camp.number("experiment", key, default, integer=True, positive=True)
        return self.camp.number("experiment", key, default)

    @property
    def cache_dir(self):
        return self.camp.get("experiment", "cache_dir")

    def scp(self):
        extra = {}
        mi = self.camp.get("experiment", "max_iterations")
        if mi is not None:
            extra["max_iterations"] = int(mi)
        return self.camp.scp_config(**extra)


def _cell(camp, p, name, spec, cfg):
    if p.cache_dir:
        return cached_cell(p.cache_dir, name, camp.model, spec, cfg, camp.jobs())
    return run_cell(camp.model, spec, cfg, camp.jobs())


def _pulse(camp, p):
    path = p["pulse"]
    if path:
        return read_pulse_csv(path), {"pulse": path}
    drag = make_drag(camp.model, p["drag_duration_ns"] * NS,
                     quadrature_scale=p["quadrature_scale"])
    return drag.signal, {"pulse": "drag", "drag_duration_ns": p["drag_duration_ns"],
                         "quadrature_scale": p["quadrature_scale"],
                         "beta": drag.drag_coefficient}


def _lind(camp):
    t1 = camp.overrides.get("t1")
    return (LindbladConfig(t1=t1) if t1 else None), t1


def _floor(v):
    return np.maximum(np.asarray(v, float), 1e-16)


# --------------------------------------------------------------------------


def sweep_error_study(camp, p, w):
    cfg = p.scp()
    t = p["gate_time_ns"] * NS
    pulses, seeds = {}, []
    for eta in p["etas"]:
        spec = CellSpec(t, p["n_controls"], ErrorEnsemble.amplitude(eta), p["n_starts"])
        cell = _cell(camp, p, f"sweep_T{p['gate_time_ns']:g}_eta{eta:g}", spec, cfg)
        pulses[eta] = (cell.tm, cell.best_controls)
        seeds += [r.seed for r in cell.records]
    table = sweep_error(camp.model, pulses, p["n_grid"])
    a_solid, r2_solid = fit_quadratic(table.etas, table.solid)
    w.csv("summary", ["eta", "solid_infidelity", "dashed_infidelity"],
          [[e, s, d] for e, s, d in zip(table.etas, table.solid, table.dashed)])
    w.csv("cross", ["optimized_eta"] + [f"judged_{e:g}" for e in table.etas],
          [[e, *row] for e, row in zip(table.etas, table.cross)])
    w.svg("summary", output.line_chart_svg,
          {"optimized for eta": (table.etas, _floor(table.solid)),
           "best of all": (table.etas, _floor(table.dashed))},
          "error range eta", "worst-case 1 - F_A", "worst case versus error range", logy=True)
    return seeds, {"quadratic_A": a_solid, "quadratic_r2": r2_solid}


def heatmap_study(camp, p, w):
    times = np.array(p["times_ns"]) * NS
    res = heatmap_time_controls(camp.model, times, [int(c) for c in p["controls"]], p["eta"],
                                p["n_starts"], p.scp(), camp.jobs(), p["n_grid"], p.cache_dir)
    rows = [[t * 1e9, int(nc), res.infidelity[i, j], res.leakage[i, j]]
            for i, t in enumerate(res.times) for j, nc in enumerate(res.controls)]
    w.csv("grid", ["gate_time_ns", "n_controls", "worst_infidelity", "max_leakage"], rows)
    w.svg("grid", output.heatmap_svg, res.infidelity, [str(c) for c in res.controls],
          [f"{t * 1e9:g}" for t in res.times], "controls", "gate time (ns)",
          "worst-case infidelity", log=True)
    return [], {}


def competing_loss_study(camp, p, w):
    cfg = p.scp()
    nc = p["n_controls"]
    library = []
    for t_ns in p["robust_times_ns"]:
        for eta in p["opt_etas"]:
            spec = CellSpec(t_ns * NS, nc, ErrorEnsemble.amplitude(eta), p["n_starts"])
            cell = _cell(camp, p, f"competing_T{t_ns:g}_eta{eta:g}", spec, cfg)
            library.append(LibraryPulse(f"robust_T{t_ns:g}_eta{eta:g}", t_ns * NS,
                                        cell.signal(), True))
    t0 = p["nonrobust_time_ns"]
    cell = _cell(camp, p, f"competing_T{t0:g}_nominal",
                 CellSpec(t0 * NS, nc, ErrorEnsemble.nominal(), p["n_starts"]), cfg)
    library.append(LibraryPulse(f"nonrobust_T{t0:g}", t0 * NS, cell.signal(), False))
    t1s = np.array(p["t1_us"]) * US
    res = competing_loss_map(camp.model, library, t1s, p["etas"])
    rows = [[t1 * 1e6, e, res.best_infidelity[a, b], res.best_gate_time[a, b] * 1e9,
             res.ratio[a, b]]
            for a, t1 in enumerate(res.t1_values) for b, e in enumerate(res.etas)]
    w.csv("map", ["t1_us", "eta", "best_infidelity", "winner_gate_time_ns",
                  "nonrobust_over_robust"], rows)
    w.csv("boundary", ["t1_us", "eta_boundary", "robust_gate_time_ns"],
          [[t1 * 1e6, b, g * 1e9] for t1, b, g in zip(res.t1_values, res.boundary,
                                                      res.boundary_gate_time)])
    w.svg("map", output.heatmap_svg, res.best_gate_time * 1e9, [f"{e:g}" for e in res.etas],
          [f"{t * 1e6:g}" for t in res.t1_values], "eta", "T1 (us)",
          "winning gate time (ns)")
    return [], {"k": res.k, "r2": res.r2}


def perturb_study(camp, p, w):
    from dataclasses import replace

    cfg = p.scp()
    spec = CellSpec(p["gate_time_ns"] * NS, p["n_controls"], ErrorEnsemble.amplitude(p["eta"]),
                    p["n_starts"])
    base = _cell(camp, p, f"perturb_base_T{p['gate_time_ns']:g}_eta{p['eta']:g}", spec,
                 replace(cfg, max_iterations=p["base_iterations"]))
    pcfg = PerturbationConfig(magnitude=p["magnitude"] * np.sqrt(2.0), cycles=p["cycles"],
                              target_inflation=p["target_inflation"])
    rows, gains = [], []
    seeds = list(range(camp.seed(), camp.seed() + p["seeds"]))
    for s in seeds:
        res = perturb_reoptimize(camp.model, base.tm, spec.ensemble, base.best_controls, cfg,
                                 pcfg, seed=s)
        gains.append(res.improvement)
        for c, (inf, rounds, dist) in enumerate(zip(res.cycle_infidelities, res.rounds,
                                                    res.distances)):
            rows.append([s, c + 1, res.initial_infidelity, inf, rounds, dist])
    w.csv("cycles", ["seed", "cycle", "initial_infidelity", "best_infidelity", "kick_rounds",
                     "manhattan_distance"], rows)
    w.svg("gains", output.line_chart_svg,
          {"improvement": (np.array(seeds, float), _floor(gains))}, "seed",
          "initial / final infidelity", "perturb and reoptimize", logy=True)
    return seeds, {"median_improvement": float(np.median(gains))}


def difficulty_study(camp, p, w):
    cfg = p.scp()
    t = p["gate_time_ns"] * NS
    runs, seeds = {}, []
    for eta in p["etas"]:
        spec = CellSpec(t, p["n_controls"], ErrorEnsemble.amplitude(eta), p["n_starts"])
        cell = _cell(camp, p, f"difficulty_T{p['gate_time_ns']:g}_eta{eta:g}", spec, cfg)
        runs[eta] = cell.worst_case_infidelities()
        seeds += [r.seed for r in cell.records]
    stats = difficulty_stats(runs, tuple(p["d_levels"]))
    w.csv("q", ["eta"] + [f"Q_d{d:g}" for d in p["d_levels"]],
          [[eta, *[stats[eta][d] for d in p["d_levels"]]] for eta in runs])
    w.csv("runs", ["eta", "run", "worst_infidelity"],
          [[eta, i, v] for eta, vals in runs.items() for i, v in enumerate(vals)])
    w.svg("q", output.line_chart_svg,
          {f"d={d:g}": (np.array(list(runs)), np.array([stats[e][d] for e in runs]))
           for d in p["d_levels"]}, "eta", "Q", "fraction of runs near the best")
    return seeds, {}


def objectives_study(camp, p, w):
    comps = compare_objectives(camp.model, np.array(p["times_ns"]) * NS, p["eta"],
                               p["n_starts"], p.scp(), p["n_controls"], camp.jobs(),
                               p.cache_dir)
    rows, ratios = [], {}
    for comp in comps:
        dist = comp.distributions()
        for key, vals in dist.items():
            for i, v in enumerate(vals):
                rows.append([comp.gate_time * 1e9, key, i, v])
        ratios[f"{comp.gate_time * 1e9:g}"] = float(np.median(comp.runtime_ratios))
    w.csv("runs", ["gate_time_ns", "series", "run", "infidelity"], rows)
    w.svg("medians", output.line_chart_svg,
          {key: (np.array([c.gate_time * 1e9 for c in comps]),
                 _floor([np.median(c.distributions()[key]) for c in comps]))
           for key in comps[0].distributions()},
          "gate time (ns)", "median infidelity", "worst-case versus average objective",
          logy=True)
    return [], {"median_runtime_ratio_average_over_worst": ratios}


def freq_robust_study(camp, p, w):
    res = robust_freq_campaign(camp.model, np.array(p["times_ns"]) * NS, p["n_starts"],
                               p.scp(), p["freq_error_mhz"] * MHZ, p["amp_error"],
                               p["n_controls"], camp.jobs(), p.cache_dir)
    w.csv("summary", ["gate_time_ns", "frequency_robust", "doubly_robust"],
          [[t * 1e9, f, d] for t, f, d in zip(res.times, res.frequency_robust,
                                              res.doubly_robust)])
    w.svg("summary", output.line_chart_svg,
          {"frequency": (res.times * 1e9, _floor(res.frequency_robust)),
           "doubly": (res.times * 1e9, _floor(res.doubly_robust))},
          "gate time (ns)", "worst sample infidelity", "frequency robust pulses", logy=True)
    return [], {}


def rb_study(camp, p, w):
    pulse, info = _pulse(camp, p)
    lind, t1 = _lind(camp)
    lengths = [int(x) for x in p["lengths"]]
    rows, curves, summary = [], [], {}
    for k, d in enumerate(p["scales"]):
        inj = ErrorInjection(d, p["imbalance"], p["phase_error"])
        res = simulate_rb(camp.model, pulse, lengths, inj, p["sequences"], p["shots"],
                          camp.seed() + k, lind)
        rows.append([d, res.epg, res.p, res.a, res.b])
        curves.append((d, res))
        summary[f"{d:g}"] = res.epg
    w.csv("epg", ["global_scale", "epg", "p", "A", "B"], rows)
    w.csv("decay", ["global_scale", "length", "mean_survival"],
          [[d, int(L), s] for d, res in curves for L, s in zip(res.lengths, res.mean_survival)])
    w.svg("epg", output.line_chart_svg,
          {"EPG": (np.array(p["scales"]), _floor([r[1] for r in rows]))},
          "global amplitude scale d", "error per gate", "randomized benchmarking", logy=True)
    info.update({"epg": summary, "t1_s": t1})
    return [camp.seed() + k for k in range(len(p["scales"]))], info


def ape_study(camp, p, w):
    pulse, info = _pulse(camp, p)
    lind, t1 = _lind(camp)
    span = p["correction_span"]
    corr = np.linspace(-span, span, p["n_corrections"])
    reps = [int(n) for n in p["repetitions"]]
    res = simulate_ape(camp.model, pulse, reps, corr,
                       ErrorInjection(phase_error=p["phase_error"]), lind)
    w.csv("populations", ["repetitions", "correction_rad", "ground_population"],
          [[n, c, res.populations[i, j]] for i, n in enumerate(res.repetitions)
           for j, c in enumerate(res.corrections)])
    w.svg("populations", output.line_chart_svg,
          {f"N={n}": (res.corrections, res.populations[i]) for i, n in enumerate(res.repetitions)},
          "correction phase (rad)", "ground population", "amplified phase error")
    info.update({"best_correction_rad": res.best_correction, "t1_s": t1,
                 "injected_phase_error": p["phase_error"]})
    return [], info


STUDIES = {
    "sweep-error": sweep_error_study,
    "heatmap": heatmap_study,
    "competing-loss": competing_loss_study,
    "perturb": perturb_study,
    "difficulty": difficulty_study,
    "objectives": objectives_study,
    "freq-robust": freq_robust_study,
    "rb-sim": rb_study,
    "ape-sim": ape_study,
}


def run(camp, name, writer) -> int:
    p = Params(camp, name)
    seeds, results = STUDIES[name](camp, p, writer)
    resolved = {k: p[k] for k in p.knobs}
    writer.metadata(seeds, results, {"experiment": resolved, "scp": p.scp()})
    writer.report()
    for key, val in results.items():
        if not isinstance(val, dict):
            print(f"{key}: {val}")
    return 0
