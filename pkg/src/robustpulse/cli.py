"""Command-line entry point: ``python -m robustpulse <command> ...``.

Campaign settings come from a TOML file.  Durations are given in ns and
frequencies in MHz (cycles, i.e. angular frequency divided by 2 pi); they
are converted to seconds and rad/s here and nowhere else.

Exit codes: 0 success, 1 runtime failure, 2 configuration or input error.
"""

from __future__ import annotations

import argparse
import functools
import re
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .baselines import make_bb1, make_drag
from .controls import (AMPLITUDE_CAP, Signal, apply_filter, build_transfer_matrix,
                       driving_angle, read_pulse_csv, sample_uniform_controls, write_pulse_csv)
from .errors import ConfigurationError, InputError, NumericalError
from .experiments import output
from .qmodel import MHZ, ErrorSample, LindbladConfig, TransmonModel, propagate_unitary
from .scp import ErrorEnsemble, ScpConfig, evaluate_worst_case, multistart

EXPERIMENTS = ("sweep-error", "heatmap", "competing-loss", "perturb", "difficulty",
               "objectives", "freq-robust", "rb-sim", "ape-sim")
NS = 1e-9
US = 1e-6


class ConfigError(Exception):
    """Bad configuration; carries a message already anchored to the file."""


# --------------------------------------------------------------------------
# configuration

_SECTIONS = {
    "model": {"levels", "omega01_ghz", "anharmonicity_mhz", "rabi_mhz", "drive_detuning_mhz"},
    "signal": {"gate_time_ns", "n_controls", "bandwidth_mhz", "upsample", "slew",
               "amplitude_cap", "padding_rule"},
    "ensemble": {"etas", "detunings_mhz", "include_zero", "doubly"},
    "scp": {f.name for f in fields(ScpConfig)} | {"n_starts"},
    "experiment": None,   # free-form, checked per experiment
    "baseline": None,
    "evaluate": {"eta_max", "n_grid", "detuning_mhz", "t1_us", "gate_time_ns", "n_controls"},
    "output": {"dir", "format"},
    "run": {"seed", "jobs"},
}


@dataclass
class Campaign:
    raw: dict
    text: str
    path: str
    model: TransmonModel = field(init=False)
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        self.model = self._model()

    # -- lookup helpers ----------------------------------------------------
    def where(self, section: str, key: str | None = None) -> str:
        """``file:line`` of a key (or section header) for error messages."""
        pat = (rf"^\s*\[{re.escape(section)}\]" if key is None
               else rf"^\s*{re.escape(key)}\s*=")
        start = 0
        if key is not None:
            m = re.search(rf"^\s*\[{re.escape(section)}\]", self.text, re.M)
            start = m.end() if m else 0
        m = re.search(pat, self.text[start:], re.M)
        if not m:
            return self.path
        line = self.text[:start + m.start()].count("\n") + 1
        return f"{self.path}:{line}"

    def get(self, section: str, key: str, default=None, required: bool = False):
        sec = self.raw.get(section, {})
        if key not in sec:
            if required:
                raise ConfigError(f"{self.where(section)}: missing required field "
                                  f"'{section}.{key}'")
            return default
        return sec[key]

    def number(self, section, key, default=None, required=False, positive=False,
               integer=False):
        v = self.get(section, key, default, required)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{self.where(section, key)}: '{section}.{key}' must be a number")
        if integer and int(v) != v:
            raise ConfigError(f"{self.where(section, key)}: '{section}.{key}' must be an integer")
        if positive and not v > 0:
            raise ConfigError(f"{self.where(section, key)}: '{section}.{key}' must be positive")
        return int(v) if integer else float(v)

    def numbers(self, section, key, default=None, required=False):
        v = self.get(section, key, default, required)
        if v is None:
            return None
        if not isinstance(v, list) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
            raise ConfigError(f"{self.where(section, key)}: '{section}.{key}' must be a "
                              "list of numbers")
        return [float(x) for x in v]

    # -- blocks ------------------------------------------------------------
    def _model(self) -> TransmonModel:
        levels = self.number("model", "levels", 3, integer=True)
        rabi = self.numbers("model", "rabi_mhz", [15.0, 15.0])
        if levels == 2:
            rabi = rabi[:1]
        omega01 = self.number("model", "omega01_ghz", 4.974, positive=True) * 2 * np.pi * 1e9
        det = self.number("model", "drive_detuning_mhz", 0.0) * MHZ
        try:
            return TransmonModel(levels, omega01, omega01 - det,
                                 self.number("model", "anharmonicity_mhz", 345.0) * MHZ,
                                 tuple(r * MHZ for r in rabi))
        except ConfigurationError as exc:
            raise ConfigError(f"{self.where('model')}: {exc}") from None

    def seed(self) -> int:
        if "seed" in self.overrides:
            return self.overrides["seed"]
        return self.number("run", "seed", 0, integer=True)

    def jobs(self) -> int:
        if "jobs" in self.overrides:
            return self.overrides["jobs"]
        return self.number("run", "jobs", 1, integer=True, positive=True)

    def gate_time(self, section="signal", required=True) -> float:
        v = self.number(section, "gate_time_ns", None, required=required, positive=True)
        return None if v is None else v * NS

    def transfer_matrix(self, gate_time=None, n_controls=None):
        gate_time = gate_time or self.gate_time()
        n = n_controls or self.number("signal", "n_controls", 25, integer=True, positive=True)
        bw = self.number("signal", "bandwidth_mhz", 24.0, positive=True) * MHZ
        up = self.number("signal", "upsample", 4, integer=True, positive=True)
        rule = self.get("signal", "padding_rule", "tail_sum")
        try:
            return build_transfer_matrix(int(n), gate_time, bw, int(up), rule)
        except ConfigurationError as exc:
            raise ConfigError(f"{self.where('signal')}: {exc}") from None

    def slew(self) -> float:
        return self.number("signal", "slew", 1.0, positive=True)

    def amplitude_cap(self) -> float:
        return self.number("signal", "amplitude_cap", AMPLITUDE_CAP, positive=True)

    def sampler(self):
        return functools.partial(_sampler, slew=self.slew(), cap=self.amplitude_cap())

    def ensemble(self) -> ErrorEnsemble:
        etas = self.numbers("ensemble", "etas", [0.0])
        dets = [d * MHZ for d in self.numbers("ensemble", "detunings_mhz", [])]
        include_zero = bool(self.get("ensemble", "include_zero", True))
        try:
            if self.get("ensemble", "doubly", False):
                if len(etas) != 1 or len(dets) != 1:
                    raise ConfigError(f"{self.where('ensemble', 'doubly')}: doubly robust "
                                      "needs one eta and one detuning")
                return ErrorEnsemble.doubly(etas[0], dets[0])
            samples = []
            for e in etas:
                if e == 0:
                    continue
                samples += [ErrorSample(-e, 0.0), ErrorSample(e, 0.0)]
            for d in dets:
                if d == 0:
                    continue
                samples += [ErrorSample(0.0, -d), ErrorSample(0.0, d)]
            if include_zero or not samples:
                samples.insert(len(samples) // 2, ErrorSample(0.0, 0.0))
            samples = list(dict.fromkeys(samples))
            return ErrorEnsemble(tuple(samples))
        except ValueError as exc:
            raise ConfigError(f"{self.where('ensemble')}: {exc}") from None

    def scp_config(self, **extra) -> ScpConfig:
        sec = {k: v for k, v in self.raw.get("scp", {}).items() if k != "n_starts"}
        sec.setdefault("rng_seed", self.seed())
        sec.update(extra)
        try:
            return ScpConfig(**sec)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.where('scp')}: {exc}") from None

    def n_starts(self) -> int:
        return self.number("scp", "n_starts", 5000, integer=True, positive=True)

    def out_dir(self) -> Path:
        if "out" in self.overrides:
            return Path(self.overrides["out"])
        return Path(self.get("output", "dir", "results"))

    def fmt(self) -> str:
        f = self.overrides.get("format") or self.get("output", "format", "both")
        if f not in ("csv", "svg", "both"):
            raise ConfigError(f"{self.where('output', 'format')}: format must be csv, svg "
                              "or both")
        return f

    def effective(self) -> dict:
        """Defaults filled in, for the metadata sidecar."""
        m = self.model
        return {
            "source": self.path,
            "raw": self.raw,
            "overrides": self.overrides,
            "model": {"levels": m.num_levels, "omega01_ghz": m.omega01 / (2 * np.pi * 1e9),
                      "drive_detuning_mhz": (m.omega01 - m.drive_freq) / MHZ,
                      "anharmonicity_mhz": m.anharmonicity / MHZ,
                      "rabi_mhz": [r / MHZ for r in m.rabi_rates]},
            "seed": self.seed(),
            "jobs": self.jobs(),
        }


def _sampler(rng, n_controls, slew, cap):
    return sample_uniform_controls(rng, n_controls, slew, cap)


def load_campaign(path, overrides=None) -> Campaign:
    path = str(path) if path else "<defaults>"
    text = ""
    raw = {}
    if path != "<defaults>":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    camp = Campaign.__new__(Campaign)
    camp.raw, camp.text, camp.path, camp.overrides = raw, text, path, dict(overrides or {})
    for section, keys in raw.items():
        if section not in _SECTIONS:
            raise ConfigError(f"{camp.where(section)}: unknown section [{section}]")
        if not isinstance(keys, dict):
            raise ConfigError(f"{camp.where(section, section)}: '{section}' must be a table")
        allowed = _SECTIONS[section]
        if allowed is not None:
            for key in keys:
                if key not in allowed:
                    raise ConfigError(f"{camp.where(section, key)}: unknown field "
                                      f"'{section}.{key}'")
    camp.__post_init__()
    return camp


# --------------------------------------------------------------------------
# shared output helpers


class Writer:
    def __init__(self, camp: Campaign, experiment: str):
        self.camp = camp
        self.experiment = experiment
        self.dir = camp.out_dir()
        self.stem = output.artifact_stem(experiment, camp.seed())
        self.fmt = camp.fmt()
        self.files = []

    def csv(self, suffix, header, rows):
        if self.fmt in ("csv", "both"):
            self.files.append(output.write_csv(self.dir / f"{self.stem}_{suffix}.csv",
                                               header, rows))

    def pulse(self, suffix, signal: Signal):
        if self.fmt in ("csv", "both"):
            self.files.append(write_pulse_csv(self.dir / f"{self.stem}_{suffix}.csv", signal))

    def svg(self, suffix, fn, *args, **kwargs):
        if self.fmt in ("svg", "both"):
            self.files.append(fn(self.dir / f"{self.stem}_{suffix}.svg", *args, **kwargs))

    def metadata(self, seeds, results=None, config=None):
        cfg = self.camp.effective()
        if config:
            cfg["resolved"] = config
        self.files.append(output.write_metadata(self.dir / f"{self.stem}.json", self.experiment,
                                                cfg, seeds, results))

    def report(self):
        for f in self.files:
            print(f"wrote {f}")


def _record_rows(records):
    rows = []
    for r in records:
        rows.append([r.seed, r.termination, r.iterations_used, r.accepted_steps,
                     r.rejected_steps, *[float(f) for f in r.per_sample_fidelities],
                     r.worst_case_fidelity])
    return rows


def _record_header(ensemble):
    return (["seed", "termination", "iterations", "accepted", "rejected"]
            + [f"F_eta{s.eta:+g}_det{s.detuning / MHZ:+g}MHz" for s in ensemble.samples]
            + ["worst_case_fidelity"])


def _sweep_rows(curve):
    return [[float(e), float(f), float(1 - f)] for e, f in zip(curve.etas, curve.fidelities)]


# --------------------------------------------------------------------------
# commands


def cmd_optimize(camp: Campaign) -> int:
    tm = camp.transfer_matrix()
    ens = camp.ensemble()
    cfg = camp.scp_config()
    res = multistart(camp.model, tm, ens, cfg, camp.n_starts(), camp.sampler(), camp.jobs())
    w = Writer(camp, "optimize")
    w.csv("records", _record_header(ens), _record_rows(res.records))
    best = res.best
    sig = apply_filter(tm, best.final_controls)
    w.pulse("best_pulse", sig)
    w.csv("best_controls", ["index", "cx", "cy"],
          [[i, x, y] for i, (x, y) in enumerate(zip(best.final_controls.cx,
                                                     best.final_controls.cy))])
    w.csv("best_angle", ["t_ns", "angle_rad"],
          [[t * 1e9, a] for t, a in zip(sig.times, driving_angle(sig))])
    w.svg("best_pulse", output.line_chart_svg,
          {"ex": (sig.times * 1e9, sig.ex), "ey": (sig.times * 1e9, sig.ey)},
          "time (ns)", "amplitude", "best pulse")
    w.metadata([r.seed for r in res.records], {
        "best_worst_case_infidelity": best.worst_case_infidelity,
        "best_seed": best.seed,
        "wall_times_s": [r.wall_time for r in res.records],
        "pad_count": tm.pad_count,
        "signal_duration_ns": tm.duration * 1e9,
    }, {"scp": cfg, "n_starts": camp.n_starts()})
    w.report()
    print(f"best worst-case infidelity: {best.worst_case_infidelity:.3e} (seed {best.seed})")
    return 0


def cmd_evaluate(camp: Campaign, pulse_path: str, t1: float | None) -> int:
    try:
        sig = read_pulse_csv(pulse_path)
    except OSError as exc:
        raise InputError(f"{pulse_path}: cannot read pulse file ({exc.strerror})") from None
    eta_max = camp.number("evaluate", "eta_max", 0.05)
    n_grid = camp.number("evaluate", "n_grid", 41, integer=True)
    det = camp.number("evaluate", "detuning_mhz", 0.0) * MHZ
    if t1 is None and camp.get("evaluate", "t1_us") is not None:
        t1 = camp.number("evaluate", "t1_us", positive=True) * US
    lind = LindbladConfig(t1=t1) if t1 else None
    try:
        curve = evaluate_worst_case(camp.model, None, sig, eta_max, n_grid, det, lind)
    except ValueError as exc:
        raise ConfigError(f"{camp.where('evaluate')}: {exc}") from None
    w = Writer(camp, "evaluate")
    w.csv("sweep", ["eta", "fidelity", "infidelity"], _sweep_rows(curve))
    w.svg("sweep", output.line_chart_svg,
          {"infidelity": (curve.etas, np.maximum(1 - curve.fidelities, 1e-16))},
          "amplitude error eta", "1 - F_A", "error sweep", logy=True)
    w.metadata([], {"worst_case_infidelity": curve.worst_infidelity,
                    "max_leakage": propagate_unitary(camp.model, sig).max_leakage,
                    "pulse": str(pulse_path), "t1_s": t1})
    w.report()
    print(f"worst-case infidelity over |eta| <= {eta_max:g}: {curve.worst_infidelity:.3e}")
    return 0


def cmd_baseline(camp: Campaign, kind: str) -> int:
    w = Writer(camp, f"baseline-{kind}")
    if kind == "drag":
        dur = camp.number("baseline", "duration_ns", 72.0, positive=True) * NS
        q = camp.number("baseline", "quadrature_scale", 1.0)
        try:
            pulse = make_drag(camp.model, dur, quadrature_scale=q)
        except ConfigurationError as exc:
            raise ConfigError(f"{camp.where('baseline')}: {exc}") from None
        sig, info = pulse.signal, {"beta": pulse.drag_coefficient, "width_ns": pulse.width / NS}
    elif kind == "bb1":
        theta = camp.number("baseline", "theta_deg", 90.0)
        dur = camp.number("baseline", "duration_ns", None)
        try:
            seq = make_bb1(camp.model, theta, None if dur is None else dur * NS)
        except ConfigurationError as exc:
            raise ConfigError(f"{camp.where('baseline')}: {exc}") from None
        sig = seq.signal
        info = {"phi1_deg": seq.phi1_deg, "phi2_deg": seq.phi2_deg, "amplitude": seq.amplitude,
                "duration_ns": seq.duration / NS}
    else:  # guarded by argparse
        raise ConfigError(f"unknown baseline {kind!r}")
    eta_max = camp.number("evaluate", "eta_max", 0.05)
    curve = evaluate_worst_case(camp.model, None, sig, eta_max, 41)
    w.pulse("pulse", sig)
    w.csv("sweep", ["eta", "fidelity", "infidelity"], _sweep_rows(curve))
    w.svg("sweep", output.line_chart_svg,
          {kind: (curve.etas, np.maximum(1 - curve.fidelities, 1e-16))},
          "amplitude error eta", "1 - F_A", f"{kind} error sweep", logy=True)
    info["worst_case_infidelity"] = curve.worst_infidelity
    w.metadata([], info)
    w.report()
    print(f"{kind}: worst-case infidelity over |eta| <= {eta_max:g}: {curve.worst_infidelity:.3e}")
    return 0


def cmd_experiment(camp: Campaign, name: str) -> int:
    from . import cli_experiments

    return cli_experiments.run(camp, name, Writer(camp, name))


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML campaign file")
    common.add_argument("--seed", type=int, help="master seed (overrides run.seed)")
    common.add_argument("--jobs", type=int, help="worker processes")
    common.add_argument("--out", help="output directory")
    common.add_argument("--t1", type=float, help="relaxation time in seconds (Lindblad)")
    common.add_argument("--format", choices=("csv", "svg", "both"))

    p = argparse.ArgumentParser(prog="robustpulse", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("optimize", parents=[common], help="multistart SCP campaign")
    ev = sub.add_parser("evaluate", parents=[common], help="error sweep of a pulse file")
    ev.add_argument("pulse", help="pulse CSV (t_ns,ex,ey)")
    ex = sub.add_parser("experiment", parents=[common], help="run a named study")
    ex.add_argument("name", help="one of: " + ", ".join(EXPERIMENTS))
    bl = sub.add_parser("baseline", parents=[common], help="reference pulses")
    bl.add_argument("kind", choices=("drag", "bb1"))
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else 2
    overrides = {k: getattr(args, k) for k in ("seed", "jobs", "out", "format")
                 if getattr(args, k) is not None}
    try:
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        if args.command == "experiment" and args.name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {args.name!r}; valid names: "
                              + ", ".join(EXPERIMENTS))
        camp = load_campaign(args.config, overrides)
        if args.t1 is not None:
            if not args.t1 > 0:
                raise ConfigError("--t1 must be positive (seconds)")
            camp.overrides["t1"] = args.t1
        if args.command == "optimize":
            return cmd_optimize(camp)
        if args.command == "evaluate":
            return cmd_evaluate(camp, args.pulse, args.t1)
        if args.command == "baseline":
            return cmd_baseline(camp, args.kind)
        return cmd_experiment(camp, args.name)
    except (ConfigError, ConfigurationError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, RuntimeError, FloatingPointError, ValueError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
