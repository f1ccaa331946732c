import subprocess
import sys
import textwrap

import numpy as np
import pytest

from robustpulse.cli import EXPERIMENTS, load_campaign, main
from robustpulse.controls import read_pulse_csv
from robustpulse.experiments.output import read_csv

FAST = """
[signal]
gate_time_ns = 60
n_controls = 10

[scp]
n_starts = 2
max_iterations = 400
"""


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return str(p)


def only(out, pattern):
    found = sorted(out.glob(pattern))
    assert len(found) == 1, found
    return found[0]


class TestExitCodes:
    def test_missing_gate_time(self, tmp_path, capsys):
        cfg = write(tmp_path, "[signal]\nn_controls = 10\n")
        assert main(["optimize", "--config", cfg, "--out", str(tmp_path)]) == 2
        err = capsys.readouterr().err
        assert "signal.gate_time_ns" in err and "c.toml" in err

    def test_unknown_field_names_line(self, tmp_path, capsys):
        cfg = write(tmp_path, "[signal]\ngate_time_ns = 60\nbandwith_mhz = 3\n")
        assert main(["optimize", "--config", cfg]) == 2
        assert "c.toml:3" in capsys.readouterr().err

    def test_unknown_section(self, tmp_path):
        assert main(["optimize", "--config", write(tmp_path, "[signals]\nx = 1\n")]) == 2

    def test_bad_toml(self, tmp_path):
        assert main(["optimize", "--config", write(tmp_path, "[signal\n")]) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["optimize", "--config", str(tmp_path / "nope.toml")]) == 2

    def test_unknown_experiment_lists_names(self, capsys):
        assert main(["experiment", "bogus"]) == 2
        assert "rb-sim" in capsys.readouterr().err

    def test_bad_subcommand(self):
        assert main(["launch"]) == 2

    def test_help(self):
        assert main(["--help"]) == 0

    def test_malformed_pulse(self, tmp_path, capsys):
        pulse = tmp_path / "p.csv"
        pulse.write_text("t_ns,ex,ey\n0,0.1,0\n1,oops,0\n")
        assert main(["evaluate", str(pulse), "--out", str(tmp_path)]) == 2
        assert "row 3" in capsys.readouterr().err

    def test_negative_t1(self, tmp_path):
        assert main(["baseline", "drag", "--t1", "-1", "--out", str(tmp_path)]) == 2

    def test_drag_too_short(self, tmp_path):
        cfg = write(tmp_path, "[baseline]\nduration_ns = 10\n")
        assert main(["baseline", "drag", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_bad_scp_value(self, tmp_path):
        cfg = write(tmp_path, FAST + "incr_factor = 0.5\n")
        assert main(["optimize", "--config", cfg, "--out", str(tmp_path)]) == 2


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("opt")
    cfg = write(base, FAST)
    outs = []
    for name in ("a", "b"):
        out = base / name
        assert main(["optimize", "--config", cfg, "--seed", "11", "--out", str(out)]) == 0
        outs.append(out)
    return outs


class TestOptimize:
    def test_reaches_gate(self, runs):
        header, rows = read_csv(only(runs[0], "*_records.csv"))
        best = max(float(r[-1]) for r in rows)
        assert 1 - best <= 1e-8
        assert header[:2] == ["seed", "termination"] and len(rows) == 2

    def test_same_seed_same_bytes(self, runs):
        a, b = (only(o, "*_records.csv").read_bytes() for o in runs)
        assert a == b
        a, b = (only(o, "*_best_controls.csv").read_bytes() for o in runs)
        assert a == b

    def test_artifacts(self, runs):
        out = runs[0]
        meta = only(out, "optimize_*_11.json")
        assert "wall_times_s" in meta.read_text()
        sig = read_pulse_csv(only(out, "*_best_pulse.csv"))
        assert np.abs(sig.complex_envelope).max() <= 1.0
        only(out, "*_best_pulse.svg")

    def test_evaluate_round_trip(self, runs, tmp_path):
        pulse = only(runs[0], "*_best_pulse.csv")
        cfg = write(tmp_path, "[evaluate]\neta_max = 0.0\n")
        assert main(["evaluate", str(pulse), "--config", cfg, "--out", str(tmp_path)]) == 0
        _, rows = read_csv(only(tmp_path, "*_sweep.csv"))
        assert len(rows) == 1 and float(rows[0][2]) <= 1e-8


class TestOtherCommands:
    def test_baseline_drag_csv_only(self, tmp_path):
        assert main(["baseline", "drag", "--out", str(tmp_path), "--format", "csv"]) == 0
        assert not list(tmp_path.glob("*.svg"))
        _, rows = read_csv(only(tmp_path, "*_sweep.csv"))
        assert len(rows) == 41

    def test_baseline_creates_out_dir(self, tmp_path):
        out = tmp_path / "new" / "dir"
        assert main(["baseline", "bb1", "--out", str(out)]) == 0
        only(out, "*_pulse.csv")

    def test_baseline_bb1_svg_only(self, tmp_path):
        assert main(["baseline", "bb1", "--out", str(tmp_path), "--format", "svg"]) == 0
        assert not list(tmp_path.glob("*.csv"))
        only(tmp_path, "*_sweep.svg")

    def test_evaluate_with_relaxation(self, tmp_path):
        assert main(["baseline", "drag", "--out", str(tmp_path), "--format", "csv"]) == 0
        pulse = only(tmp_path, "*_pulse.csv")
        out = tmp_path / "ev"
        assert main(["evaluate", str(pulse), "--t1", "20e-6", "--out", str(out)]) == 0
        _, rows = read_csv(only(out, "*_sweep.csv"))
        # 72 ns against 20 us: relaxation costs about t / (3 T1)
        assert float(rows[20][2]) == pytest.approx(72e-9 / 20e-6 / 3, rel=0.3)

    def test_ape_experiment(self, tmp_path, capsys):
        cfg = write(tmp_path, """
            [experiment]
            repetitions = [0, 4, 8]
            n_corrections = 41
            correction_span = 0.02
        """)
        assert main(["experiment", "ape-sim", "--config", cfg, "--out", str(tmp_path)]) == 0
        assert "best" in capsys.readouterr().out

    def test_rb_experiment(self, tmp_path):
        cfg = write(tmp_path, """
            [experiment]
            scales = [1.0]
            lengths = [1, 5]
            sequences = 2
            shots = 64
        """)
        assert main(["experiment", "rb-sim", "--config", cfg, "--out", str(tmp_path)]) == 0
        only(tmp_path, "rb-sim_*.json")

    def test_unknown_experiment_key(self, tmp_path):
        cfg = write(tmp_path, "[experiment]\nwidth = 3\n")
        assert main(["experiment", "ape-sim", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_every_experiment_has_defaults(self):
        from robustpulse.cli_experiments import STUDIES

        assert set(STUDIES) == set(EXPERIMENTS)


def test_overrides_beat_file(tmp_path):
    cfg = write(tmp_path, "[run]\nseed = 3\n[output]\ndir = 'x'\n")
    camp = load_campaign(cfg, {"seed": 5, "out": str(tmp_path / "y")})
    assert camp.seed() == 5 and camp.out_dir() == tmp_path / "y"


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "robustpulse", "experiment", "nope"],
                         capture_output=True, text=True, cwd=tmp_path)
    assert res.returncode == 2
    assert "valid names" in res.stderr
