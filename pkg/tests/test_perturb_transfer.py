import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from robustpulse import ControlSet, ErrorEnsemble, InputError, ScpConfig
from robustpulse.controls import (Signal, build_transfer_matrix, check_feasible, driving_angle,
                                  sample_uniform_controls)
from robustpulse.experiments.perturb import (PerturbationConfig, manhattan_distance,
                                             perturb_controls, perturb_reoptimize,
                                             perturb_until_moved)
from robustpulse.experiments.transfer import (AmplitudeTransfer, amplitude_transfer_map,
                                              saturating_knots)
from robustpulse.qmodel import MHZ
from robustpulse.scp import FidelityEvaluator, run_scp


class TestPerturbation:
    def test_ten_thousand_kicks_stay_feasible(self):
        rng = np.random.default_rng(0)
        for i in range(10_000):
            if i % 100 == 0:
                # fresh start, sometimes pinned against the bounds
                c = sample_uniform_controls(rng, 25, slew_limit=rng.choice([0.05, 0.3, 1.0]))
                if i % 200 == 0:
                    c = ControlSet(np.sign(c.cx) * c.amplitude_cap, c.cy, 2.0)
            c = perturb_controls(c, rng, rng.uniform(0, 0.2))
            assert check_feasible(c)

    @given(st.integers(0, 2**31), st.floats(0.0, 0.5))
    @settings(max_examples=50, deadline=None)
    def test_kick_bounded(self, seed, mag):
        rng = np.random.default_rng(seed)
        c = sample_uniform_controls(rng, 12)
        d = perturb_controls(c, rng, mag)
        assert np.all(np.abs(d.vector - c.vector) <= mag + 1e-15)

    def test_zero_magnitude_is_identity(self, rng):
        c = sample_uniform_controls(rng, 10)
        assert_allclose(perturb_controls(c, rng, 0.0).vector, c.vector)

    def test_distance(self, rng):
        tm = build_transfer_matrix(10, 80e-9, 24 * MHZ)
        c = sample_uniform_controls(rng, 10)
        assert manhattan_distance(tm, c, c) == 0.0
        assert manhattan_distance(tm, c, perturb_controls(c, rng, 0.05)) > 0

    def test_until_moved_reaches_target(self, model, rng):
        tm = build_transfer_matrix(10, 60e-9, 24 * MHZ)
        c0 = sample_uniform_controls(rng, 10)
        rec = run_scp(model, tm, ErrorEnsemble.nominal(), ScpConfig(max_iterations=300), c0)
        ev = FidelityEvaluator(model, tm, [(0, 0)])
        kicked, rounds, inf = perturb_until_moved(ev, rec.final_controls, rng,
                                                  PerturbationConfig())
        assert rounds >= 1
        assert np.log10(inf / rec.worst_case_infidelity) >= 1 - 1e-12

    def test_reoptimize_never_worse(self, model):
        tm = build_transfer_matrix(10, 100e-9, 24 * MHZ)
        ens = ErrorEnsemble.amplitude(0.05)
        c0 = sample_uniform_controls(np.random.default_rng(4), 10)
        base = run_scp(model, tm, ens, ScpConfig(max_iterations=30), c0)
        res = perturb_reoptimize(model, tm, ens, base.final_controls,
                                 ScpConfig(max_iterations=30), PerturbationConfig(cycles=2),
                                 seed=1)
        assert res.best_infidelity <= res.initial_infidelity
        assert len(res.cycle_infidelities) == 2
        assert all(np.diff(res.cycle_infidelities) <= 0)
        assert all(d > 0 for d in res.distances)

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            PerturbationConfig(target_inflation=0.5)


class TestTransferMap:
    def test_identity_knots(self):
        m = amplitude_transfer_map([(0, 0), (0.5, 0.5), (1, 1)])
        sig = Signal([0.1, -0.3, 0.7], [0.2, 0.0, -0.1], 1e-9)
        out = m.predistort(sig)
        assert_allclose(out.ex, sig.ex, atol=1e-12)
        assert_allclose(out.ey, sig.ey, atol=1e-12)

    def test_round_trip(self):
        m = amplitude_transfer_map(saturating_knots())
        x = np.linspace(0, 1, 401)
        assert_allclose(m.inverse(m.forward(x)), x, atol=1e-6)
        r = np.linspace(m.outputs[0], m.outputs[-1], 401)
        assert_allclose(m.forward(m.inverse(r)), r, atol=1e-6)

    def test_saturating_shape(self):
        k = saturating_knots()
        lin = k[:, 0] <= 0.4
        assert_allclose(k[lin, 1], k[lin, 0])
        assert np.all(k[~lin, 1] < k[~lin, 0])

    def test_phase_preserved(self, rng):
        m = amplitude_transfer_map(saturating_knots())
        z = rng.uniform(0, 0.7, 50) * np.exp(1j * rng.uniform(-np.pi, np.pi, 50))
        sig = Signal(z.real, z.imag, 1e-9)
        pre = m.predistort(sig)
        keep = np.abs(z) > 0
        assert_allclose(driving_angle(pre)[keep], driving_angle(sig)[keep], atol=1e-12)
        back = m.deliver(pre)
        assert_allclose(back.ex, sig.ex, atol=1e-9)
        assert_allclose(back.ey, sig.ey, atol=1e-9)

    @pytest.mark.parametrize("knots", [[(0, 0), (0.5, 0.6), (1, 0.6)],
                                       [(0, 0), (0.5, 0.7), (1, 0.6)],
                                       [(0, 0), (0, 0.5)]])
    def test_non_monotone_rejected(self, knots):
        with pytest.raises(InputError, match="non-invertible"):
            amplitude_transfer_map(knots)

    def test_out_of_range(self):
        m = AmplitudeTransfer(np.array([0.0, 1.0]), np.array([0.0, 0.8]))
        with pytest.raises(InputError):
            m.inverse(0.9)
        with pytest.raises(InputError):
            m.forward(-0.1)
