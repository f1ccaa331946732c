import numpy as np
import pytest
from numpy.testing import assert_allclose

from robustpulse import ConfigurationError, TransmonModel
from robustpulse.baselines import (analytic_qubit_fidelity, bb1_min_duration, bb1_phases,
                                   constant_x90, crossover_report, drag_beta, make_bb1,
                                   make_drag, polish_nonrobust)
from robustpulse.controls import build_transfer_matrix
from robustpulse.experiments.campaigns import fit_quadratic
from robustpulse.qmodel import MHZ, average_fidelity, propagate_unitary
from robustpulse.scp import ScpConfig, evaluate_worst_case


@pytest.fixture(scope="module")
def drag72():
    return make_drag(TransmonModel(), 72e-9)


class TestDrag:
    def test_high_fidelity_before_polish(self, model, drag72):
        assert average_fidelity(model, drag72.signal) >= 0.9999

    def test_area_gives_quarter_turn(self, model, drag72):
        area = drag72.signal.ex.sum() * drag72.signal.dt * model.rabi_rates[0]
        assert area == pytest.approx(np.pi / 2, rel=1e-3)

    def test_tails_small(self, drag72):
        ex = drag72.signal.ex
        assert max(ex[0], ex[-1]) <= 1e-3 * ex.max()

    def test_quadrature_is_scaled_derivative(self, drag72):
        t = drag72.signal.times + drag72.signal.dt / 2
        assert_allclose(drag72.signal.ey, drag72.drag_coefficient * drag72.derivative(t),
                        atol=1e-15)

    def test_beta_sign_and_size(self, model):
        assert drag_beta(model) == pytest.approx(1 / (4 * model.anharmonicity))

    def test_plain_gaussian_leaks_more(self, model):
        plain = make_drag(model, 72e-9, beta=0.0)
        # ey turns about -y here, so the correcting direction has beta > 0
        corrected = make_drag(model, 72e-9, beta=1 / model.anharmonicity)
        full = make_drag(model, 72e-9)
        leak = [propagate_unitary(model, p.signal).max_leakage for p in (plain, corrected)]
        assert leak[0] > leak[1]
        assert 1 - average_fidelity(model, full.signal) < 1 - average_fidelity(model, plain.signal)

    def test_half_drag(self, model):
        half = make_drag(model, 72e-9, quadrature_scale=0.5)
        assert half.drag_coefficient == pytest.approx(drag_beta(model) / 2)

    def test_quadratic_sweep(self, model, drag72):
        curve = evaluate_worst_case(model, None, drag72.signal, 0.1)
        _, r2 = fit_quadratic(curve.etas, 1 - curve.fidelities)
        assert r2 >= 0.999

    def test_too_short(self, model):
        with pytest.raises(ConfigurationError):
            make_drag(model, 10e-9)


@pytest.fixture(scope="module")
def polished():
    model = TransmonModel()
    tm = build_transfer_matrix(25, 72e-9, 24 * MHZ)
    drag = make_drag(model, 72e-9)
    controls, rec = polish_nonrobust(model, tm, drag.signal, ScpConfig(max_iterations=500))
    return model, tm, drag, controls, rec


class TestPolish:
    def test_unit_fidelity(self, polished):
        model, tm, _, controls, _ = polished
        assert evaluate_worst_case(model, tm, controls, 0.0).worst >= 1 - 1e-8

    def test_still_quadratic(self, polished):
        model, tm, _, controls, _ = polished
        curve = evaluate_worst_case(model, tm, controls, 0.1)
        assert fit_quadratic(curve.etas, 1 - curve.fidelities)[1] >= 0.999

    def test_shape_retained(self, polished):
        from robustpulse.controls import apply_filter

        model, tm, drag, controls, _ = polished
        e0 = drag.signal.energy()
        assert abs(apply_filter(tm, controls).energy() - e0) <= 0.2 * e0


class TestBb1:
    def test_min_duration(self, model):
        assert bb1_min_duration(model, 90) == pytest.approx(150e-9, rel=1e-12)

    def test_phases(self):
        phi1, phi2 = bb1_phases(90)
        assert phi1 == pytest.approx(np.degrees(np.arccos(-1 / 8)))
        assert phi2 == pytest.approx(3 * phi1)

    def test_segments(self, model):
        seq = make_bb1(model)
        assert seq.duration == pytest.approx(150e-9)
        assert seq.amplitude == pytest.approx(1.0)
        assert np.abs(seq.signal.complex_envelope).max() <= 1 + 1e-12
        assert seq.signal.duration == pytest.approx(150e-9)

    def test_too_short_names_limit(self, model):
        with pytest.raises(ConfigurationError, match="150.0 ns"):
            make_bb1(model, 90, 120e-9)

    def test_longer_lowers_amplitude(self, model):
        assert make_bb1(model, 90, 300e-9).amplitude == pytest.approx(0.5)

    def test_two_level_flatness(self, qubit):
        seq = make_bb1(qubit)
        f_bb1 = evaluate_worst_case(qubit, None, seq.signal, 0.05, 41).worst_infidelity
        square = constant_x90(qubit, 150e-9, 10)
        f_sq = evaluate_worst_case(qubit, None, square, 0.05, 41).worst_infidelity
        assert f_bb1 <= 1e-6
        # average fidelity of the qubit gate: (2/3) of the closed-form gate infidelity
        assert f_sq == pytest.approx(np.pi**2 * 0.05**2 / 16 * 2 / 3, rel=0.05)
        assert f_sq / f_bb1 >= 100


class TestOracle:
    def test_expansions(self):
        t = 40e-9
        eps = np.array([0.01, 0.02, 0.05, 0.1])
        resid = [abs(analytic_qubit_fidelity(t, e) - (1 - np.pi**2 * e**2 / 16)) for e in eps]
        slope = np.polyfit(np.log(eps), np.log(resid), 1)[0]
        assert slope == pytest.approx(4.0, abs=0.2)

    def test_crossover(self):
        rep = crossover_report(130e-9, 0.05)
        assert rep.sz_coefficient == pytest.approx(3.355e5, rel=1e-3)
        assert rep.level_detuning == pytest.approx(2 * rep.sz_coefficient)
        # both second-order terms agree at the crossover
        a = analytic_qubit_fidelity(130e-9, 0.05)
        d = analytic_qubit_fidelity(130e-9, 0.0, rep.sz_coefficient)
        assert 1 - a == pytest.approx(1 - d, rel=0.05)
