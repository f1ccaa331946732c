import numpy as np
import pytest
from numpy.testing import assert_allclose

from robustpulse import InputError, TransmonModel
from robustpulse.baselines import constant_x90, make_drag
from robustpulse.experiments.rb import (GENERATORS, IDLE, PHYSICAL, CliffordDecomposition,
                                        ErrorInjection, GateSet, compose_word,
                                        equal_up_to_phase, fit_rb_decay, rb_model,
                                        simulate_ape, simulate_rb, virtual_z)
from robustpulse.qmodel import LindbladConfig, average_fidelity, x90_target


@pytest.fixture(scope="module")
def cliffords():
    return CliffordDecomposition.build()


def rz(phi):
    return np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)])


class TestVirtualZ:
    @pytest.mark.parametrize("phi", [0.3, -np.pi / 2, np.pi, 2.1])
    def test_qubit_block_is_rz(self, phi):
        assert equal_up_to_phase(virtual_z(phi, 2), rz(phi), tol=1e-15)

    def test_exact_frame_change(self, model):
        # a virtual Z before the pulse equals the pulse with its phase advanced
        drag = make_drag(model, 72e-9)
        phi = 0.4
        g = GateSet(model, drag.signal)
        shifted = GateSet(model, drag.signal.phase_shifted(phi))
        lhs = virtual_z(phi, 3) @ g.x90 @ virtual_z(-phi, 3)
        assert_allclose(shifted.x90, lhs, atol=1e-12)


class TestCliffords:
    def test_group(self, cliffords):
        assert len(cliffords) == 24
        for i, a in enumerate(cliffords.unitaries):
            for b in cliffords.unitaries[i + 1:]:
                assert not equal_up_to_phase(a, b)

    def test_counts(self, cliffords):
        assert cliffords.mean_physical == pytest.approx(1.0)
        assert cliffords.mean_total == pytest.approx(2.29, abs=0.01)
        assert cliffords.words[0] == (IDLE,)

    def test_words_only_use_generators(self, cliffords):
        for w in cliffords.words[1:]:
            assert set(w) <= set(GENERATORS)

    def test_inverse_closes_1000_sequences(self, cliffords):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            seq = rng.integers(0, 24, size=rng.integers(1, 40))
            inv = cliffords.inverse_index(seq)
            total = compose_word([g for k in list(seq) + [inv] for g in cliffords.words[k]])
            assert equal_up_to_phase(total, np.eye(2), tol=1e-9)

    def test_ideal_x90(self):
        assert equal_up_to_phase(compose_word([PHYSICAL]), x90_target(2))

    def test_index_of_rejects_non_clifford(self, cliffords):
        with pytest.raises(RuntimeError):
            cliffords.index_of(rz(0.1))


class TestGateSet:
    def test_superoperator_matches_unitary(self, model):
        drag = make_drag(model, 72e-9)
        u = GateSet(model, drag.signal)
        s = GateSet(model, drag.signal, lind=LindbladConfig())
        word = ["X90", "Z+pi/2", "X90", "Z-pi"]
        uw, sw = u.word(word), s.word(word)
        assert_allclose(sw, np.kron(uw, uw.conj()), atol=1e-10)
        assert s.ground_population(sw) == pytest.approx(u.ground_population(uw), abs=1e-12)

    def test_injection(self):
        inj = ErrorInjection(1.1, 0.9)
        from robustpulse.controls import Signal

        out = inj.apply(Signal([1.0], [1.0], 1e-9))
        assert_allclose([out.ex[0], out.ey[0]], [1.1, 0.99])
        with pytest.raises(InputError):
            ErrorInjection(0.0)


class TestRbFit:
    def test_recovers_parameters(self):
        lengths = np.array([1, 5, 10, 20, 50, 100])
        exact = rb_model(lengths, 0.48, 0.995, 0.5)
        a, p, b = fit_rb_decay(lengths, np.repeat(exact[:, None], 4, axis=1))
        assert p == pytest.approx(0.995, abs=1e-6)

    def test_flat_data(self):
        a, p, b = fit_rb_decay([1, 2, 3], np.ones((3, 2)))
        assert p == 1.0

    def test_ideal_gate_is_noise_free(self):
        qubit = TransmonModel(num_levels=2)
        res = simulate_rb(qubit, constant_x90(qubit, 40e-9), [1, 20, 80], sequences=4,
                          shots=100_000)
        # ideal gates: exact survival 1 and only shot noise remains
        assert_allclose(res.exact_survival, 1.0, atol=1e-12)
        assert res.epg <= 1e-12 + 1.0 / np.sqrt(100_000)

    def test_epg_tracks_coherent_infidelity(self, model):
        drag = make_drag(model, 72e-9, beta=0.0)  # a gate with visible coherent error
        res = simulate_rb(model, drag.signal, [1, 100, 300, 1000, 2000], sequences=8,
                          shots=4096, seed=2)
        coherent = 1 - average_fidelity(model, drag.signal)
        assert coherent / 3 <= res.epg <= 3 * coherent

    def test_half_drag_grows_with_scale(self, model):
        half = make_drag(model, 72e-9, quadrature_scale=0.5)
        lengths = [1, 50, 150, 300]
        epg = [simulate_rb(model, half.signal, lengths, ErrorInjection(d), sequences=6,
                           shots=4096, seed=1).epg for d in (1.0, 1.05, 1.1)]
        assert epg[0] < epg[1] < epg[2]

    def test_reproducible(self, model):
        half = make_drag(model, 72e-9, quadrature_scale=0.5)
        a = simulate_rb(model, half.signal, [1, 10], sequences=2, seed=9)
        b = simulate_rb(model, half.signal, [1, 10], sequences=2, seed=9)
        assert_allclose(a.survival, b.survival, rtol=0, atol=0)


@pytest.fixture(scope="module")
def drag():
    return make_drag(TransmonModel(), 72e-9)


class TestApe:
    def test_zero_injection(self, model, drag):
        corr = np.linspace(-0.02, 0.02, 41)
        res = simulate_ape(model, drag.signal, [0, 4, 8], corr)
        assert abs(res.best_correction) <= corr[1] - corr[0]

    def test_recovers_injected_phase(self, model, drag):
        corr = np.linspace(-0.03, 0.03, 121)
        res = simulate_ape(model, drag.signal, [0, 4, 8, 16], corr,
                           ErrorInjection(phase_error=0.01))
        assert res.best_correction == pytest.approx(-0.01, rel=0.2)

    def test_linear_amplification(self, model, drag):
        # the sequence ideally ends in |1>; the leftover rotation angle,
        # sqrt of the ground population, grows linearly with N
        eps = 0.002
        reps = np.array([0, 1, 2, 4, 8, 16])
        res = simulate_ape(model, drag.signal, reps, [0.0], ErrorInjection(phase_error=eps))
        angle = np.sqrt(res.populations[:, 0])
        slope, icpt = np.polyfit(reps, angle, 1)
        assert slope == pytest.approx(eps, rel=0.1)
        assert_allclose(angle, slope * reps + icpt, atol=0.05 * angle.max())
