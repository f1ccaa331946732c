"""Reference pulses: Gaussian DRAG, square BB1 sequences and a two-level oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .controls import AMPLITUDE_CAP, ControlSet, Signal, TransferMatrix, project_signal
from .errors import ConfigurationError
from .qmodel import TransmonModel, crossover_detuning
from .scp import ErrorEnsemble, OptimizationRecord, ScpConfig, run_scp

# Gaussian width as a fraction of the pulse length; the truncated tails sit
# just below 1e-3 of the peak.
DRAG_WIDTH_FRACTION = 1.0 / 7.5


@dataclass(frozen=True)
class DragPulse:
    amplitude: float
    center: float
    width: float
    duration: float
    drag_coefficient: float
    signal: Signal

    def envelope(self, t) -> np.ndarray:
        t = np.asarray(t, float)
        return self.amplitude * np.exp(-0.5 * ((t - self.center) / self.width) ** 2)

    def derivative(self, t) -> np.ndarray:
        t = np.asarray(t, float)
        return -(t - self.center) / self.width**2 * self.envelope(t)


def drag_beta(model: TransmonModel) -> float:
    """First-order DRAG coefficient ``(lambda_2 / lambda_1)^2 / (4 Delta)``.

    Positive because ``ey`` rotates about ``-y`` in this model's drive
    convention; in the ``+y`` convention the same pulse reads ``-.../(4 Delta)``.
    """
    rates = model.rabi_rates
    ratio = rates[1] / rates[0] if len(rates) > 1 else 1.0
    return ratio**2 / (4.0 * model.anharmonicity)


def make_drag(model: TransmonModel, duration: float, target_angle: float = np.pi / 2,
              num_steps: int = 240, beta: float | None = None,
              quadrature_scale: float = 1.0) -> DragPulse:
    """First-order DRAG: Gaussian in-phase envelope plus derivative quadrature.

    The in-phase area gives the rotation ``target_angle`` on the 0-1
    transition.  ``beta`` defaults to :func:`drag_beta`; ``quadrature_scale``
    multiplies it (0.5 gives half-DRAG, 0 a plain Gaussian).
    """
    if not duration > 0 or num_steps < 2:
        raise ConfigurationError("DRAG needs a positive duration and at least two samples")
    lam = model.rabi_rates[0]
    width = DRAG_WIDTH_FRACTION * duration
    half = duration / 2
    area_per_peak = width * np.sqrt(2 * np.pi) * erf(half / (np.sqrt(2) * width))
    amplitude = target_angle / (lam * area_per_peak)
    if beta is None:
        beta = drag_beta(model)
    coeff = quadrature_scale * beta
    dt = duration / num_steps
    t = (np.arange(num_steps) + 0.5) * dt
    proto = DragPulse(amplitude, half, width, duration, coeff, Signal(np.zeros(1), np.zeros(1), dt))
    ex = proto.envelope(t)
    ey = coeff * proto.derivative(t)
    if max(np.max(np.abs(ex)), np.max(np.abs(ey))) > AMPLITUDE_CAP:
        raise ConfigurationError(
            f"{duration * 1e9:.1f} ns is too short: the DRAG envelope would need peak "
            f"amplitude {amplitude:.3f} above the cap {AMPLITUDE_CAP:.3f}")
    return DragPulse(amplitude, half, width, duration, coeff, Signal(ex, ey, dt))


def polish_nonrobust(model: TransmonModel, tm: TransferMatrix, drag_signal: Signal,
                     config: ScpConfig | None = None) -> tuple[ControlSet, OptimizationRecord]:
    """Zero-error SCP started from the DRAG pulse projected on the control grid."""
    start = project_signal(tm, drag_signal)
    config = config or ScpConfig()
    record = run_scp(model, tm, ErrorEnsemble.nominal(), config, start)
    return record.final_controls, record


# --------------------------------------------------------------------------
# BB1


@dataclass(frozen=True)
class Bb1Sequence:
    theta_deg: float
    phi1_deg: float
    phi2_deg: float
    segment_angles_deg: tuple
    segment_phases_deg: tuple
    amplitude: float
    segment_durations: tuple
    signal: Signal

    @property
    def duration(self) -> float:
        return float(sum(self.segment_durations))


def bb1_phases(theta_deg: float) -> tuple[float, float]:
    phi1 = np.degrees(np.arccos(-theta_deg / 720.0))
    return float(phi1), float(3 * phi1)


def bb1_min_duration(model: TransmonModel, theta_deg: float = 90.0) -> float:
    """Shortest BB1 at unit drive amplitude on the 0-1 transition."""
    return 2 * np.pi / model.rabi_rates[0] * (180 + 360 + 180 + theta_deg) / 360


def make_bb1(model: TransmonModel, theta_deg: float = 90.0, total_duration: float | None = None,
             samples_per_degree: float = 2.0 / 9.0) -> Bb1Sequence:
    """Square-segment BB1 in time order ``theta_0, 180_phi1, 360_phi2, 180_phi1``.

    Segments share one drive amplitude ``|ex + i ey| <= 1`` chosen to fill
    ``total_duration``; the samples are not passed through any filter.
    """
    t_min = bb1_min_duration(model, theta_deg)
    if total_duration is None:
        total_duration = t_min
    if total_duration < t_min * (1 - 1e-12):
        raise ConfigurationError(
            f"BB1 of {theta_deg} deg needs at least {t_min * 1e9:.1f} ns; "
            f"{total_duration * 1e9:.1f} ns would require a control amplitude above "
            "the maximum available")
    phi1, phi2 = bb1_phases(theta_deg)
    angles = (theta_deg, 180.0, 360.0, 180.0)
    phases = (0.0, phi1, phi2, phi1)
    amplitude = t_min / total_duration
    total_angle = sum(angles)
    counts = [max(1, int(round(a * samples_per_degree))) for a in angles]
    # common sample length when the angle ratios allow it
    dt = total_duration / sum(counts)
    durations = tuple(total_duration * a / total_angle for a in angles)
    if not np.allclose(np.array(counts) * dt, durations, rtol=1e-9):
        raise ConfigurationError("samples_per_degree does not resolve every segment")
    z = np.concatenate([np.full(n, amplitude * np.exp(1j * np.radians(p)))
                        for n, p in zip(counts, phases)])
    return Bb1Sequence(theta_deg, phi1, phi2, angles, phases, amplitude, durations,
                       Signal(z.real, z.imag, dt))


# --------------------------------------------------------------------------
# two-level closed form


def analytic_qubit_fidelity(gate_time: float, amplitude_error: float = 0.0,
                            detuning: float = 0.0) -> float:
    """``|tr(X90^dag U)|^2 / 4`` for ``H = delta sz + alpha (1 + eps) sx``.

    ``alpha = pi / (4 gate_time)`` makes the error-free pulse an exact
    ``X90 = exp(-i pi/4 sx)``; ``detuning`` is the ``sz`` coefficient.
    """
    alpha = np.pi / (4 * gate_time) * (1 + amplitude_error)
    theta = np.hypot(detuning, alpha)
    if theta == 0:
        return 0.5
    c = np.cos(theta * gate_time) + alpha / theta * np.sin(theta * gate_time)
    return float(c**2 / 2)


def constant_x90(model: TransmonModel, gate_time: float, num_steps: int = 1) -> Signal:
    """Constant in-phase drive performing X90 on the 0-1 transition."""
    amp = np.pi / (2 * gate_time * model.rabi_rates[0])
    return Signal(np.full(num_steps, amp), np.zeros(num_steps), gate_time / num_steps)


@dataclass(frozen=True)
class CrossoverReport:
    gate_time: float
    amplitude_error: float
    sz_coefficient: float
    level_detuning: float

    @property
    def sz_coefficient_khz(self) -> float:
        return self.sz_coefficient / 1e3


def crossover_report(gate_time: float, amplitude_error: float) -> CrossoverReport:
    """Detuning where amplitude and detuning errors cost the same (second order).

    Solves ``8 T^2 delta^2 / pi^2 = pi^2 eps^2 / 16``.  ``sz_coefficient`` is
    ``delta`` in rad/s; the matching shift of the qubit frequency is
    ``2 delta``.
    """
    delta = crossover_detuning(gate_time, amplitude_error)
    return CrossoverReport(gate_time, amplitude_error, float(delta), float(2 * delta))
