"""Control variables, Gaussian transfer matrix and feasibility constraints.

Raw control variables ``cx``, ``cy`` (one per time bin and quadrature) are
mapped to the sampled drive envelope by a linear transfer matrix built from
hold-upsampling followed by Gaussian smoothing.  Zero padding on both sides
forces the filtered signal to start and end at (numerically) zero amplitude.

Time convention: ``gate_time`` is the span of the ``n_controls`` variable
bins.  The padding bins extend the physical pulse beyond it, so the sampled
signal lasts ``gate_time * (n_controls + 2 * pad_count) / n_controls``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, InputError

AMPLITUDE_CAP = 1.0 / np.sqrt(2.0)
PAD_THRESHOLD = 1e-3
KERNEL_HALF_WIDTH = 4.0  # in standard deviations


@dataclass(frozen=True)
class Signal:
    """Piece-wise constant two-quadrature drive envelope.

    ``ex[k]``, ``ey[k]`` hold on ``[k*dt, (k+1)*dt)``.  Amplitudes are
    dimensionless; full scale on one transition is the Rabi rate of that
    transition.
    """

    ex: np.ndarray
    ey: np.ndarray
    dt: float

    def __post_init__(self):
        ex = np.asarray(self.ex, dtype=float).ravel()
        ey = np.asarray(self.ey, dtype=float).ravel()
        if ex.shape != ey.shape:
            raise InputError(f"channel lengths differ: {ex.size} vs {ey.size}")
        if not self.dt > 0:
            raise InputError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "ex", ex)
        object.__setattr__(self, "ey", ey)

    @property
    def num_steps(self) -> int:
        return self.ex.size

    @property
    def duration(self) -> float:
        return self.num_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        """Start time of every sample."""
        return np.arange(self.num_steps) * self.dt

    @property
    def complex_envelope(self) -> np.ndarray:
        return self.ex + 1j * self.ey

    def scaled(self, factor: float) -> "Signal":
        return Signal(factor * self.ex, factor * self.ey, self.dt)

    def phase_shifted(self, phi: float) -> "Signal":
        """Rotate the drive phasor ``ex + i ey`` by ``exp(-i phi)``."""
        z = self.complex_envelope * np.exp(-1j * phi)
        return Signal(z.real, z.imag, self.dt)

    def energy(self) -> float:
        return float(np.sum(self.ex**2 + self.ey**2) * self.dt)


def driving_angle(signal: Signal) -> np.ndarray:
    """Drive phase ``atan2(ey, ex)`` per sample (radians)."""
    return np.arctan2(signal.ey, signal.ex)


def write_pulse_csv(path, signal: Signal) -> Path:
    """Write the ``t_ns,ex,ey`` pulse format, one row per sample."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_ns", "ex", "ey"])
        for t, x, y in zip(signal.times, signal.ex, signal.ey):
            writer.writerow([repr(float(t * 1e9)), repr(float(x)), repr(float(y))])
    return path


def read_pulse_csv(path) -> Signal:
    """Parse a pulse CSV; the sample spacing is taken from the time column."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t_ns", "ex", "ey"]:
            raise InputError(f"{path}: header must be 't_ns,ex,ey', got {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise InputError(f"{path}: row {lineno} has {len(row)} fields, expected 3")
            try:
                values = [float(v) for v in row]
            except ValueError:
                raise InputError(f"{path}: row {lineno} is not numeric: {row}") from None
            if not np.all(np.isfinite(values)):
                raise InputError(f"{path}: row {lineno} has a non-finite value")
            rows.append(values)
    if len(rows) < 2:
        raise InputError(f"{path}: need at least two samples")
    data = np.array(rows)
    steps = np.diff(data[:, 0])
    dt_ns = steps.mean()
    if dt_ns <= 0 or np.max(np.abs(steps - dt_ns)) > 1e-6 * dt_ns:
        raise InputError(f"{path}: time column is not evenly spaced")
    return Signal(data[:, 1], data[:, 2], dt_ns * 1e-9)


@dataclass(frozen=True)
class ControlSet:
    """Raw control variables for both quadratures (before padding)."""

    cx: np.ndarray
    cy: np.ndarray
    slew_limit: float = 1.0
    amplitude_cap: float = AMPLITUDE_CAP

    def __post_init__(self):
        cx = np.asarray(self.cx, dtype=float).ravel()
        cy = np.asarray(self.cy, dtype=float).ravel()
        if cx.shape != cy.shape:
            raise InputError(f"cx and cy lengths differ: {cx.size} vs {cy.size}")
        object.__setattr__(self, "cx", cx)
        object.__setattr__(self, "cy", cy)

    @property
    def n_controls(self) -> int:
        return self.cx.size

    @property
    def vector(self) -> np.ndarray:
        """Concatenation ``[cx, cy]`` used as the optimization variable."""
        return np.concatenate([self.cx, self.cy])

    def with_vector(self, v) -> "ControlSet":
        v = np.asarray(v, dtype=float)
        n = self.n_controls
        if v.size != 2 * n:
            raise InputError(f"expected {2 * n} values, got {v.size}")
        return ControlSet(v[:n], v[n:], self.slew_limit, self.amplitude_cap)

    @classmethod
    def zeros(cls, n_controls: int, **kwargs) -> "ControlSet":
        return cls(np.zeros(n_controls), np.zeros(n_controls), **kwargs)


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    amplitude_violations: list = field(default_factory=list)
    slew_violations: list = field(default_factory=list)

    def __bool__(self):
        return self.feasible


def check_feasible(controls: ControlSet, tol: float = 1e-12) -> FeasibilityReport:
    """Check the amplitude box and the slew bound on adjacent variables.

    Violations are reported as ``(channel, index)`` pairs; a slew violation at
    index ``i`` concerns the pair ``(i, i + 1)``.
    """
    amp, slew = [], []
    for name, c in (("x", controls.cx), ("y", controls.cy)):
        for i in np.flatnonzero(~(np.abs(c) <= controls.amplitude_cap + tol)):
            amp.append((name, int(i)))
        for i in np.flatnonzero(~(np.abs(np.diff(c)) <= controls.slew_limit + tol)):
            slew.append((name, int(i)))
    return FeasibilityReport(not amp and not slew, amp, slew)


def project_slew(c, slew_limit: float, amplitude_cap: float = AMPLITUDE_CAP) -> np.ndarray:
    """Clip a vector into the box, then sequentially into the slew band."""
    c = np.clip(np.asarray(c, dtype=float), -amplitude_cap, amplitude_cap)
    out = c.copy()
    for i in range(1, out.size):
        out[i] = np.clip(out[i], out[i - 1] - slew_limit, out[i - 1] + slew_limit)
    return out


def sample_uniform_controls(rng: np.random.Generator, n_controls: int,
                            slew_limit: float = 1.0,
                            amplitude_cap: float = AMPLITUDE_CAP) -> ControlSet:
    """Uniform draw in the amplitude box followed by slew projection."""
    raw = rng.uniform(-amplitude_cap, amplitude_cap, size=(2, n_controls))
    cx = project_slew(raw[0], slew_limit, amplitude_cap)
    cy = project_slew(raw[1], slew_limit, amplitude_cap)
    return ControlSet(cx, cy, slew_limit, amplitude_cap)


@dataclass(frozen=True)
class TransferMatrix:
    """Linear map from padded control variables to signal samples.

    ``m`` has ``upsample * (n_controls + 2 * pad_count)`` rows and
    ``n_controls + 2 * pad_count`` columns.
    """

    m: np.ndarray
    bandwidth: float
    dt_signal: float
    pad_count: int
    n_controls: int
    upsample: int
    gate_time: float

    @property
    def num_samples(self) -> int:
        return self.m.shape[0]

    @property
    def duration(self) -> float:
        return self.num_samples * self.dt_signal

    @property
    def active(self) -> np.ndarray:
        """Columns acting on the unpadded variables (padding is always zero)."""
        n0 = self.pad_count
        return self.m[:, n0:n0 + self.n_controls]

    def pad(self, c) -> np.ndarray:
        return np.concatenate([np.zeros(self.pad_count), np.asarray(c, float),
                               np.zeros(self.pad_count)])


def gaussian_kernel(sigma_samples: float) -> np.ndarray:
    """Sampled Gaussian truncated at +-4 sigma, normalized to unit sum."""
    half = int(np.ceil(KERNEL_HALF_WIDTH * sigma_samples))
    if sigma_samples <= 0 or half == 0:
        return np.ones(1)
    k = np.exp(-0.5 * (np.arange(-half, half + 1) / sigma_samples) ** 2)
    return k / k.sum()


def _filter_matrix(n_columns: int, upsample: int, kernel: np.ndarray) -> np.ndarray:
    n_rows = n_columns * upsample
    hold = np.repeat(np.eye(n_columns), upsample, axis=0)
    half = kernel.size // 2
    # Toeplitz convolution with zero extension outside the window.
    idx = np.arange(n_rows)
    offset = idx[None, :] - idx[:, None] + half
    inside = (offset >= 0) & (offset < kernel.size)
    conv = np.where(inside, kernel[np.clip(offset, 0, kernel.size - 1)], 0.0)
    return conv @ hold


def _pad_count(first_row: np.ndarray, rule: str) -> int | None:
    if rule == "tail_sum":
        # zeros needed before the step so the first sample sees < 0.1 % of it
        tail = np.cumsum(first_row[::-1])[::-1]
        hits = np.flatnonzero(tail < PAD_THRESHOLD)
    elif rule == "impulse":
        hits = np.flatnonzero(first_row < PAD_THRESHOLD * first_row.max())
    else:
        raise ConfigurationError(f"unknown padding rule {rule!r}")
    return int(hits[0]) if hits.size else None


def build_transfer_matrix(n_controls: int, gate_time: float, bandwidth: float,
                          upsample: int = 4, padding_rule: str = "tail_sum") -> TransferMatrix:
    """Hold-upsample then Gaussian-smooth, with zero padding on both sides.

    ``bandwidth`` is the standard deviation (rad/s) of the frequency response
    ``exp(-w**2 / (2 bandwidth**2))``; the time-domain kernel therefore has
    standard deviation ``1 / bandwidth``.  ``bandwidth=np.inf`` gives the pure
    hold matrix.

    ``padding_rule="tail_sum"`` picks the smallest number of leading zeros
    such that a unit step placed after them contributes less than 0.1 % to the
    first signal sample.  ``"impulse"`` instead requires the first sample's
    weight on the first non-zero column to be below 0.1 % of its peak weight.
    """
    if n_controls < 2:
        raise ConfigurationError("need at least two control variables per channel")
    if not gate_time > 0 or not bandwidth > 0 or upsample < 1:
        raise ConfigurationError("gate_time, bandwidth and upsample must be positive")
    dt_signal = gate_time / (n_controls * upsample)
    sigma_samples = 0.0 if np.isinf(bandwidth) else 1.0 / (bandwidth * dt_signal)
    kernel = gaussian_kernel(sigma_samples)

    probe = _filter_matrix(n_controls, upsample, kernel)
    n0 = _pad_count(probe[0], padding_rule)
    if kernel.size == 1:
        n0 = 0  # nothing is smoothed, so there is no ramp to make room for
    if n0 is None or n0 >= n_controls:
        raise ConfigurationError(
            f"filter too narrow for gate time: needs at least {n_controls} padding "
            f"bins for {n_controls} controls over {gate_time * 1e9:.1f} ns")
    m = _filter_matrix(n_controls + 2 * n0, upsample, kernel)
    return TransferMatrix(m, float(bandwidth), dt_signal, n0, n_controls, upsample,
                          float(gate_time))


def apply_filter(tm: TransferMatrix, controls: ControlSet) -> Signal:
    if controls.n_controls != tm.n_controls:
        raise InputError(
            f"transfer matrix expects {tm.n_controls} controls, got {controls.n_controls}")
    a = tm.active
    return Signal(a @ controls.cx, a @ controls.cy, tm.dt_signal)


def project_signal(tm: TransferMatrix, signal: Signal, slew_limit: float = 1.0) -> ControlSet:
    """Least-squares box-bounded controls whose filtered signal matches ``signal``.

    The signal is resampled onto the transfer-matrix grid (centred, zero
    outside its support) before fitting.
    """
    from scipy.optimize import lsq_linear

    t_grid = (np.arange(tm.num_samples) + 0.5) * tm.dt_signal - tm.duration / 2
    t_src = (np.arange(signal.num_steps) + 0.5) * signal.dt - signal.duration / 2
    ex = np.interp(t_grid, t_src, signal.ex, left=0.0, right=0.0)
    ey = np.interp(t_grid, t_src, signal.ey, left=0.0, right=0.0)
    a = tm.active
    cx = lsq_linear(a, ex, bounds=(-AMPLITUDE_CAP, AMPLITUDE_CAP)).x
    cy = lsq_linear(a, ey, bounds=(-AMPLITUDE_CAP, AMPLITUDE_CAP)).x
    return ControlSet(project_slew(cx, slew_limit), project_slew(cy, slew_limit), slew_limit)
