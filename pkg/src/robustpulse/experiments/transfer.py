"""Nonlinear amplitude response of the control electronics and its inverse."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from ..controls import Signal
from ..errors import InputError


@dataclass(frozen=True)
class AmplitudeTransfer:
    """Measured response ``rate = f(input)`` through monotone cubic knots.

    ``forward`` maps a commanded amplitude to the delivered (relative) Rabi
    rate; ``inverse`` gives the command needed for a wanted rate.
    """

    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.inputs, float)
        y = np.asarray(self.outputs, float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise InputError("need matching 1-d knot arrays with at least two knots")
        if not (np.all(np.diff(x) > 0) and np.all(np.diff(y) > 0)):
            raise InputError("transfer knots must be strictly increasing (non-invertible map)")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "outputs", y)
        object.__setattr__(self, "_spline", PchipInterpolator(x, y, extrapolate=False))

    def forward(self, a) -> np.ndarray:
        a = np.asarray(a, float)
        self._check_range(a, self.inputs)
        return self._spline(a)

    def inverse(self, r) -> np.ndarray:
        r = np.asarray(r, float)
        self._check_range(r, self.outputs)
        flat = r.ravel()
        out = np.empty_like(flat)
        x0, x1 = self.inputs[0], self.inputs[-1]
        for i, v in enumerate(flat):
            if v <= self.outputs[0]:
                out[i] = x0
            elif v >= self.outputs[-1]:
                out[i] = x1
            else:
                out[i] = brentq(lambda a: float(self._spline(a)) - v, x0, x1, xtol=1e-15,
                                rtol=4 * np.finfo(float).eps)
        return out.reshape(r.shape)

    @staticmethod
    def _check_range(v, knots):
        tol = 1e-12 * max(1.0, abs(knots[-1]))
        if v.size and (v.min() < knots[0] - tol or v.max() > knots[-1] + tol):
            raise InputError(f"value outside the calibrated range [{knots[0]}, {knots[-1]}]")

    def predistort(self, signal: Signal) -> Signal:
        """Command that delivers ``signal``: magnitude through ``inverse``,
        phase untouched."""
        z = signal.complex_envelope
        mag = np.abs(z)
        unit = np.where(mag > 0, z / np.where(mag > 0, mag, 1.0), 0.0)
        new = self.inverse(mag) * unit
        return Signal(new.real, new.imag, signal.dt)

    def deliver(self, command: Signal) -> Signal:
        z = command.complex_envelope
        mag = np.abs(z)
        unit = np.where(mag > 0, z / np.where(mag > 0, mag, 1.0), 0.0)
        new = self.forward(mag) * unit
        return Signal(new.real, new.imag, command.dt)


def amplitude_transfer_map(knots) -> AmplitudeTransfer:
    """``knots``: ``(input, rate)`` pairs, both strictly increasing."""
    k = np.asarray(knots, float)
    if k.ndim != 2 or k.shape[1] != 2:
        raise InputError("knots must be (input, rate) pairs")
    return AmplitudeTransfer(k[:, 0], k[:, 1])


def saturating_knots(n: int = 21, knee: float = 0.4, top: float = 1.0) -> np.ndarray:
    """Linear up to ``knee``, compressive above: a typical amplifier response."""
    a = np.linspace(0.0, top, n)
    r = np.where(a <= knee, a, knee + (1 - np.exp(-(a - knee) / 0.5)) * 0.5)
    return np.column_stack([a, r])
