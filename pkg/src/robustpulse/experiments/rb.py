"""Simulated randomized benchmarking and amplified-phase-error calibration.

Physical gates are the simulated X90 pulse; Z rotations are virtual,
implemented as exact phase-frame updates ``exp(i phi N)`` on the transmon
(``N`` the number operator), which equals ``Rz(phi)`` on the qubit up to a
global phase.  Gate errors are injected on the pulse itself.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from ..controls import Signal
from ..errors import InputError
from ..qmodel import (NO_ERROR, ErrorSample, LindbladConfig, TransmonModel, final_unitaries,
                      lindblad_superoperator)

# generator names; "I" is an explicit idle slot used for the identity element
GENERATORS = ("Z+pi", "Z-pi", "Z+pi/2", "Z-pi/2", "X90")
GENERATOR_ANGLES = {"Z+pi": np.pi, "Z-pi": -np.pi, "Z+pi/2": np.pi / 2, "Z-pi/2": -np.pi / 2}
PHYSICAL = "X90"
IDLE = "I"


def virtual_z(phi: float, num_levels: int = 2) -> np.ndarray:
    return np.diag(np.exp(1j * phi * np.arange(num_levels)))


def _ideal_qubit(name: str) -> np.ndarray:
    if name == PHYSICAL:
        return np.array([[1, -1j], [-1j, 1]]) / np.sqrt(2)
    if name == IDLE:
        return np.eye(2, dtype=complex)
    return virtual_z(GENERATOR_ANGLES[name])


def _phase_key(u: np.ndarray) -> tuple:
    flat = u.ravel()
    i = int(np.argmax(np.abs(flat) > 1e-9))
    v = flat / (flat[i] / abs(flat[i]))
    return tuple(np.round(v, 8))


def compose_word(word, gate_map=None) -> np.ndarray:
    """Operator of a word given in time order (first gate acts first)."""
    gate_map = gate_map or {}
    out = None
    for name in word:
        g = gate_map[name] if name in gate_map else _ideal_qubit(name)
        out = g if out is None else g @ out
    return np.eye(2, dtype=complex) if out is None else out


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-10) -> bool:
    overlap = np.trace(a.conj().T @ b)
    if abs(overlap) < 1e-12:
        return False
    return bool(np.max(np.abs(a * (overlap / abs(overlap)) - b)) <= tol)


@dataclass(frozen=True)
class CliffordDecomposition:
    """Shortest generator words for the 24 single-qubit Cliffords.

    Ties in length are broken towards fewer physical gates.  The identity is
    written as one idle slot.
    """

    words: tuple
    unitaries: tuple
    _index: dict = field(repr=False, compare=False)

    @classmethod
    def build(cls) -> "CliffordDecomposition":
        found = {_phase_key(np.eye(2)): ()}
        mats = {(): np.eye(2, dtype=complex)}
        frontier = [()]
        while frontier:
            nxt = []
            for word in frontier:
                for g in GENERATORS:
                    cand = word + (g,)
                    u = _ideal_qubit(g) @ mats[word]
                    k = _phase_key(u)
                    old = found.get(k)
                    if old is None:
                        found[k] = cand
                        mats[cand] = u
                        nxt.append(cand)
                    elif (len(old) == len(cand)
                          and cand.count(PHYSICAL) < old.count(PHYSICAL)):
                        found[k] = cand
                        mats[cand] = u
            frontier = nxt
        words = sorted(found.values(), key=lambda w: (len(w), w))
        words = [w if w else (IDLE,) for w in words]
        unitaries = tuple(compose_word(w) for w in words)
        index = {_phase_key(u): i for i, u in enumerate(unitaries)}
        return cls(tuple(words), unitaries, index)

    def __len__(self):
        return len(self.words)

    @property
    def mean_physical(self) -> float:
        return float(np.mean([w.count(PHYSICAL) for w in self.words]))

    @property
    def mean_total(self) -> float:
        return float(np.mean([len(w) for w in self.words]))

    def index_of(self, u: np.ndarray) -> int:
        try:
            return self._index[_phase_key(u)]
        except KeyError:
            raise RuntimeError("operator is not a Clifford element") from None

    def inverse_index(self, indices) -> int:
        net = np.eye(2, dtype=complex)
        for i in indices:
            net = self.unitaries[i] @ net
        return self.index_of(net.conj().T)


@dataclass(frozen=True)
class ErrorInjection:
    """Deliberate pulse errors: global scale ``d``, quadrature imbalance ``a``,
    and a phase error ``phase`` giving ``Z(phase) X90 Z(phase)``."""

    global_scale: float = 1.0
    channel_imbalance: float = 1.0
    phase_error: float = 0.0

    def __post_init__(self):
        if not self.global_scale > 0 or not self.channel_imbalance > 0:
            raise InputError("global_scale and channel_imbalance must be positive")

    def apply(self, signal: Signal) -> Signal:
        d, a = self.global_scale, self.channel_imbalance
        return Signal(d * signal.ex, d * a * signal.ey, signal.dt)


class GateSet:
    """Simulated X90 plus exact virtual Z, as unitaries or superoperators."""

    def __init__(self, model: TransmonModel, pulse: Signal,
                 injection: ErrorInjection = ErrorInjection(),
                 lind: LindbladConfig | None = None, error: ErrorSample = NO_ERROR):
        self.model = model
        self.n = model.num_levels
        self.injection = injection
        self.lind = lind
        sig = injection.apply(pulse)
        zp = virtual_z(injection.phase_error, self.n)
        if lind is None:
            u = final_unitaries(model, sig, [error])[0]
            self.x90 = zp @ u @ zp
        else:
            s = lindblad_superoperator(model, sig, error, lind)
            self.x90 = self._lift(zp) @ s @ self._lift(zp)

    @property
    def is_superoperator(self) -> bool:
        return self.lind is not None

    def _lift(self, u: np.ndarray) -> np.ndarray:
        # row-major vec: vec(U rho U^dag) = (U kron U*) vec(rho)
        return np.kron(u, u.conj())

    def virtual(self, phi: float) -> np.ndarray:
        z = virtual_z(phi, self.n)
        return self._lift(z) if self.is_superoperator else z

    def op(self, name: str) -> np.ndarray:
        if name == PHYSICAL:
            return self.x90
        if name == IDLE:
            dim = self.n**2 if self.is_superoperator else self.n
            return np.eye(dim, dtype=complex)
        return self.virtual(GENERATOR_ANGLES[name])

    def word(self, word) -> np.ndarray:
        out = self.op(word[0])
        for name in word[1:]:
            out = self.op(name) @ out
        return out

    def ground_population(self, op: np.ndarray) -> float:
        if self.is_superoperator:
            rho0 = np.zeros(self.n**2, complex)
            rho0[0] = 1.0
            return float((op @ rho0)[0].real)
        return float(abs(op[0, 0]) ** 2)


def rb_model(lengths, a, p, b):
    return a * p ** np.asarray(lengths, float) + b


@dataclass
class RbResult:
    lengths: np.ndarray
    survival: np.ndarray          # (len(lengths), sequences), shot-sampled
    exact_survival: np.ndarray    # same, before shot sampling
    a: float
    p: float
    b: float
    shots: int
    seed: int

    @property
    def epg(self) -> float:
        return (1.0 - self.p) / 2.0

    @property
    def mean_survival(self) -> np.ndarray:
        return self.survival.mean(axis=1)


def fit_rb_decay(lengths, survival) -> tuple[float, float, float]:
    """Weighted least-squares fit of ``A p^L + B`` to per-sequence survivals."""
    lengths = np.asarray(lengths, float)
    surv = np.asarray(survival, float)
    mean = surv.mean(axis=1)
    if np.ptp(mean) == 0.0:
        # flat data: no decay resolved
        return 0.0, 1.0, float(mean[0])
    err = surv.std(axis=1, ddof=1) / np.sqrt(surv.shape[1]) if surv.shape[1] > 1 else None
    if err is not None:
        err = np.maximum(err, 1e-3)
    p0 = (max(mean[0] - 0.5, 0.05), 0.99, 0.5)
    with warnings.catch_warnings():
        # few lengths leave the covariance undetermined; only the estimate is used
        warnings.simplefilter("ignore", OptimizeWarning)
        popt, _ = curve_fit(rb_model, lengths, mean, p0=p0, sigma=err,
                            bounds=([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]), maxfev=20000)
    return tuple(float(v) for v in popt)


def simulate_rb(model: TransmonModel, pulse: Signal, lengths,
                injection: ErrorInjection = ErrorInjection(), sequences: int = 6,
                shots: int = 1024, seed: int = 0, lind: LindbladConfig | None = None,
                decomposition: CliffordDecomposition | None = None) -> RbResult:
    """Random Clifford sequences closed by their inverse, read out on ``|0>``."""
    dec = decomposition or CliffordDecomposition.build()
    gates = GateSet(model, pulse, injection, lind)
    cliff_ops = [gates.word(w) for w in dec.words]
    rng = np.random.default_rng(seed)
    lengths = np.asarray(lengths, int)
    exact = np.zeros((lengths.size, sequences))
    dim = cliff_ops[0].shape[0]
    for i, length in enumerate(lengths):
        for s in range(sequences):
            seq = rng.integers(0, len(dec), size=length)
            inv = dec.inverse_index(seq)
            state = np.zeros(dim, complex)
            state[0] = 1.0  # |0><0| as a vector, or |0> itself
            for k in list(seq) + [inv]:
                state = cliff_ops[k] @ state
            exact[i, s] = (state[0].real if gates.is_superoperator
                           else abs(state[0]) ** 2)
    exact = np.clip(exact, 0.0, 1.0)
    sampled = rng.binomial(shots, exact) / shots
    a, p, b = fit_rb_decay(lengths, sampled)
    return RbResult(lengths, sampled, exact, a, p, b, shots, seed)


# --------------------------------------------------------------------------
# amplified phase error


@dataclass
class ApeResult:
    corrections: np.ndarray
    repetitions: np.ndarray
    populations: np.ndarray   # (len(repetitions), len(corrections))
    best_correction: float


def ape_sequence_population(gates: GateSet, repetitions: int, correction: float) -> float:
    """Ground population after ``X90 (X90 X90^dag)^N X90`` with a virtual
    ``Z(correction)`` before and after every physical gate."""
    zc = gates.virtual(correction)
    x = zc @ gates.x90 @ zc
    # X90^dag: the same pulse with its drive phase advanced by pi
    xd = zc @ gates.virtual(np.pi) @ gates.x90 @ gates.virtual(-np.pi) @ zc
    pair = xd @ x
    op = x @ np.linalg.matrix_power(pair, repetitions) @ x
    return gates.ground_population(op)


def simulate_ape(model: TransmonModel, pulse: Signal, repetitions,
                 corrections, injection: ErrorInjection = ErrorInjection(),
                 lind: LindbladConfig | None = None) -> ApeResult:
    """Sweep the phase correction and pick the minimum of the summed curves."""
    gates = GateSet(model, pulse, injection, lind)
    reps = np.asarray(repetitions, int)
    corr = np.asarray(corrections, float)
    pops = np.array([[ape_sequence_population(gates, n, c) for c in corr] for n in reps])
    best = float(corr[np.argmin(pops.sum(axis=0))])
    return ApeResult(corr, reps, pops, best)
