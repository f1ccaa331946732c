"""Rotating-frame transmon model, unitary and Lindblad propagation, fidelities.

Units are SI with angular frequencies in rad/s and ``hbar = 1``.  The drive
operators follow the convention ``sigma^x_{k,j} = |k><j| + |j><k|`` and
``sigma^y_{k,j} = i(|k><j| - |j><k|)`` with ``k = j - 1``, so the drive term
reads ``(ex + i ey)/2 * lambda_j |j-1><j| + h.c.``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg

from .controls import Signal
from .errors import ConfigurationError, InputError, NumericalError

TWO_PI = 2.0 * np.pi
MHZ = TWO_PI * 1e6
GHZ = TWO_PI * 1e9


class ErrorSample(NamedTuple):
    """One systematic error: amplitude factor ``1 + eta`` and detuning shift."""

    eta: float = 0.0
    detuning: float = 0.0


NO_ERROR = ErrorSample(0.0, 0.0)


@dataclass(frozen=True)
class TransmonModel:
    """Driven N-level transmon in the frame rotating at ``drive_freq``.

    Defaults are the Armonk-like parameters: 4.974 GHz qubit, 345 MHz
    anharmonicity (sign as configured), 15 MHz maximum Rabi rates, driven on
    resonance.
    """

    num_levels: int = 3
    omega01: float = 4.974 * GHZ
    drive_freq: float | None = None
    anharmonicity: float = 345 * MHZ
    rabi_rates: tuple = (15 * MHZ, 15 * MHZ)

    def __post_init__(self):
        if self.drive_freq is None:
            object.__setattr__(self, "drive_freq", self.omega01)
        rates = tuple(float(r) for r in self.rabi_rates)
        if self.num_levels == 2 and len(rates) == 2:
            rates = rates[:1]
        object.__setattr__(self, "rabi_rates", rates)
        if self.num_levels < 2:
            raise ConfigurationError("num_levels must be at least 2")
        if len(rates) != self.num_levels - 1:
            raise ConfigurationError(
                f"need {self.num_levels - 1} Rabi rates, got {len(rates)}")
        if not all(r > 0 for r in rates):
            raise ConfigurationError("Rabi rates must be positive")

    @property
    def detunings(self) -> np.ndarray:
        """Level energies ``delta_j`` in the rotating frame, ``delta_0 = 0``.

        ``delta_1 = omega01 - drive_freq`` and ``delta_2 = Delta + 2 delta_1``;
        higher levels follow the Duffing ladder.
        """
        d1 = self.omega01 - self.drive_freq
        j = np.arange(self.num_levels)
        return j * d1 + self.anharmonicity * j * (j - 1) / 2

    @property
    def drive_operators(self) -> tuple[np.ndarray, np.ndarray]:
        """``(Hx, Hy)``: the Hamiltonian per unit ``ex`` and per unit ``ey``."""
        n = self.num_levels
        hx = np.zeros((n, n), complex)
        hy = np.zeros((n, n), complex)
        for j, lam in enumerate(self.rabi_rates, start=1):
            hx[j - 1, j] = hx[j, j - 1] = lam / 2
            hy[j - 1, j] = 1j * lam / 2
            hy[j, j - 1] = -1j * lam / 2
        return hx, hy

    def drift(self, error: ErrorSample = NO_ERROR) -> np.ndarray:
        j = np.arange(self.num_levels)
        return np.diag(self.detunings + j * error.detuning).astype(complex)


def assemble_hamiltonian(model: TransmonModel, ex, ey, error: ErrorSample = NO_ERROR) -> np.ndarray:
    """Hamiltonian for drive amplitudes ``ex``, ``ey`` under ``error``.

    Scalars give one ``(n, n)`` matrix; arrays give a stack ``(..., n, n)``.
    """
    error = ErrorSample(*error)
    ex = np.asarray(ex, dtype=float)
    ey = np.asarray(ey, dtype=float)
    hx, hy = model.drive_operators
    scale = 1.0 + error.eta
    return (model.drift(error)
            + scale * ex[..., None, None] * hx
            + scale * ey[..., None, None] * hy)


def _forward_scan(m: np.ndarray) -> np.ndarray:
    # work-efficient recursive scan: pair up, scan the pairs, fill the gaps
    n = m.shape[0]
    if n == 1:
        return m.copy()
    even = n - n % 2
    pairs = _forward_scan(m[1:even:2] @ m[0:even:2])
    out = np.empty_like(m)
    out[0] = m[0]
    out[1:even:2] = pairs
    out[2::2] = m[2::2] @ pairs[:(n - 1) // 2]
    return out


def scan_products(mats: np.ndarray, reverse: bool = False) -> np.ndarray:
    """Cumulative time-ordered products of a stack of matrices.

    Forward: ``out[k] = mats[k] @ ... @ mats[0]``.  Reverse:
    ``out[k] = mats[-1] @ ... @ mats[k]``.
    """
    mats = np.asarray(mats)
    if not reverse:
        return _forward_scan(mats)
    flipped = np.swapaxes(mats[::-1], -1, -2)
    return np.swapaxes(_forward_scan(flipped), -1, -2)[::-1]


def chain_product(mats: np.ndarray) -> np.ndarray:
    """``mats[-1] @ ... @ mats[0]`` by pairwise reduction."""
    m = np.asarray(mats)
    while m.shape[0] > 1:
        n = m.shape[0]
        p = m[1:n - n % 2:2] @ m[0:n - n % 2:2]
        m = np.concatenate([p, m[-1:]]) if n % 2 else p
    return m[0]


def step_eigensystems(hamiltonians: np.ndarray):
    """Eigenvalues and eigenvectors of a stack of Hermitian matrices."""
    if not np.all(np.isfinite(hamiltonians)):
        raise NumericalError("non-finite Hamiltonian entries")
    return np.linalg.eigh(hamiltonians)


def step_unitaries_from_eig(w: np.ndarray, v: np.ndarray, dt: float) -> np.ndarray:
    phases = np.exp(-1j * w * dt)
    return (v * phases[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)


@dataclass(frozen=True)
class PropagationResult:
    final_unitary: np.ndarray
    step_unitaries: np.ndarray | None
    max_leakage: float
    dt: float
    num_steps: int


def cardinal_states(num_levels: int) -> np.ndarray:
    """The six Bloch-sphere poles ``+x, -x, +y, -y, +z, -z`` as kets (6, n)."""
    s = 1 / np.sqrt(2)
    qubit = np.array([
        [s, s], [s, -s], [s, 1j * s], [s, -1j * s], [1, 0], [0, 1],
    ], dtype=complex)
    out = np.zeros((6, num_levels), complex)
    out[:, :2] = qubit
    return out


def x90_target(num_levels: int = 3) -> np.ndarray:
    """``X_{pi/2} = exp(-i pi/4 sigma_x)`` on the qubit block, identity above."""
    u = np.eye(num_levels, dtype=complex)
    u[:2, :2] = np.array([[1, -1j], [-1j, 1]]) / np.sqrt(2)
    return u


def _check_signal(signal: Signal):
    if not (np.all(np.isfinite(signal.ex)) and np.all(np.isfinite(signal.ey))):
        raise NumericalError("signal contains non-finite values")


def propagate_unitary(model: TransmonModel, signal: Signal, error: ErrorSample = NO_ERROR,
                      keep_steps: bool = False) -> PropagationResult:
    """Time-ordered product of exact per-sample exponentials.

    ``max_leakage`` is the largest population outside the qubit subspace over
    all sample boundaries and all six cardinal initial states.
    """
    _check_signal(signal)
    h = assemble_hamiltonian(model, signal.ex, signal.ey, error)
    w, v = step_eigensystems(h)
    steps = step_unitaries_from_eig(w, v, signal.dt)
    cumulative = scan_products(steps)
    leakage = 0.0
    if model.num_levels > 2:
        psi0 = cardinal_states(model.num_levels)
        amps = cumulative[:, 2:, :2] @ psi0[:, :2].T  # (steps, levels>=2, poles)
        leakage = float(np.max(np.sum(np.abs(amps) ** 2, axis=1)))
    return PropagationResult(cumulative[-1], steps if keep_steps else None,
                             min(max(leakage, 0.0), 1.0), signal.dt, signal.num_steps)


def fidelity_f1(u, u_target) -> float:
    """Full-space gate fidelity ``|tr(U^dag U_T)|^2 / n^2``."""
    u, u_target = np.asarray(u), np.asarray(u_target)
    if u.shape != u_target.shape or u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise InputError(f"dimension mismatch: {u.shape} vs {u_target.shape}")
    n = u.shape[0]
    return float(abs(np.trace(u.conj().T @ u_target)) ** 2 / n**2)


def fidelity_f2(u, u_target) -> float:
    """Qubit-subspace gate fidelity; blind to phases on levels above 1."""
    u, u_target = np.asarray(u), np.asarray(u_target)
    if u.shape != u_target.shape:
        raise InputError(f"dimension mismatch: {u.shape} vs {u_target.shape}")
    if u.ndim != 2 or u.shape[0] < 2:
        raise InputError("fidelity_f2 needs at least a two-level unitary")
    g = np.einsum("ji,ji->", u[:, :2].conj(), u_target[:, :2])
    return float(abs(g) ** 2 / 4)


def fidelity_average(rho_final_per_pole, u_target) -> float:
    """Mean overlap of the six evolved poles with their ideal images.

    ``rho_final_per_pole`` holds the final density matrices of the evolutions
    started in ``+x, -x, +y, -y, +z, -z`` (see :func:`cardinal_states`).
    """
    rhos = np.asarray(rho_final_per_pole)
    if rhos.ndim != 3 or rhos.shape[0] != 6:
        raise InputError(f"need six density matrices, got shape {rhos.shape}")
    u_target = np.asarray(u_target)
    ideal = cardinal_states(u_target.shape[0]) @ u_target.T  # rows: U_T |psi_j>
    overlaps = np.einsum("ja,jab,jb->j", ideal.conj(), rhos, ideal)
    return float(np.mean(overlaps.real))


def average_fidelity_unitary(u, u_target) -> float:
    """``F_A`` for unitary evolution: ``U`` applied directly to the six poles."""
    u = np.asarray(u)
    psi0 = cardinal_states(u.shape[0])
    out = psi0 @ u.T
    ideal = psi0 @ np.asarray(u_target).T
    return float(np.mean(np.abs(np.einsum("ja,ja->j", ideal.conj(), out)) ** 2))


# --------------------------------------------------------------------------
# Lindblad evolution


@dataclass(frozen=True)
class LindbladConfig:
    """Relaxation ``t1`` (same for every level) and pure dephasing ``t_phi``.

    ``t1`` may also be a sequence with one entry per decaying level.
    """

    t1: float | Sequence[float] = np.inf
    t_phi: float = np.inf

    def __post_init__(self):
        t1 = np.atleast_1d(np.asarray(self.t1, dtype=float))
        if np.any(t1 <= 0):
            raise ConfigurationError("t1 must be positive")
        if not self.t_phi > 0:
            raise ConfigurationError("t_phi must be positive")

    def t1_per_level(self, num_levels: int) -> np.ndarray:
        t1 = np.atleast_1d(np.asarray(self.t1, dtype=float))
        if t1.size == 1:
            return np.full(num_levels - 1, t1[0])
        if t1.size != num_levels - 1:
            raise ConfigurationError(f"need {num_levels - 1} T1 values, got {t1.size}")
        return t1


def _dissipator(c: np.ndarray) -> np.ndarray:
    n = c.shape[0]
    eye = np.eye(n)
    cdc = c.conj().T @ c
    return np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T)


def dissipator_superoperator(num_levels: int, lind: LindbladConfig) -> np.ndarray:
    """Dissipative part of the Liouvillian (row-major vectorization)."""
    n = num_levels
    out = np.zeros((n * n, n * n), complex)
    for j, t1 in enumerate(lind.t1_per_level(n), start=1):
        if np.isfinite(t1):
            lower = np.zeros((n, n))
            lower[j - 1, j] = 1.0
            out += _dissipator(lower) / t1
    if np.isfinite(lind.t_phi):
        for j in range(1, n):
            proj = np.zeros((n, n))
            proj[j, j] = 1.0
            out += _dissipator(proj) / lind.t_phi
    return out


def liouvillians(hamiltonians: np.ndarray, dissipator: np.ndarray) -> np.ndarray:
    """``-i[H, .] + D`` for a stack of Hamiltonians, row-major vec convention."""
    n = hamiltonians.shape[-1]
    eye = np.eye(n)
    comm = (np.einsum("...ij,kl->...ikjl", hamiltonians, eye)
            - np.einsum("ij,...lk->...ikjl", eye, hamiltonians)).reshape(
                hamiltonians.shape[:-2] + (n * n, n * n))
    return -1j * comm + dissipator


def lindblad_step_propagators(model: TransmonModel, signal: Signal, error: ErrorSample,
                              lind: LindbladConfig) -> np.ndarray:
    _check_signal(signal)
    h = assemble_hamiltonian(model, signal.ex, signal.ey, error)
    gen = liouvillians(h, dissipator_superoperator(model.num_levels, lind))
    return scipy.linalg.expm(gen * signal.dt)


def lindblad_superoperator(model: TransmonModel, signal: Signal, error: ErrorSample = NO_ERROR,
                           lind: LindbladConfig = LindbladConfig()) -> np.ndarray:
    """Whole-pulse propagator acting on row-major ``vec(rho)``."""
    steps = lindblad_step_propagators(model, signal, error, lind)
    return chain_product(steps)


def propagate_lindblad(model: TransmonModel, signal: Signal, error: ErrorSample,
                       lind: LindbladConfig, rho0) -> np.ndarray:
    """Density matrices at every sample boundary, shape ``(N + 1, n, n)``."""
    rho0 = np.asarray(rho0, dtype=complex)
    n = model.num_levels
    if rho0.shape != (n, n):
        raise InputError(f"rho0 must be {n}x{n}")
    if abs(np.trace(rho0) - 1) > 1e-12:
        raise InputError(f"rho0 trace is {np.trace(rho0).real}, expected 1")
    if np.max(np.abs(rho0 - rho0.conj().T)) > 1e-12:
        raise InputError("rho0 is not Hermitian")
    if np.linalg.eigvalsh(rho0).min() < -1e-12:
        raise InputError("rho0 is not positive semidefinite")
    steps = lindblad_step_propagators(model, signal, ErrorSample(*error), lind)
    cumulative = scan_products(steps)
    vecs = cumulative @ rho0.reshape(-1)
    traj = np.concatenate([rho0[None], vecs.reshape(-1, n, n)])
    return 0.5 * (traj + np.swapaxes(traj.conj(), -1, -2))


def apply_superoperator(superop: np.ndarray, rhos: np.ndarray) -> np.ndarray:
    n = rhos.shape[-1]
    return (rhos.reshape(rhos.shape[:-2] + (n * n,)) @ superop.T).reshape(rhos.shape)


def pole_density_matrices(num_levels: int) -> np.ndarray:
    psi = cardinal_states(num_levels)
    return np.einsum("ja,jb->jab", psi, psi.conj())


def average_fidelity_superoperator(superop: np.ndarray, u_target) -> float:
    n = np.asarray(u_target).shape[0]
    rhos = apply_superoperator(superop, pole_density_matrices(n))
    return fidelity_average(rhos, u_target)


def average_fidelity(model: TransmonModel, signal: Signal, error: ErrorSample = NO_ERROR,
                     lind: LindbladConfig | None = None, u_target=None) -> float:
    """``F_A`` of a pulse, unitary when ``lind`` is None."""
    if u_target is None:
        u_target = x90_target(model.num_levels)
    if lind is None:
        u = propagate_unitary(model, signal, error).final_unitary
        return average_fidelity_unitary(u, u_target)
    return average_fidelity_superoperator(lindblad_superoperator(model, signal, error, lind),
                                          u_target)


def amplitude_error_term(amplitude_error: float) -> float:
    """Second-order infidelity of a constant qubit rotation under amplitude error."""
    return np.pi**2 * amplitude_error**2 / 16


def detuning_error_term(gate_time: float, detuning: float) -> float:
    """Second-order infidelity of a constant qubit rotation under detuning.

    ``detuning`` is the coefficient of ``sigma_z`` in the qubit Hamiltonian.
    """
    return 8 * gate_time**2 * detuning**2 / np.pi**2


def crossover_detuning(gate_time: float, amplitude_error: float) -> float:
    """``sigma_z`` coefficient at which both second-order terms are equal."""
    return np.pi**2 * abs(amplitude_error) / (np.sqrt(128.0) * gate_time)


def _stacked_hamiltonians(model: TransmonModel, signal: Signal, samples) -> np.ndarray:
    """Hamiltonians with time first: shape ``(N, S, n, n)``."""
    samples = [ErrorSample(*s) for s in samples]
    hx, hy = model.drive_operators
    eta = np.array([s.eta for s in samples])
    shift = np.array([s.detuning for s in samples])
    j = np.arange(model.num_levels)
    drift = np.zeros((len(samples), model.num_levels, model.num_levels), complex)
    drift[:, j, j] = model.detunings[None, :] + shift[:, None] * j[None, :]
    scale = (1.0 + eta)[None, :, None, None]
    return (drift[None]
            + scale * signal.ex[:, None, None, None] * hx
            + scale * signal.ey[:, None, None, None] * hy)


def final_unitaries(model: TransmonModel, signal: Signal, samples) -> np.ndarray:
    """Whole-pulse unitaries for several error samples at once, ``(S, n, n)``."""
    _check_signal(signal)
    w, v = step_eigensystems(_stacked_hamiltonians(model, signal, samples))
    return chain_product(step_unitaries_from_eig(w, v, signal.dt))


def average_fidelities(model: TransmonModel, signal: Signal, samples,
                       lind: LindbladConfig | None = None, u_target=None) -> np.ndarray:
    """``F_A`` for each error sample (unitary, or Lindblad when ``lind`` is set)."""
    if u_target is None:
        u_target = x90_target(model.num_levels)
    if lind is None:
        return np.array([average_fidelity_unitary(u, u_target)
                         for u in final_unitaries(model, signal, samples)])
    _check_signal(signal)
    h = _stacked_hamiltonians(model, signal, samples)
    gen = liouvillians(h, dissipator_superoperator(model.num_levels, lind))
    steps = scipy.linalg.expm(gen * signal.dt)
    supers = chain_product(steps)
    return np.array([average_fidelity_superoperator(s, u_target) for s in supers])
