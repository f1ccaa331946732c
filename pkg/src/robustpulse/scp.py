"""Sequential convex programming for worst-case (or average) gate fidelity.

Each iteration linearizes the qubit-subspace fidelity of every ensemble
member around the current controls, solves the trust-region linear program
for the step, and accepts it only if the objective did not drop.  In
worst-case mode the default test is on the smallest member fidelity;
``acceptance="every"`` demands that no member loses fidelity.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy.optimize import linprog

from .controls import (ControlSet, TransferMatrix, apply_filter, check_feasible,
                       sample_uniform_controls)
from .errors import NumericalError
from .qmodel import (NO_ERROR, ErrorSample, LindbladConfig, TransmonModel,
                     _stacked_hamiltonians, average_fidelities, chain_product, scan_products,
                     step_eigensystems, step_unitaries_from_eig, x90_target)


@dataclass(frozen=True)
class ErrorEnsemble:
    """Systematic-error samples whose fidelities enter the robust objective."""

    samples: tuple

    def __post_init__(self):
        samples = tuple(ErrorSample(*s) for s in self.samples)
        if not samples:
            raise ValueError("ensemble needs at least one sample")
        if any(1 + s.eta <= 0 for s in samples):
            raise ValueError("amplitude factors 1 + eta must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def amplitude_factors(self) -> list:
        return sorted({1 + s.eta for s in self.samples})

    @property
    def detuning_shifts(self) -> list:
        return sorted({s.detuning for s in self.samples})

    @classmethod
    def nominal(cls) -> "ErrorEnsemble":
        return cls((NO_ERROR,))

    @classmethod
    def amplitude(cls, eta: float, include_zero: bool = True) -> "ErrorEnsemble":
        """``{-eta, 0, +eta}`` on the drive amplitude."""
        if eta == 0:
            return cls.nominal()
        etas = (-eta, 0.0, eta) if include_zero else (-eta, eta)
        return cls(tuple(ErrorSample(e, 0.0) for e in etas))

    @classmethod
    def detuning(cls, shift: float, include_zero: bool = True) -> "ErrorEnsemble":
        if shift == 0:
            return cls.nominal()
        shifts = (-shift, 0.0, shift) if include_zero else (-shift, shift)
        return cls(tuple(ErrorSample(0.0, d) for d in shifts))

    @classmethod
    def doubly(cls, eta: float, shift: float) -> "ErrorEnsemble":
        """Zero error plus the four corners of the (amplitude, detuning) box."""
        corners = [ErrorSample(a * eta, b * shift) for a in (-1, 1) for b in (-1, 1)]
        return cls((NO_ERROR, *corners))

    @classmethod
    def cartesian(cls, etas: Sequence[float], shifts: Sequence[float]) -> "ErrorEnsemble":
        return cls(tuple(ErrorSample(e, d) for e in etas for d in shifts))


# --------------------------------------------------------------------------
# fidelity and its exact gradient


def _divided_differences(w: np.ndarray, dt: float) -> np.ndarray:
    """Divided differences of ``exp(-i w dt)`` between eigenvalue pairs."""
    wa = w[..., :, None]
    wb = w[..., None, :]
    mean = 0.5 * (wa + wb)
    half = 0.5 * dt * (wa - wb)
    return -1j * dt * np.exp(-1j * dt * mean) * np.sinc(half / np.pi)


class FidelityEvaluator:
    """Qubit-subspace fidelity ``F2`` of filtered controls for an ensemble.

    Holds the model, transfer matrix, target and samples so repeated
    evaluations inside the optimizer reuse the setup.
    """

    def __init__(self, model: TransmonModel, tm: TransferMatrix, samples,
                 target: np.ndarray | None = None):
        self.model = model
        self.tm = tm
        self.samples = tuple(ErrorSample(*s) for s in samples)
        self.target = x90_target(model.num_levels) if target is None else np.asarray(target)
        self.scale = 1.0 + np.array([s.eta for s in self.samples])
        n = model.num_levels
        proj = np.zeros((n, n))
        proj[0, 0] = proj[1, 1] = 1.0
        self._a = proj @ self.target.conj().T
        self._hx, self._hy = model.drive_operators
        self._cache = None

    def signal(self, controls: ControlSet):
        return apply_filter(self.tm, controls)

    def _overlap(self, final: np.ndarray) -> np.ndarray:
        return np.einsum("sji,ji->s", final[:, :, :2].conj(), self.target[:, :2])

    def _eigensystems(self, controls: ControlSet):
        # the optimizer asks for the gradient right after testing the same point
        key = controls.vector.tobytes()
        if self._cache is not None and self._cache[0] == key:
            return self._cache[1]
        sig = self.signal(controls)
        h = _stacked_hamiltonians(self.model, sig, self.samples)  # (N, S, n, n)
        w, v = step_eigensystems(h)
        self._cache = (key, (sig.dt, w, v))
        return sig.dt, w, v

    def fidelities(self, controls: ControlSet) -> np.ndarray:
        dt, w, v = self._eigensystems(controls)
        final = chain_product(step_unitaries_from_eig(w, v, dt))
        return np.abs(self._overlap(final)) ** 2 / 4

    def fidelities_and_gradients(self, controls: ControlSet):
        """Per-sample ``F2`` (S,) and gradients w.r.t. ``[cx, cy]`` (S, 2 Nc)."""
        dt, w, v = self._eigensystems(controls)
        steps = step_unitaries_from_eig(w, v, dt)
        fwd = scan_products(steps)
        bwd = scan_products(steps, reverse=True)
        g = self._overlap(fwd[-1])
        eye = np.broadcast_to(np.eye(w.shape[-1], dtype=complex), (1,) + w.shape[1:] + w.shape[-1:])
        left = np.concatenate([bwd[1:], eye])     # U_{N-1} ... U_{k+1}
        right = np.concatenate([eye, fwd[:-1]])   # U_{k-1} ... U_0
        weight = right @ self._a @ left
        vh = np.swapaxes(v.conj(), -1, -2)
        rotated = vh @ weight @ v
        y = v @ (rotated * _divided_differences(w, dt)) @ vh
        # d tr(P U_T^dag U) = tr(Y dH) for dH in the sample's Hamiltonian
        dzx = np.einsum("...ab,ba->...", y, self._hx)
        dzy = np.einsum("...ab,ba->...", y, self._hy)
        factor = 0.5 * self.scale[None, :]
        gex = factor * np.real(g[None, :] * dzx)   # (N, S)
        gey = factor * np.real(g[None, :] * dzy)
        active = self.tm.active
        grad = np.concatenate([(active.T @ gex).T, (active.T @ gey).T], axis=1)
        fid = np.abs(g) ** 2 / 4
        if not (np.all(np.isfinite(grad)) and np.all(np.isfinite(fid))):
            raise NumericalError("non-finite fidelity gradient",
                                 dump={"cx": controls.cx, "cy": controls.cy})
        return fid, grad


def gradient(model: TransmonModel, tm: TransferMatrix, controls: ControlSet,
             error_sample: ErrorSample = NO_ERROR, target=None) -> np.ndarray:
    """Exact gradient of ``F2`` w.r.t. ``[cx, cy]`` for one error sample."""
    ev = FidelityEvaluator(model, tm, [error_sample], target)
    return ev.fidelities_and_gradients(controls)[1][0]


# --------------------------------------------------------------------------
# subproblem


class SubproblemError(RuntimeError):
    pass


def solve_subproblem(fidelities, gradients, trust_region: float, controls: ControlSet,
                     mode: str = "worst_case", tikhonov: float = 0.0,
                     improvement_fraction: float = 0.0) -> np.ndarray:
    """Trust-region step maximizing the linearized worst-case (or mean) fidelity.

    Solves ``max t  s.t.  t <= F_i + g_i . x``, ``|x_k| <= trust_region`` and
    amplitude/slew feasibility of ``controls + x``.  With
    ``improvement_fraction = r > 0`` every sample must also gain at least
    ``r * (t - min F)`` in the linear model.  With ``tikhonov > 0`` the
    objective becomes ``t - tikhonov |x|^2`` (a QP).

    The program is solved in units of the trust region (``x = trust_region * y``)
    to keep it well scaled when the region is tiny.
    """
    fidelities = np.atleast_1d(np.asarray(fidelities, float))
    gradients = np.atleast_2d(np.asarray(gradients, float))
    if mode == "average_case":
        fidelities = np.array([fidelities.mean()])
        gradients = gradients.mean(axis=0, keepdims=True)
    if trust_region <= 0:
        raise ValueError("trust region must be positive")
    lam = trust_region
    c = controls.vector
    nv = c.size
    nc = controls.n_controls
    ns = len(fidelities)
    cap = controls.amplitude_cap
    lo = np.minimum(np.maximum(-1.0, (-cap - c) / lam), 0.0)
    hi = np.maximum(np.minimum(1.0, (cap - c) / lam), 0.0)

    # epigraph: t' <= (F_i - min F) / lam + g_i . y
    ones = np.ones((ns, 1))
    rows = [np.hstack([-gradients, ones])]
    rhs = [(fidelities - fidelities.min()) / lam]
    if improvement_fraction > 0 and ns > 1:
        rows.append(np.hstack([-gradients, improvement_fraction * ones]))
        rhs.append(np.zeros(ns))
    # slew on consecutive variables of each channel
    idx = np.concatenate([np.arange(nc - 1), np.arange(nc - 1) + nc])
    diff = np.zeros((idx.size, nv))
    diff[np.arange(idx.size), idx] = 1.0
    diff[np.arange(idx.size), idx + 1] = -1.0
    dc = diff @ c
    zero_col = np.zeros((idx.size, 1))
    rows += [np.hstack([diff, zero_col]), np.hstack([-diff, zero_col])]
    rhs += [np.maximum(controls.slew_limit - dc, 0.0) / lam,
            np.maximum(controls.slew_limit + dc, 0.0) / lam]
    a_ub = np.vstack(rows)
    b_ub = np.concatenate(rhs)
    bounds = np.column_stack([np.append(lo, -np.inf), np.append(hi, np.inf)])

    if tikhonov > 0:
        y = _solve_qp(a_ub, b_ub, bounds, tikhonov * lam, nv)
    else:
        cost = np.zeros(nv + 1)
        cost[-1] = -1.0
        res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
        if res.status != 0:
            raise SubproblemError(f"linear program failed: {res.message}")
        y = res.x[:nv]
    return lam * np.clip(y, lo, hi)


def _solve_qp(a_ub, b_ub, bounds, mu, nv):
    from scipy.optimize import minimize

    res = minimize(
        lambda z: (-z[-1] + mu * z[:nv] @ z[:nv], np.append(2 * mu * z[:nv], -1.0)),
        np.zeros(nv + 1), jac=True, method="SLSQP",
        bounds=[(lo if np.isfinite(lo) else None, hi if np.isfinite(hi) else None)
                for lo, hi in bounds],
        constraints=[{"type": "ineq", "fun": lambda z: b_ub - a_ub @ z,
                      "jac": lambda z: -a_ub}],
        options={"maxiter": 500, "ftol": 1e-14})
    if not res.success:
        raise SubproblemError(f"quadratic program failed: {res.message}")
    return res.x[:nv]


# --------------------------------------------------------------------------
# SCP loop


@dataclass(frozen=True)
class ScpConfig:
    trust_region_init: float = 0.1
    incr_factor: float = 1.2
    decr_factor: float = 0.5
    max_iterations: int = 10_000
    fidelity_target: float = 1 - 1e-12
    fidelity_diff_tol: float = 1e-10
    trust_region_min: float = 1e-9
    mode: Literal["worst_case", "average_case"] = "worst_case"
    rng_seed: int = 0
    tikhonov: float = 0.0
    improvement_fraction: float = 0.0
    plateau_window: int = 10
    acceptance: Literal["worst", "every"] = "worst"

    def __post_init__(self):
        if not self.incr_factor > 1:
            raise ValueError("incr_factor must exceed 1")
        if not 0 < self.decr_factor < 1:
            raise ValueError("decr_factor must lie in (0, 1)")
        if not self.trust_region_min > 0 or not self.trust_region_init > 0:
            raise ValueError("trust regions must be positive")
        if self.mode not in ("worst_case", "average_case"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.acceptance not in ("worst", "every"):
            raise ValueError(f"unknown acceptance rule {self.acceptance!r}")
        if self.max_iterations < 0 or self.plateau_window < 1:
            raise ValueError("iteration limits must be non-negative")


TERMINATIONS = ("fidelity_target", "fidelity_plateau", "trust_region_collapsed",
                "iteration_limit")


@dataclass
class OptimizationRecord:
    final_controls: ControlSet
    per_sample_fidelities: np.ndarray
    worst_case_fidelity: float
    iterations_used: int
    termination: str
    accepted_steps: int
    rejected_steps: int
    seed: int | None = None
    objective_trace: list = field(default_factory=list)
    trust_region_trace: list = field(default_factory=list)
    initial_controls: ControlSet | None = None
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)

    @property
    def mean_fidelity(self) -> float:
        return float(np.mean(self.per_sample_fidelities))

    @property
    def worst_case_infidelity(self) -> float:
        return 1.0 - self.worst_case_fidelity


def _objective(fid: np.ndarray, mode: str) -> float:
    return float(fid.min() if mode == "worst_case" else fid.mean())


def _accepts(trial: np.ndarray, current: np.ndarray, mode: str, rule: str) -> bool:
    if mode == "average_case":
        return bool(trial.mean() >= current.mean())
    if rule == "every":
        return bool(np.all(trial >= current))
    return bool(trial.min() >= current.min())


def run_scp(model: TransmonModel, tm: TransferMatrix, ensemble: ErrorEnsemble,
            config: ScpConfig, initial_controls: ControlSet, target=None,
            seed: int | None = None) -> OptimizationRecord:
    """Adaptive trust-region SCP from ``initial_controls``.

    Stops when the objective reaches ``fidelity_target``, the trust region
    falls below ``trust_region_min``, the objective gain averaged over the
    last ``plateau_window`` accepted steps drops below ``fidelity_diff_tol``,
    or after ``max_iterations`` subproblems.
    """
    start = time.perf_counter()
    if not check_feasible(initial_controls):
        raise ValueError("initial controls are infeasible")
    ev = FidelityEvaluator(model, tm, ensemble.samples, target)
    mode = config.mode
    controls = initial_controls
    fid, grad = ev.fidelities_and_gradients(controls)
    lam = config.trust_region_init
    objective_trace = [_objective(fid, mode)]
    trust_trace = [lam]
    gains: list[float] = []
    accepted = rejected = iterations = 0
    termination = None
    while termination is None:
        if _objective(fid, mode) >= config.fidelity_target:
            termination = "fidelity_target"
            break
        if lam < config.trust_region_min:
            termination = "trust_region_collapsed"
            break
        if iterations >= config.max_iterations:
            termination = "iteration_limit"
            break
        iterations += 1
        try:
            step = solve_subproblem(fid, grad, lam, controls, mode, config.tikhonov,
                                    config.improvement_fraction)
            trial = controls.with_vector(controls.vector + step)
            trial_fid = ev.fidelities(trial)
            ok = _accepts(trial_fid, fid, mode, config.acceptance)
        except SubproblemError:
            ok = False
        if ok:
            assert _accepts(trial_fid, fid, mode, config.acceptance)
            old = _objective(fid, mode)
            controls = trial
            fid, grad = ev.fidelities_and_gradients(controls)
            lam *= config.incr_factor
            accepted += 1
            objective_trace.append(_objective(fid, mode))
            gains.append(objective_trace[-1] - old)
            if (len(gains) >= config.plateau_window
                    and np.mean(gains[-config.plateau_window:]) < config.fidelity_diff_tol):
                termination = "fidelity_plateau"
        else:
            lam *= config.decr_factor
            rejected += 1
        trust_trace.append(lam)
    return OptimizationRecord(
        final_controls=controls,
        per_sample_fidelities=np.asarray(fid),
        worst_case_fidelity=float(np.min(fid)),
        iterations_used=iterations,
        termination=termination,
        accepted_steps=accepted,
        rejected_steps=rejected,
        seed=seed,
        objective_trace=objective_trace,
        trust_region_trace=trust_trace,
        initial_controls=initial_controls,
        wall_time=time.perf_counter() - start,
        config=asdict(config),
    )


StartSampler = Callable[[np.random.Generator, int], ControlSet]


def default_start_sampler(rng: np.random.Generator, n_controls: int) -> ControlSet:
    return sample_uniform_controls(rng, n_controls)


def start_seed(config: ScpConfig, index: int) -> int:
    return config.rng_seed + index


def _one_start(args):
    model, tm, ensemble, config, index, sampler, target = args
    seed = start_seed(config, index)
    rng = np.random.default_rng(seed)
    initial = sampler(rng, tm.n_controls)
    return run_scp(model, tm, ensemble, config, initial, target=target, seed=seed)


@dataclass
class MultistartResult:
    records: list
    best: OptimizationRecord

    @property
    def worst_case_fidelities(self) -> np.ndarray:
        return np.array([r.worst_case_fidelity for r in self.records])


def best_record(records, mode: str = "worst_case") -> OptimizationRecord:
    key = (lambda r: r.worst_case_fidelity) if mode == "worst_case" else (lambda r: r.mean_fidelity)
    return max(records, key=key)


def multistart(model: TransmonModel, tm: TransferMatrix, ensemble: ErrorEnsemble,
               config: ScpConfig, n_starts: int,
               start_sampler: StartSampler | None = None, jobs: int = 1,
               target=None) -> MultistartResult:
    """Independent SCP runs from random feasible starts.

    Start ``i`` draws its initial controls from a generator seeded with
    ``config.rng_seed + i``, so results do not depend on ``jobs``.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    sampler = start_sampler or default_start_sampler
    tasks = [(model, tm, ensemble, config, i, sampler, target) for i in range(n_starts)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_one_start, tasks))
    else:
        records = [_one_start(t) for t in tasks]
    return MultistartResult(records, best_record(records))


# --------------------------------------------------------------------------
# worst case over an error grid


@dataclass(frozen=True)
class WorstCaseCurve:
    etas: np.ndarray
    fidelities: np.ndarray

    @property
    def worst(self) -> float:
        return float(self.fidelities.min())

    @property
    def worst_infidelity(self) -> float:
        return 1.0 - self.worst


def error_grid(eta_max: float, n_grid: int = 41) -> np.ndarray:
    if n_grid < 3 or n_grid % 2 == 0:
        raise ValueError("n_grid must be odd and at least 3")
    if eta_max == 0:
        return np.zeros(1)
    return np.linspace(-eta_max, eta_max, n_grid)


def evaluate_worst_case(model: TransmonModel, tm: TransferMatrix | None, controls,
                        eta_max: float, n_grid: int = 41, detuning: float = 0.0,
                        lind: LindbladConfig | None = None, target=None) -> WorstCaseCurve:
    """``F_A`` over an evenly spaced amplitude-error grid on ``[-eta_max, eta_max]``.

    ``controls`` is a :class:`ControlSet` (filtered through ``tm``) or an
    already sampled :class:`~robustpulse.controls.Signal`.
    """
    sig = apply_filter(tm, controls) if isinstance(controls, ControlSet) else controls
    etas = error_grid(eta_max, n_grid)
    fids = average_fidelities(model, sig, [ErrorSample(e, detuning) for e in etas], lind,
                              target)
    return WorstCaseCurve(etas, fids)
