"""Fixed-step LTI integration, spectral checks, Lyapunov equations and Hankel singular values."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import DivergenceError, GlocalError, PreconditionError

DEFAULT_STEP = 1e-3
DEFAULT_HORIZON = 10.0


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        if self.states.shape[0] != self.times.shape[0]:
            raise ValueError("one state row per time sample is required")
        if not self.labels:
            object.__setattr__(
                self, "labels", tuple(f"x{j + 1}" for j in range(self.states.shape[1]))
            )

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def map(self, C: np.ndarray, labels: Sequence[str] | None = None) -> "Trajectory":
        """Trajectory of the linear output ``C x``."""
        C = np.atleast_2d(C)
        return Trajectory(self.times, self.states @ C.T, tuple(labels or ()))

    def to_csv(self, path) -> None:
        write_csv(path, self)


def write_csv(path, traj: Trajectory) -> None:
    data = np.column_stack([traj.times, traj.states])
    header = ",".join(("t",) + tuple(traj.labels))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, data, delimiter=",", fmt="%.17g", header=header, comments="")


def rk4_matrices(A: np.ndarray, B: np.ndarray, h: float):
    """One classical RK4 step for ``x' = A x + B u`` with ``u`` held over the step.

    For linear dynamics the four stages collapse to ``x+ = Phi x + Gamma u``.
    """
    n = A.shape[0]
    hA = h * A
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    I = np.eye(n)
    Phi = I + hA + hA2 / 2 + hA3 / 6 + (hA3 @ hA) / 24
    Gamma = h * (I + hA / 2 + hA2 / 6 + hA3 / 24) @ B
    return Phi, Gamma


def simulate(A, input_map=None, u: Callable | np.ndarray | None = None, x0=None,
             horizon: float = DEFAULT_HORIZON, step: float = DEFAULT_STEP,
             labels: Sequence[str] = ()) -> Trajectory:
    """Integrate ``x' = A x + input_map u`` with fixed-step RK4.

    ``u`` is either a callable ``u(t)`` sampled at the start of every step, an
    array with one row per step, or a constant vector; the input is held
    constant over each step.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    if horizon < step:
        raise ValueError(f"horizon {horizon} shorter than step {step}")
    steps = int(round(horizon / step))
    times = np.arange(steps + 1) * step
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()

    if input_map is None or u is None:
        Phi, _ = rk4_matrices(A, np.zeros((n, 0)), step)
        U, Gamma = None, None
    else:
        Bm = np.asarray(input_map, dtype=float)
        if Bm.ndim == 1:
            Bm = Bm.reshape(n, 1)
        Phi, Gamma = rk4_matrices(A, Bm, step)
        if callable(u):
            U = np.array([np.atleast_1d(u(t)) for t in times[:-1]], dtype=float)
        else:
            U = np.asarray(u, dtype=float)
            if U.ndim == 1:
                U = np.broadcast_to(U, (steps, U.shape[0]))
            elif U.shape[0] < steps:
                raise ValueError(f"input array has {U.shape[0]} rows, {steps} steps required")
        forced = U[:steps] @ Gamma.T

    X = np.empty((steps + 1, n))
    X[0] = x
    PhiT = Phi.T
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            x = x @ PhiT
            if U is not None:
                x = x + forced[k]
            X[k + 1] = x
            if not np.all(np.isfinite(x)):
                raise DivergenceError(times[k + 1])
    return Trajectory(times, X, tuple(labels))


def piecewise_constant_input(rng: np.random.Generator, m: int, horizon: float, step: float,
                             hold: float = 0.5, scale: float = 1.0) -> np.ndarray:
    """Random input array (one row per step) that changes value every ``hold`` seconds."""
    steps = int(round(horizon / step))
    per = max(1, int(round(hold / step)))
    levels = scale * rng.standard_normal((steps // per + 1, m))
    return np.repeat(levels, per, axis=0)[:steps]


def spectral_abscissa(A) -> float:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return -np.inf
    return float(np.max(np.linalg.eigvals(A).real))


def lyapunov_solve(A, Q) -> np.ndarray:
    """Solve ``A X + X A^T + Q = 0`` for Hurwitz ``A``."""
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    scale = 1.0 + np.linalg.norm(A, 1)
    if spectral_abscissa(A) >= -1e-12 * scale:
        raise PreconditionError("Lyapunov equation requires a Hurwitz matrix")
    X = sla.solve_continuous_lyapunov(A, -Q)
    res = np.linalg.norm(A @ X + X @ A.T + Q)
    if res > 1e-8 * max(np.linalg.norm(Q), 1e-300) * scale:
        raise GlocalError(f"Lyapunov residual {res:.3e} too large")
    return X


@dataclass(frozen=True)
class HankelResult:
    values: np.ndarray
    n_deflated: int
    deflated_modes: np.ndarray

    def distinct(self, rel_tol: float = 1e-6) -> np.ndarray:
        """Values merged when they agree to ``rel_tol`` relative to the largest value."""
        out: list[float] = []
        tol = rel_tol * (self.values[0] if len(self.values) else 1.0)
        for v in sorted(self.values):
            if not out or v - out[-1] > tol:
                out.append(float(v))
        return np.array(out)


def _sqrt_factor(W: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh((W + W.T) / 2)
    return V * np.sqrt(np.clip(w, 0.0, None))


def hankel_singular_values(A, B, C, deflate_tol: float = 1e-6) -> HankelResult:
    """Hankel singular values of the stable part of ``(A, B, C)``.

    Modes with ``Re(lambda) >= -deflate_tol`` are split off by an ordered real
    Schur form and a Sylvester-equation decoupling; gramians of the remaining
    stable part are combined by the square-root method.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    T, Z, s = sla.schur(A, output="real", sort=lambda re, im: re < -deflate_tol)
    n = A.shape[0]
    if s == 0:
        raise PreconditionError("every mode was deflated; no stable part remains")
    Bt = Z.T @ B
    Ct = C @ Z
    T11 = T[:s, :s]
    if s < n:
        X = sla.solve_sylvester(T11, -T[s:, s:], -T[:s, s:])
        B1 = Bt[:s] - X @ Bt[s:]
        # invariant subspace of the deflated block is Z [X; I]
        modes = np.linalg.qr(Z @ np.vstack([X, np.eye(n - s)]))[0]
    else:
        B1 = Bt
        modes = np.zeros((n, 0))
    C1 = Ct[:, :s]
    Wc = lyapunov_solve(T11, B1 @ B1.T)
    Wo = lyapunov_solve(T11.T, C1.T @ C1)
    hsv = np.linalg.svd(_sqrt_factor(Wo).T @ _sqrt_factor(Wc), compute_uv=False)
    return HankelResult(np.sort(hsv)[::-1], n - s, modes)
