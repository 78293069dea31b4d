"""Riccati-based subcontrollers, functional observers and glocal closed-loop assembly."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .decomposition import HierarchicalDecomposition, augmented_system
from .errors import InvalidParameterError, PreconditionError, SynthesisError, WiringError
from .network import ClusteredSystem
from .simulation import lyapunov_solve, piecewise_constant_input, simulate, spectral_abscissa
from .subspace import _orth, controllable_subspace

STABILITY_MARGIN = 1e-9
DETECT_TOL = 1e-8


# -- Riccati ------------------------------------------------------------------

@dataclass(frozen=True)
class RiccatiSolution:
    X: np.ndarray
    K: np.ndarray
    residual: float
    closed_loop_abscissa: float


def care_residual(A, B, Q, R, X) -> float:
    return float(np.linalg.norm(A.T @ X + X @ A - X @ B @ np.linalg.solve(R, B.T @ X) + Q))


def solve_care(A, B, Q, R, newton_steps: int = 1) -> RiccatiSolution:
    """Stabilizing solution of ``A'X + XA - XBR^-1B'X + Q = 0``.

    The stable invariant subspace of the Hamiltonian matrix is extracted with
    an ordered real Schur form; Kleinman-Newton passes then polish the result.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    if B.ndim < 2:
        B = B.reshape(A.shape[0], -1)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    n = A.shape[0]
    if np.linalg.norm(R - R.T) > 1e-12 * np.linalg.norm(R):
        raise InvalidParameterError("R must be symmetric")
    try:
        np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        raise InvalidParameterError("R must be positive definite") from None
    Q = (Q + Q.T) / 2
    if np.min(np.linalg.eigvalsh(Q)) < -1e-12 * max(1.0, np.linalg.norm(Q)):
        raise InvalidParameterError("Q must be positive semidefinite")

    G = B @ np.linalg.solve(R, B.T)
    H = np.block([[A, -G], [-Q, -A.T]])
    T, Z, sdim = sla.schur(H, output="real", sort="lhp")
    if sdim != n:
        raise SynthesisError(
            f"no stabilizing Riccati solution: Hamiltonian has {2 * n - 2 * sdim} eigenvalues "
            "on or near the imaginary axis (pair not stabilizable or weight not detectable)"
        )
    U1, U2 = Z[:n, :n], Z[n:, :n]
    if np.linalg.cond(U1) > 1e12:
        raise SynthesisError("stable Hamiltonian subspace is not a graph subspace")
    X = np.linalg.solve(U1.T, U2.T).T
    X = (X + X.T) / 2
    for _ in range(newton_steps):
        K = np.linalg.solve(R, B.T @ X)
        Acl = A - B @ K
        if spectral_abscissa(Acl) >= 0:
            break
        Xn = lyapunov_solve(Acl.T, Q + K.T @ R @ K)
        Xn = (Xn + Xn.T) / 2
        if care_residual(A, B, Q, R, Xn) <= care_residual(A, B, Q, R, X):
            X = Xn
    K = np.linalg.solve(R, B.T @ X)
    res = care_residual(A, B, Q, R, X)
    absc = spectral_abscissa(A - B @ K)
    if res > 1e-8 * (1 + np.linalg.norm(X)):
        raise SynthesisError(f"Riccati residual {res:.3e} exceeds tolerance")
    if absc >= 0:
        raise SynthesisError(f"Riccati solution is not stabilizing (abscissa {absc:.3e})")
    if np.min(np.linalg.eigvalsh(X)) < -1e-8 * (1 + np.linalg.norm(X)):
        raise SynthesisError("Riccati solution is not positive semidefinite")
    return RiccatiSolution(X, K, res, absc)


# -- observer-based controllers -------------------------------------------------

@dataclass(frozen=True)
class DynamicController:
    """``z' = A_K z + B_K y``, ``u = C_K z``."""

    A_K: np.ndarray
    B_K: np.ndarray
    C_K: np.ndarray
    design_abscissa: float = float("nan")
    n_unobservable: int = 0
    label: str = ""

    @property
    def order(self) -> int:
        return self.A_K.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B_K.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C_K.shape[0]

    def to_dict(self) -> dict:
        return {
            "A_K": self.A_K.tolist(), "B_K": self.B_K.tolist(), "C_K": self.C_K.tolist(),
            "design_abscissa": self.design_abscissa, "n_unobservable": self.n_unobservable,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DynamicController":
        return cls(np.array(d["A_K"], dtype=float).reshape(len(d["A_K"]), -1),
                   np.array(d["B_K"], dtype=float).reshape(len(d["B_K"]), -1),
                   np.array(d["C_K"], dtype=float).reshape(len(d["C_K"]), -1),
                   float(d.get("design_abscissa", float("nan"))),
                   int(d.get("n_unobservable", 0)), d.get("label", ""))


def closed_loop_matrix(A, B, C, K: DynamicController) -> np.ndarray:
    return np.block([[A, B @ K.C_K], [K.B_K @ C, K.A_K]])


def observable_basis(A, C, tol: float = 1e-9) -> np.ndarray:
    return controllable_subspace(np.asarray(A).T, np.asarray(C).T, tol).Q


def lqr_observer_controller(A, B, C, Q, R, Qo, Ro, label: str = "",
                            detect_tol: float = DETECT_TOL) -> DynamicController:
    """Observer-based LQR controller ``A-BK-HC, H, -K``.

    When ``(A, C)`` has unobservable modes the design is carried out on the
    observable quotient; those modes must not be unstable.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    n = A.shape[0]
    V = observable_basis(A, C)
    n_unobs = n - V.shape[1]
    if n_unobs:
        W = sla.null_space(V.T) if V.shape[1] else np.eye(n)
        unobs = np.linalg.eigvals(W.T @ A @ W)
        if np.max(unobs.real) > detect_tol:
            raise SynthesisError(
                f"pair is not detectable: unobservable mode at {unobs[np.argmax(unobs.real)]:.4g}"
            )
        A_r, B_r, C_r = V.T @ A @ V, V.T @ B, C @ V
        Q_r, Qo_r = V.T @ Q @ V, V.T @ Qo @ V
    else:
        A_r, B_r, C_r, Q_r, Qo_r = A, B, C, Q, Qo
    ctrl = solve_care(A_r, B_r, Q_r, R)
    obs = solve_care(A_r.T, C_r.T, Qo_r, Ro)
    K = ctrl.K
    H = obs.K.T
    A_K = A_r - B_r @ K - H @ C_r
    dc = DynamicController(A_K, H, -K, 0.0, n_unobs, label)
    absc = spectral_abscissa(closed_loop_matrix(A_r, B_r, C_r, dc))
    if absc >= -STABILITY_MARGIN:
        raise SynthesisError(f"observer-based loop not Hurwitz (abscissa {absc:.3e})")
    return DynamicController(A_K, H, -K, absc, n_unobs, label)


def benchmark_weights(n: int, r: int, scale: float = 1.0, state_dim: int = 2):
    """``(Q, R, Qo, Ro)`` with angle/frequency weights ``diag(1, 1e4)`` per component."""
    per = np.diag([1.0, 1e4]) if state_dim == 2 else np.eye(state_dim)
    Q = scale * np.kron(np.eye(r), per)
    if Q.shape[0] != n:
        Q = scale * np.eye(n)
    R = 1e2 * np.eye(r)
    return Q, R, 1e3 * np.eye(n), R.copy()


# -- functional observers -----------------------------------------------------

@dataclass(frozen=True)
class FunctionalObserver:
    """Estimator of ``C_i xi_i`` from ``y_i``, ``v_i``, ``u_i`` and the broadcast ``u_0``.

    State ``w`` (``(phi, x_hat)`` for the full realization) with
    ``w' = F w + G_u u_i + G_0 u_0 + G_y y_i + G_v v_i`` and
    ``psi = D w + y_i``. ``basis`` is set on reduced realizations and maps them
    into the full coordinates.
    """

    cluster: int
    F: np.ndarray
    G_u: np.ndarray
    G_0: np.ndarray
    G_y: np.ndarray
    G_v: np.ndarray
    D: np.ndarray
    A_hat: np.ndarray
    A_loc: np.ndarray
    basis: np.ndarray | None = None

    @property
    def order(self) -> int:
        return self.F.shape[0]

    @property
    def is_full(self) -> bool:
        return self.basis is None

    def minimal(self, tol: float = 1e-9) -> "FunctionalObserver":
        """Drop states that never reach ``psi``."""
        V = observable_basis(self.F, self.D, tol)
        if V.shape[1] == self.F.shape[0]:
            return self
        Vt = V.T
        base = V if self.basis is None else self.basis @ V
        return FunctionalObserver(
            self.cluster, Vt @ self.F @ V, Vt @ self.G_u, Vt @ self.G_0, Vt @ self.G_y,
            Vt @ self.G_v, self.D @ V, self.A_hat, self.A_loc, base,
        )


def build_functional_observer(cs: ClusteredSystem, hd: HierarchicalDecomposition, i: int,
                              tol: float = STABILITY_MARGIN) -> FunctionalObserver:
    """Functional observer for cluster ``i`` (0-based).

    The local decomposition block must be Hurwitz. Component dynamics may keep
    semistable modes as long as every mode that reaches ``psi`` is stable.
    """
    Ah = np.asarray(hd.Ai_hat[i])
    Ai = np.asarray(cs.A_blocks[i])
    Li = np.asarray(cs.L_blocks[i])
    Bi = np.asarray(cs.B_blocks[i])
    Ci = np.asarray(cs.C_blocks[i])
    P = cs.Ps[i]
    g = P.T @ cs.global_input
    ni = Ah.shape[0]
    if spectral_abscissa(Ah) >= -tol:
        raise PreconditionError(
            f"cluster {i + 1}: local decomposition block is not Hurwitz "
            f"(abscissa {spectral_abscissa(Ah):.3e})"
        )
    if spectral_abscissa(Ai) > tol:
        raise PreconditionError(
            f"cluster {i + 1}: component dynamics are unstable (abscissa {spectral_abscissa(Ai):.3e})"
        )
    Z = np.zeros((ni, ni))
    obs = FunctionalObserver(
        cluster=i + 1,
        F=np.block([[Ah, Ai - Ah], [Z, Ai]]),
        G_u=np.vstack([np.zeros_like(Bi), Bi]),
        G_0=np.vstack([g, g]),
        G_y=np.zeros((2 * ni, Ci.shape[0])),
        G_v=np.vstack([Li, Li]),
        D=np.hstack([-Ci, np.zeros_like(Ci)]),
        A_hat=Ah,
        A_loc=Ai,
    )
    red = obs.minimal()
    if spectral_abscissa(red.F) >= -tol:
        raise PreconditionError(
            f"cluster {i + 1}: observer error modes reaching the estimate are not stable"
        )
    return obs


def _cascade(cs: ClusteredSystem, hd: HierarchicalDecomposition):
    """State, input and coordinate matrices of the (possibly robust) cascade."""
    n = cs.n
    A_xi = hd.cascade_matrix()
    n_loc = A_xi.shape[0] - cs.n_global
    Bx = sla.block_diag(cs.Bdiag, cs.B0)
    # x = [I, P_0 (, I)] z in cluster order
    recon = np.hstack([np.eye(n_loc), cs.P0])
    if hd.robust:
        top = np.hstack([A_xi, np.vstack([np.vstack(hd.Ei_hat), hd.E0_hat])])
        bottom = np.hstack([np.hstack(hd.Fi_hat), hd.F0_hat, hd.Ae_hat])
        A_xi = np.vstack([top, bottom])
        Bx = np.vstack([Bx, np.hstack([np.zeros((n, cs.Bdiag.shape[1])), cs.input_leakage])])
        recon = np.hstack([recon, np.eye(n)])
    return A_xi, Bx, recon, n_loc


def verify_observer_conditions(obs: FunctionalObserver, cs: ClusteredSystem,
                               hd: HierarchicalDecomposition) -> dict:
    """Residuals of the three functional-observer identities for ``obs``.

    With ``U = [[0, P_i'P_0 (, P_i')], [E_i, P_i'P_0 (, P_i')]]`` mapping cascade
    states to observer states: ``U A - F U = G_y C_y + G_v M_i X``,
    ``U B = [G_u, G_0]`` and ``D U + C_y = C_i E_i``.
    """
    if not obs.is_full:
        raise InvalidParameterError("identities are stated for the full observer realization")
    i = obs.cluster - 1
    A_xi, Bx, X, n_loc = _cascade(cs, hd)
    P = cs.Ps[i]
    E_i = P.T @ X[:, :n_loc]
    top = np.hstack([np.zeros_like(E_i), P.T @ X[:, n_loc:]])
    U = np.vstack([top, P.T @ X])
    Ci = np.asarray(cs.C_blocks[i])
    Cy = Ci @ P.T @ X
    Vm = cs.interaction_rows(i) @ X
    syl = U @ A_xi - obs.F @ U - obs.G_y @ Cy - obs.G_v @ Vm
    m_loc = cs.Bdiag.shape[1]
    off = sum(cs.r[:i])
    G_full = np.zeros((U.shape[0], Bx.shape[1]))
    G_full[:, off:off + cs.r[i]] = obs.G_u
    G_full[:, m_loc:] = obs.G_0
    inp = U @ Bx - G_full
    target = np.zeros((Ci.shape[0], U.shape[1]))
    target[:, :n_loc] = Ci @ E_i
    out = obs.D @ U + Cy - target
    return {
        "sylvester": float(np.linalg.norm(syl)),
        "input": float(np.linalg.norm(inp)),
        "output": float(np.linalg.norm(out)),
    }


def intra_cluster_modes(cs: ClusteredSystem, hd: HierarchicalDecomposition, i: int) -> np.ndarray:
    """Eigenvalues of ``Ai_hat`` (cluster ``i``, 0-based) away from the synchronous directions.

    The synchronous directions ``im P_i'P_0`` duplicate global behaviour and are
    factored out; what remains are the oscillations inside the cluster.
    """
    S = _orth(cs.Ps[i].T @ cs.P0, 1e-9)
    Wc = sla.null_space(S.T)
    return np.linalg.eigvals(Wc.T @ hd.Ai_hat[i] @ Wc)


def observer_error_trace(cs: ClusteredSystem, hd: HierarchicalDecomposition, i: int,
                         horizon: float = 1500.0, step: float = 1e-2, seed: int = 0,
                         hold: float = 0.5, observer: FunctionalObserver | None = None,
                         consistent: bool = False):
    """Co-simulate plant, cascade and the observer of cluster ``i`` (0-based).

    Plant and cascade start from a random consistent split under random
    piecewise-constant inputs. The observer starts at zero unless
    ``consistent`` is set, in which case it starts at ``(P_i'P_0 xi_0, x_i)``.
    Returns ``(times, |psi_i - C_i xi_i|)`` with the norm taken per sample.
    """
    Aa, Ba, sl = augmented_system(cs, hd)
    obs = observer or build_functional_observer(cs, hd, i)
    if not obs.is_full and consistent:
        raise InvalidParameterError("consistent initialization needs the full observer")
    na, no = Aa.shape[0], obs.order
    P = cs.Ps[i]
    Ci = cs.C_blocks[i]
    sx = sl["x"]
    yi = np.zeros((Ci.shape[0], na))
    yi[:, sx] = Ci @ P.T
    vi = np.zeros((cs.interaction_rows(i).shape[0], na))
    vi[:, sx] = cs.interaction_rows(i)
    Ab = np.zeros((na + no, na + no))
    Ab[:na, :na] = Aa
    Ab[na:, na:] = obs.F
    Ab[na:, :na] = obs.G_y @ yi + obs.G_v @ vi
    Bb = np.zeros((na + no, Ba.shape[1]))
    Bb[:na] = Ba
    Bb[na:, sl["u"][i]] = obs.G_u
    Bb[na:, sl["u0"]] = obs.G_0

    rng = np.random.default_rng(seed)
    z0 = np.zeros(na + no)
    for s in sl["xi"]:
        z0[s] = rng.standard_normal(s.stop - s.start)
    z0[sl["xi0"]] = rng.standard_normal(cs.n_global)
    z0[sx] = cs.P0 @ z0[sl["xi0"]] + sum(Pj @ z0[s] for Pj, s in zip(cs.Ps, sl["xi"]))
    if consistent:
        ni = P.shape[1]
        z0[na:na + ni] = P.T @ cs.P0 @ z0[sl["xi0"]]
        z0[na + ni:] = P.T @ z0[sx]
    u = piecewise_constant_input(rng, Ba.shape[1], horizon, step, hold)
    traj = simulate(Ab, Bb, u, z0, horizon, step)
    psi = traj.states[:, na:] @ obs.D.T + traj.states[:, :na] @ yi.T
    err = psi - traj.states[:, sl["xi"][i]] @ Ci.T
    return traj.times, np.linalg.norm(err, axis=1)


# -- glocal assembly ----------------------------------------------------------

@dataclass(frozen=True)
class GlocalController:
    """Star-topology bundle: one global and per-cluster local subcontrollers with observers."""

    K0: DynamicController | None
    Ks: tuple
    observers: tuple

    @property
    def topology(self) -> str:
        return "star"

    def to_dict(self) -> dict:
        return {
            "topology": "star",
            "K0": None if self.K0 is None else self.K0.to_dict(),
            "Ks": [None if k is None else k.to_dict() for k in self.Ks],
        }


def design_global(cs: ClusteredSystem, hd: HierarchicalDecomposition, scale: float = 1.0,
                  weights=None) -> DynamicController:
    """Global subcontroller on ``(A0_hat, B_0)`` measuring the summed cluster outputs."""
    n0 = cs.n_global
    Q, R, Qo, Ro = weights or benchmark_weights(n0, cs.N, scale, cs.state_dim)
    return lqr_observer_controller(hd.A0_hat, cs.B0, cs.C0_seen, Q, R, Qo, Ro, label="K0")


def design_local(cs: ClusteredSystem, hd: HierarchicalDecomposition, i: int, scale: float = 1.0,
                 weights=None) -> DynamicController:
    """Local subcontroller for cluster ``i`` (0-based) on ``(Ai_hat, B_i, C_i)``."""
    ni = hd.Ai_hat[i].shape[0]
    Q, R, Qo, Ro = weights or benchmark_weights(ni, cs.r[i], scale, cs.state_dim)
    return lqr_observer_controller(hd.Ai_hat[i], cs.B_blocks[i], cs.C_blocks[i], Q, R, Qo, Ro,
                                   label=f"K{i + 1}")


def design_glocal(cs: ClusteredSystem, hd: HierarchicalDecomposition, scale0: float = 1.0,
                  scales=None) -> GlocalController:
    scales = scales or [1.0] * cs.N
    K0 = design_global(cs, hd, scale0)
    Ks = tuple(design_local(cs, hd, i, s) for i, s in enumerate(scales))
    obs = tuple(build_functional_observer(cs, hd, i) for i in range(cs.N))
    return GlocalController(K0, Ks, obs)


def design_centralized(cs: ClusteredSystem, scale: float = 1.0) -> DynamicController:
    Q, R, Qo, Ro = benchmark_weights(cs.n, sum(cs.r), scale, cs.state_dim)
    return lqr_observer_controller(cs.A, cs.Bdiag, cs.Cdiag, Q, R, Qo, Ro, label="centralized")


@dataclass(frozen=True)
class ClosedLoop:
    """Plant with global/local subcontrollers and functional observers in one realization.

    State layout: plant (cluster order), global controller, then per cluster the
    observer state followed by the local controller state.
    """

    A: np.ndarray
    slices: dict
    regime: str
    invariant: np.ndarray
    cs: ClusteredSystem = field(repr=False)

    @property
    def order(self) -> int:
        return self.A.shape[0]

    def spectrum(self) -> np.ndarray:
        return np.linalg.eigvals(self.A)

    def abscissa(self) -> float:
        return spectral_abscissa(self.A)

    @property
    def n_deflated(self) -> int:
        return self.invariant.shape[1]

    def deflated_matrix(self) -> np.ndarray:
        """Closed loop on the quotient by the uncontrollable rigid-motion subspace."""
        if self.n_deflated == 0:
            return self.A
        Wc = sla.null_space(self.invariant.T)
        return Wc.T @ self.A @ Wc

    def deflated_abscissa(self) -> float:
        return spectral_abscissa(self.deflated_matrix())

    def invariance_defect(self) -> float:
        W = self.invariant
        if W.shape[1] == 0:
            return 0.0
        AW = self.A @ W
        return float(np.linalg.norm(AW - W @ (W.T @ AW)))

    def cross_coupling(self) -> float:
        """Largest entry linking distinct local subcontroller/observer groups."""
        groups = [self.slices[f"local{i + 1}"] for i in range(self.cs.N)
                  if f"local{i + 1}" in self.slices]
        worst = 0.0
        for a in groups:
            for b in groups:
                if a != b:
                    blk = self.A[a, b]
                    if blk.size:
                        worst = max(worst, float(np.max(np.abs(blk))))
        return worst

    def simulate(self, x0, horizon: float = 10.0, step: float = 1e-3, z0=None):
        """Free response from plant state ``x0`` (cluster order); controller states start at ``z0`` or 0."""
        full = np.zeros(self.order)
        full[self.slices["x"]] = x0
        if z0 is not None:
            full[self.slices["x"].stop:] = z0
        return simulate(self.A, None, None, full, horizon, step)


def _rigid_modes(cs: ClusteredSystem, tol: float = 1e-10) -> np.ndarray:
    """Plant directions invisible to dynamics, measurements and interactions."""
    stacked = np.vstack([cs.A, cs.Cdiag, cs.M])
    return sla.null_space(stacked, rcond=tol)


def assemble_glocal(cs: ClusteredSystem, hd: HierarchicalDecomposition | None,
                    K0: DynamicController | None, Ks=None, observers=None,
                    minimal_observers: bool = True) -> ClosedLoop:
    """Wire the plant with a global controller and local controllers behind observers.

    ``K0=None`` drops the global loop, ``Ks=None`` (or ``None`` entries) drops
    local loops; observers are only instantiated for active local loops and
    are built from ``hd`` when not supplied.
    """
    N = cs.N
    Ks = list(Ks) if Ks is not None else [None] * N
    if len(Ks) != N:
        raise WiringError(f"{len(Ks)} local controllers for {N} clusters")
    active = [i for i in range(N) if Ks[i] is not None]
    obs = [None] * N
    for i in active:
        o = observers[i] if observers is not None and observers[i] is not None else None
        if o is None:
            if hd is None:
                raise WiringError("a decomposition is required to build observers")
            o = build_functional_observer(cs, hd, i)
        if minimal_observers:
            o = o.minimal()
        obs[i] = o

    n = cs.n
    y0_map = cs.global_output
    if K0 is not None and (K0.n_inputs != y0_map.shape[0] or K0.n_outputs != N):
        raise WiringError("global controller dimensions do not match the global measurement/input")
    sizes = [("x", n)]
    if K0 is not None:
        sizes.append(("k0", K0.order))
    for i in active:
        Ci = cs.C_blocks[i]
        if Ks[i].n_inputs != Ci.shape[0] or Ks[i].n_outputs != cs.B_blocks[i].shape[1]:
            raise WiringError(f"local controller {i + 1} dimensions do not match cluster {i + 1}")
        sizes.append((f"obs{i + 1}", obs[i].order))
        sizes.append((f"k{i + 1}", Ks[i].order))
    sl = {}
    o = 0
    for name, s in sizes:
        sl[name] = slice(o, o + s)
        o += s
    Acl = np.zeros((o, o))
    sx = sl["x"]
    Acl[sx, sx] = cs.A
    G = cs.global_input

    # u_0 = C_K0 z_0 enters the plant and every active observer (star topology)
    if K0 is not None:
        s0 = sl["k0"]
        Acl[s0, s0] = K0.A_K
        Acl[s0, sx] = K0.B_K @ y0_map
        Acl[sx, s0] = G @ K0.C_K
    for i in active:
        P = cs.Ps[i]
        Ci = cs.C_blocks[i]
        so, sk = sl[f"obs{i + 1}"], sl[f"k{i + 1}"]
        Ob, K = obs[i], Ks[i]
        yi = Ci @ P.T
        vi = cs.interaction_rows(i)
        Acl[so, so] = Ob.F
        Acl[so, sx] += Ob.G_y @ yi + Ob.G_v @ vi
        Acl[so, sk] += Ob.G_u @ K.C_K
        if K0 is not None:
            Acl[so, sl["k0"]] += Ob.G_0 @ K0.C_K
        # psi_i = D w + y_i feeds K_i only
        Acl[sk, sk] = K.A_K
        Acl[sk, so] = K.B_K @ Ob.D
        Acl[sk, sx] = K.B_K @ yi
        Acl[sx, sk] += P @ cs.B_blocks[i] @ K.C_K
        sl[f"local{i + 1}"] = slice(so.start, sk.stop)

    regime = {(True, True): "glocal", (True, False): "global-only",
              (False, True): "local-only", (False, False): "free"}[(K0 is not None, bool(active))]
    W = _rigid_modes(cs)
    inv = np.zeros((o, W.shape[1]))
    inv[sx] = W
    return ClosedLoop(Acl, sl, regime, inv, cs)


def assemble_centralized(cs: ClusteredSystem, K: DynamicController) -> ClosedLoop:
    A = closed_loop_matrix(cs.A, cs.Bdiag, cs.Cdiag, K)
    n = cs.n
    sl = {"x": slice(0, n), "k": slice(n, A.shape[0])}
    W = _rigid_modes(cs)
    inv = np.zeros((A.shape[0], W.shape[1]))
    inv[:n] = W
    return ClosedLoop(A, sl, "centralized", inv, cs)


def robust_global_loop(cs: ClusteredSystem, rhd, K0: DynamicController) -> np.ndarray:
    """Downstream loop of the error-augmented cascade: ``(xi_0, e)`` with the global controller.

    ``u_0`` acts on ``xi_0`` through ``B_0`` and on ``e`` through the input
    leakage; the controller measures ``y_0`` of ``P_0 xi_0 + e``.
    """
    n = cs.n
    Ap = np.block([[rhd.A0_hat, rhd.E0_hat], [rhd.F0_hat, rhd.Ae_hat]])
    Bp = np.vstack([cs.B0, cs.input_leakage])
    Cp = cs.global_output @ np.hstack([cs.P0, np.eye(n)])
    return closed_loop_matrix(Ap, Bp, Cp, K0)


# -- export -------------------------------------------------------------------

def save_controller(path, ctrl: GlocalController | DynamicController) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(ctrl.to_dict(), indent=1))


def load_controller(path):
    """Inverse of :func:`save_controller`; observers are not stored and are rebuilt on assembly."""
    d = json.loads(Path(path).read_text())
    if "topology" in d:
        K0 = None if d["K0"] is None else DynamicController.from_dict(d["K0"])
        Ks = tuple(None if k is None else DynamicController.from_dict(k) for k in d["Ks"])
        return GlocalController(K0, Ks, tuple(None for _ in Ks))
    return DynamicController.from_dict(d)
