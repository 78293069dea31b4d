"""Exact and robust hierarchical model decompositions and their superposition checks.

A decomposition replaces the clustered system by a cascade: upstream local
blocks ``xi_i' = Ai_hat xi_i + B_i u_i`` feed a downstream global block
``xi_0' = A0_hat xi_0 + sum_i Ri_hat xi_i + B_0 u_0``, and the original state
is recovered as ``x = sum_i P_i xi_i + P_0 xi_0`` (plus an error state ``e`` in
the robust variant).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .errors import ExistenceError, InvalidParameterError
from .network import ClusteredSystem
from .simulation import piecewise_constant_input, simulate

DECOMPOSITION_TOL = 1e-10


@dataclass(frozen=True)
class HierarchicalDecomposition:
    A0_hat: np.ndarray
    Ai_hat: tuple
    Ri_hat: tuple
    residuals: dict

    @property
    def N(self) -> int:
        return len(self.Ai_hat)

    @property
    def max_residual(self) -> float:
        return max([self.residuals["global"], *self.residuals["local"]])

    @property
    def robust(self) -> bool:
        return False

    def cascade_matrix(self) -> np.ndarray:
        """State matrix of the cascade in the coordinates ``(xi_1..xi_N, xi_0)``."""
        D = sla.block_diag(*self.Ai_hat)
        R = np.hstack(self.Ri_hat)
        n0 = self.A0_hat.shape[0]
        return np.block([[D, np.zeros((D.shape[0], n0))], [R, self.A0_hat]])

    def to_dict(self) -> dict:
        return {
            "A0_hat": self.A0_hat.tolist(),
            "Ai_hat": [a.tolist() for a in self.Ai_hat],
            "Ri_hat": [r.tolist() for r in self.Ri_hat],
            "residuals": self.residuals,
        }


@dataclass(frozen=True)
class RobustDecomposition(HierarchicalDecomposition):
    """Decomposition with an explicit error state that only feeds the global block.

    ``Ei_hat`` are zero so the local blocks never see ``e``; ``Ae_hat + P_0 E0_hat
    + sum_i P_i Ei_hat`` reproduces ``A``.
    """

    Ae_hat: np.ndarray = None
    E0_hat: np.ndarray = None
    Ei_hat: tuple = ()
    F0_hat: np.ndarray = None
    Fi_hat: tuple = ()
    leakage_norms: dict = field(default_factory=dict)

    @property
    def robust(self) -> bool:
        return True

    @property
    def exact(self) -> bool:
        return self.total_leakage <= DECOMPOSITION_TOL

    @property
    def total_leakage(self) -> float:
        return max([self.leakage_norms["F0"], *self.leakage_norms["Fi"]])

    def bookkeeping_residual(self, cs: ClusteredSystem) -> float:
        total = self.Ae_hat + cs.P0 @ self.E0_hat
        for P, E in zip(cs.Ps, self.Ei_hat):
            total = total + P @ E
        return float(np.linalg.norm(total - cs.A))

    def to_dict(self) -> dict:
        out = super().to_dict()
        out.update({
            "Ae_hat": self.Ae_hat.tolist(),
            "E0_hat": self.E0_hat.tolist(),
            "Ei_hat": [e.tolist() for e in self.Ei_hat],
            "F0_hat": self.F0_hat.tolist(),
            "Fi_hat": [f.tolist() for f in self.Fi_hat],
            "leakage_norms": self.leakage_norms,
        })
        return out


def _least_squares(cs: ClusteredSystem):
    A, P0 = cs.A, cs.P0
    A0 = np.linalg.pinv(P0) @ A @ P0
    Ai, Ri = [], []
    for P in cs.Ps:
        sol = np.linalg.pinv(np.hstack([P, P0])) @ (A @ P)
        k = P.shape[1]
        Ai.append(sol[:k])
        Ri.append(sol[k:])
    F0 = A @ P0 - P0 @ A0
    Fi = [A @ P - P @ a - P0 @ r for P, a, r in zip(cs.Ps, Ai, Ri)]
    return A0, Ai, Ri, F0, Fi


def decompose(cs: ClusteredSystem, tol: float = DECOMPOSITION_TOL) -> HierarchicalDecomposition:
    """Exact decomposition with the minimum-norm local/coupling matrices.

    Raises :class:`ExistenceError` when any defining residual exceeds ``tol``
    relative to ``max(1, ||A||_F)``.
    """
    A0, Ai, Ri, F0, Fi = _least_squares(cs)
    residuals = {
        "global": float(np.linalg.norm(F0)),
        "local": [float(np.linalg.norm(F)) for F in Fi],
    }
    scale = max(1.0, float(np.linalg.norm(cs.A)))
    bad = [i + 1 for i, r in enumerate(residuals["local"]) if r > tol * scale]
    if residuals["global"] > tol * scale or bad:
        where = ", ".join([f"cluster {i}" for i in bad] +
                          (["global block"] if residuals["global"] > tol * scale else []))
        raise ExistenceError(
            f"no exact hierarchical decomposition: residual above {tol:g} in {where}",
            residuals,
        )
    return HierarchicalDecomposition(A0, tuple(Ai), tuple(Ri), residuals)


def retrofit_decomposition(cs: ClusteredSystem) -> HierarchicalDecomposition:
    """Singleton-cluster decomposition with the local blocks fixed to the component dynamics."""
    if any(r != 1 for r in cs.r):
        raise InvalidParameterError("retrofit representation needs singleton clusters")
    A, P0 = cs.A, cs.P0
    A0 = np.linalg.pinv(P0) @ A @ P0
    Ai = tuple(np.array(a) for a in cs.A_blocks)
    Ri = tuple(np.linalg.pinv(P0) @ (A @ P - P @ a) for P, a in zip(cs.Ps, Ai))
    residuals = {
        "global": float(np.linalg.norm(A @ P0 - P0 @ A0)),
        "local": [float(np.linalg.norm(A @ P - P @ a - P0 @ r))
                  for P, a, r in zip(cs.Ps, Ai, Ri)],
    }
    return HierarchicalDecomposition(A0, Ai, Ri, residuals)


def robust_decompose(cs: ClusteredSystem) -> RobustDecomposition:
    """Least-squares decomposition with error dynamics; always exists.

    The error injection into the global block is fixed to zero, hence the
    error state evolves with ``A`` itself and is driven by the leakage terms.
    """
    A0, Ai, Ri, F0, Fi = _least_squares(cs)
    n = cs.n
    leak = {
        "F0": float(np.linalg.norm(F0)),
        "Fi": [float(np.linalg.norm(F)) for F in Fi],
        "input": float(np.linalg.norm(cs.input_leakage)),
    }
    return RobustDecomposition(
        A0_hat=A0,
        Ai_hat=tuple(Ai),
        Ri_hat=tuple(Ri),
        residuals={"global": leak["F0"], "local": list(leak["Fi"])},
        Ae_hat=np.array(cs.A),
        E0_hat=np.zeros((cs.n_global, n)),
        Ei_hat=tuple(np.zeros((P.shape[1], n)) for P in cs.Ps),
        F0_hat=F0,
        Fi_hat=tuple(Fi),
        leakage_norms=leak,
    )


# -- superposition replay -----------------------------------------------------

def augmented_system(cs: ClusteredSystem, hd: HierarchicalDecomposition):
    """Joint realization of the original system and its decomposition.

    State ``(x, xi_1..xi_N, xi_0[, e])`` and input ``(u_1..u_N, u_0)`` with
    ``u_i`` of length ``r_i``. Returns ``(A, B, slices)``.
    """
    n, N = cs.n, cs.N
    dims = [P.shape[1] for P in cs.Ps]
    n0 = cs.n_global
    ne = n if hd.robust else 0
    total = n + sum(dims) + n0 + ne
    m_loc = sum(cs.r)
    m = m_loc + N
    Aa = np.zeros((total, total))
    Ba = np.zeros((total, m))

    sx = slice(0, n)
    offs = np.cumsum([n] + dims)
    sxi = [slice(offs[i], offs[i + 1]) for i in range(N)]
    s0 = slice(offs[-1], offs[-1] + n0)
    se = slice(s0.stop, s0.stop + ne)
    su0 = slice(m_loc, m)
    uoffs = np.cumsum([0] + list(cs.r))
    sui = [slice(uoffs[i], uoffs[i + 1]) for i in range(N)]

    Aa[sx, sx] = cs.A
    Ba[sx, :m_loc] = cs.Bdiag
    Ba[sx, su0] = cs.global_input
    for i in range(N):
        Aa[sxi[i], sxi[i]] = hd.Ai_hat[i]
        Aa[s0, sxi[i]] = hd.Ri_hat[i]
        Ba[sxi[i], sui[i]] = cs.B_blocks[i]
    Aa[s0, s0] = hd.A0_hat
    Ba[s0, su0] = cs.B0
    if hd.robust:
        Aa[se, se] = hd.Ae_hat
        Aa[se, s0] = hd.F0_hat
        Aa[s0, se] = hd.E0_hat
        for i in range(N):
            Aa[se, sxi[i]] = hd.Fi_hat[i]
            Aa[sxi[i], se] = hd.Ei_hat[i]
        # input leakage enters the error state when input matrices differ inside a cluster
        Ba[se, su0] = cs.input_leakage
    slices = {"x": sx, "xi": sxi, "xi0": s0, "e": se, "u": sui, "u0": su0}
    return Aa, Ba, slices


def superposition_error(cs: ClusteredSystem, hd: HierarchicalDecomposition, states: np.ndarray,
                        slices: dict, include_error: bool = True) -> np.ndarray:
    """Per-sample norm of ``x - sum P_i xi_i - P_0 xi_0 [- e]``."""
    recon = states[:, slices["xi0"]] @ cs.P0.T
    for P, s in zip(cs.Ps, slices["xi"]):
        recon = recon + states[:, s] @ P.T
    if hd.robust and include_error:
        recon = recon + states[:, slices["e"]]
    return np.linalg.norm(states[:, slices["x"]] - recon, axis=1)


def verify_superposition(cs: ClusteredSystem, hd: HierarchicalDecomposition,
                         horizon: float = 10.0, step: float = 1e-3, trials: int = 20,
                         seed: int = 0, hold: float = 0.5, initial=None,
                         include_error: bool = True, zero_inputs: bool = False) -> float:
    """Largest superposition defect over ``trials`` random input/initial-state draws.

    ``initial`` may fix ``(x0, xi0_list, xi00[, e0])``; it must satisfy the
    superposition identity at time zero. For a robust decomposition with
    ``include_error=False`` the defect ignores ``e``.
    """
    Aa, Ba, sl = augmented_system(cs, hd)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        z0 = np.zeros(Aa.shape[0])
        if initial is not None:
            x0, xis, xi00 = initial[:3]
            e0 = initial[3] if len(initial) > 3 else np.zeros(cs.n)
            z0[sl["x"]] = x0
            for s, v in zip(sl["xi"], xis):
                z0[s] = v
            z0[sl["xi0"]] = xi00
            if hd.robust:
                z0[sl["e"]] = e0
            if not hd.robust and np.any(e0):
                raise InvalidParameterError("an exact decomposition has no error state")
            defect = superposition_error(cs, hd, z0[None, :], sl)[0]
            if defect > 1e-12 * max(1.0, np.linalg.norm(x0)):
                raise InvalidParameterError(
                    f"initial states violate the superposition identity (defect {defect:.3e})"
                )
        else:
            for s in sl["xi"]:
                z0[s] = rng.standard_normal(s.stop - s.start)
            z0[sl["xi0"]] = rng.standard_normal(cs.n_global)
            recon = cs.P0 @ z0[sl["xi0"]] + sum(P @ z0[s] for P, s in zip(cs.Ps, sl["xi"]))
            z0[sl["x"]] = recon
        if zero_inputs:
            u = None
        else:
            u = piecewise_constant_input(rng, Ba.shape[1], horizon, step, hold)
        traj = simulate(Aa, Ba, u, z0, horizon, step)
        err = superposition_error(cs, hd, traj.states, sl, include_error)
        worst = max(worst, float(np.max(err)))
    return worst


def error_gain_profile(cs: ClusteredSystem, rhd: RobustDecomposition,
                       omegas: np.ndarray | None = None) -> tuple:
    """Largest singular value over frequency of the map from ``xi_0`` to the error feedback.

    The map is ``E0_hat (jwI - Ae_hat)^-1 F0_hat``; with the error injection
    fixed to zero the diagnostic instead reports ``C_0 P_0^T (jwI - Ae_hat)^-1
    F0_hat``, the leakage seen by the global measurement. Returns
    ``(omegas, gains)``; frequencies where ``jw`` hits the spectrum of
    ``Ae_hat`` give ``inf``.
    """
    if omegas is None:
        omegas = np.logspace(-2, 2, 200)
    n = rhd.Ae_hat.shape[0]
    if np.any(rhd.E0_hat):
        left = rhd.E0_hat
    else:
        left = cs.C0 @ cs.P0.T
    gains = np.empty(len(omegas))
    for k, w in enumerate(omegas):
        try:
            G = left @ np.linalg.solve(1j * w * np.eye(n) - rhd.Ae_hat, rhd.F0_hat)
            gains[k] = np.linalg.norm(G, 2)
        except np.linalg.LinAlgError:
            gains[k] = np.inf
    return omegas, gains


def save_decomposition(path, hd: HierarchicalDecomposition, cs: ClusteredSystem | None = None) -> None:
    data = hd.to_dict()
    data["robust"] = hd.robust
    if cs is not None:
        data["clusters"] = cs.clusters.to_list()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(data, indent=1))


def load_decomposition(path) -> HierarchicalDecomposition:
    data = json.loads(Path(path).read_text())
    arr = np.asarray
    base = dict(
        A0_hat=arr(data["A0_hat"], dtype=float),
        Ai_hat=tuple(arr(a, dtype=float) for a in data["Ai_hat"]),
        Ri_hat=tuple(arr(r, dtype=float) for r in data["Ri_hat"]),
        residuals=data["residuals"],
    )
    if not data.get("robust"):
        return HierarchicalDecomposition(**base)
    return RobustDecomposition(
        **base,
        Ae_hat=arr(data["Ae_hat"], dtype=float),
        E0_hat=arr(data["E0_hat"], dtype=float),
        Ei_hat=tuple(arr(e, dtype=float) for e in data["Ei_hat"]),
        F0_hat=arr(data["F0_hat"], dtype=float),
        Fi_hat=tuple(arr(f, dtype=float) for f in data["Fi_hat"]),
        leakage_norms=data["leakage_norms"],
    )
