"""Controllable subspaces and the geometric existence checks for hierarchical decompositions."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .network import ClusteredSystem

RANK_TOL = 1e-9
INCLUSION_TOL = 1e-8


@dataclass(frozen=True)
class OrthonormalBasis:
    Q: np.ndarray
    tol: float = RANK_TOL

    @property
    def dim(self) -> int:
        return self.Q.shape[1]

    @property
    def ambient(self) -> int:
        return self.Q.shape[0]

    def projector(self) -> np.ndarray:
        return self.Q @ self.Q.T

    def defect(self, X: np.ndarray) -> float:
        """Largest column norm of ``X`` orthogonal to the span (0 for an empty ``X``)."""
        X = np.atleast_2d(X)
        if X.size == 0:
            return 0.0
        R = X - self.Q @ (self.Q.T @ X)
        return float(np.max(np.linalg.norm(R, axis=0)))


def _orth(X: np.ndarray, tol: float, scale: float | None = None) -> np.ndarray:
    """Orthonormal basis of ``range(X)`` truncating singular values below ``tol*scale``."""
    if X.size == 0:
        return np.zeros((X.shape[0], 0))
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    ref = s[0] if scale is None else scale
    if ref == 0:
        return np.zeros((X.shape[0], 0))
    return U[:, s > tol * ref]


def orthonormal_basis(X: np.ndarray, tol: float = RANK_TOL) -> OrthonormalBasis:
    return OrthonormalBasis(_orth(np.asarray(X, dtype=float), tol), tol)


def controllable_subspace(A, B, tol: float = RANK_TOL) -> OrthonormalBasis:
    """Orthonormal basis of ``span[B, AB, ..., A^(n-1) B]`` by block Krylov iteration.

    Each new block is orthogonalized twice against the current basis; the
    directions that survive are truncated relative to the size of the
    unprojected block, so numerical noise never enters as a new direction.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    n = A.shape[0]
    if A.shape != (n, n) or B.shape[0] != n:
        raise ValueError(f"incompatible shapes A{A.shape}, B{B.shape}")
    if not 0 < tol < 1:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")

    Q = _orth(B, tol)
    last = Q
    while Q.shape[1] < n and last.shape[1] > 0:
        W = A @ last
        wnorm = np.linalg.norm(W, 2) if W.size else 0.0
        if wnorm == 0:
            break
        for _ in range(2):
            W = W - Q @ (Q.T @ W)
        new = _orth(W, tol, scale=wnorm)
        if new.shape[1]:
            # one more pass keeps the new directions orthogonal to Q
            new = new - Q @ (Q.T @ new)
            new = _orth(new, tol)
        Q = np.hstack([Q, new])
        last = new
    return OrthonormalBasis(Q, tol)


def subspace_leq(U: OrthonormalBasis, V: OrthonormalBasis, tol: float = INCLUSION_TOL) -> bool:
    """``span U`` contained in ``span V`` up to the column-defect tolerance."""
    if U.ambient != V.ambient:
        raise ValueError(f"ambient dimensions differ: {U.ambient} vs {V.ambient}")
    return V.defect(U.Q) <= tol


@dataclass(frozen=True)
class ExistenceReport:
    """Per-cluster verdicts of the local and global invariance conditions.

    ``local_ok[i]`` / ``local_defect[i]``: controllable subspace of cluster ``i``
    lies in ``im P_i + im P_0``. ``global_ok`` / ``global_defect``: controllable
    subspace of ``P_0`` is ``A``-invariant inside ``im P_0``. ``reachable[i]``:
    the broadcast directions of cluster ``i`` are reachable from the other
    clusters (``None`` when there is only one cluster). Defects are sines of
    the worst principal angle. Indices in ``offending`` are 1-based.
    """

    local_ok: tuple
    local_defect: tuple
    global_ok: bool
    global_defect: float
    reachable: tuple
    notes: tuple = field(default=())

    @property
    def verdict(self) -> bool:
        return all(self.local_ok) and self.global_ok

    @property
    def offending(self) -> tuple:
        return tuple(i + 1 for i, ok in enumerate(self.local_ok) if not ok)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "local": [
                {"cluster": i + 1, "ok": ok, "defect": d}
                for i, (ok, d) in enumerate(zip(self.local_ok, self.local_defect))
            ],
            "global": {"ok": self.global_ok, "defect": self.global_defect},
            "reachable": list(self.reachable),
            "offending": list(self.offending),
            "notes": list(self.notes),
        }

    def summary(self) -> str:
        lines = [f"existence: {'yes' if self.verdict else 'no'}"]
        for i, (ok, d) in enumerate(zip(self.local_ok, self.local_defect)):
            reach = self.reachable[i]
            rtxt = "n/a" if reach is None else ("yes" if reach else "no")
            lines.append(
                f"  cluster {i + 1}: local {'ok' if ok else 'FAIL'} (defect {d:.2e}), reachable {rtxt}"
            )
        lines.append(
            f"  global: {'ok' if self.global_ok else 'FAIL'} (defect {self.global_defect:.2e})"
        )
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines)


def local_condition(cs: ClusteredSystem, i: int, tol: float = INCLUSION_TOL,
                    rank_tol: float = RANK_TOL) -> tuple:
    """(ok, defect) for cluster ``i`` (0-based)."""
    R = controllable_subspace(cs.A, cs.Ps[i], rank_tol)
    V = orthonormal_basis(np.hstack([cs.Ps[i], cs.P0]), rank_tol)
    d = V.defect(R.Q)
    return d <= tol, d


def global_condition(cs: ClusteredSystem, tol: float = INCLUSION_TOL,
                     rank_tol: float = RANK_TOL) -> tuple:
    R = controllable_subspace(cs.A, cs.P0, rank_tol)
    V = orthonormal_basis(cs.P0, rank_tol)
    d = V.defect(R.Q)
    return d <= tol, d


def reachability_condition(cs: ClusteredSystem, i: int, tol: float = INCLUSION_TOL,
                           rank_tol: float = RANK_TOL) -> bool:
    """Broadcast directions of cluster ``i`` (0-based) reachable from all other clusters."""
    if cs.N < 2:
        warnings.warn("reachability needs at least two clusters; reporting False", stacklevel=2)
        return False
    Pi = cs.Ps[i]
    target = Pi @ (Pi.T @ cs.P0)
    others = np.hstack([cs.Ps[j] for j in range(cs.N) if j != i])
    R = controllable_subspace(cs.A, others, rank_tol)
    return R.defect(_orth(target, rank_tol)) <= tol


def existence_check(cs: ClusteredSystem, tol: float = INCLUSION_TOL,
                    rank_tol: float = RANK_TOL) -> ExistenceReport:
    local = [local_condition(cs, i, tol, rank_tol) for i in range(cs.N)]
    g_ok, g_def = global_condition(cs, tol, rank_tol)
    notes = []
    if cs.N >= 2:
        reach = tuple(reachability_condition(cs, i, tol, rank_tol) for i in range(cs.N))
    else:
        reach = (None,)
        notes.append("single cluster: reachability from other clusters is undefined")
    if cs.io_violation:
        notes.append(cs.io_violation)
    return ExistenceReport(
        local_ok=tuple(ok for ok, _ in local),
        local_defect=tuple(d for _, d in local),
        global_ok=g_ok,
        global_defect=g_def,
        reachable=reach,
        notes=tuple(notes),
    )
