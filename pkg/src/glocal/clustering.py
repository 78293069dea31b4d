"""Cluster refinement and the basic/extended clustering algorithms.

All routines take the global state matrix in component-label order together
with a :class:`ClusterSet`; cluster indices reported to callers are 1-based.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidPartitionError, NoRefinementNeeded
from .network import ClusterSet, lifting_matrices
from .subspace import INCLUSION_TOL, RANK_TOL, _orth, controllable_subspace, orthonormal_basis


@dataclass(frozen=True)
class PartitionTrace:
    """Cluster sets visited by a clustering run.

    ``events[k]`` explains how ``steps[k+1]`` was obtained from ``steps[k]``:
    ``("refine", i)`` for a refinement around cluster ``i`` or ``("split", (i, ...))``
    when clusters violating the reachability condition were broken into singletons.
    """

    steps: tuple
    events: tuple
    reason: str

    @property
    def refinements(self) -> int:
        return sum(1 for kind, _ in self.events if kind == "refine")

    @property
    def offending(self) -> tuple:
        return tuple(arg for _, arg in self.events)

    @property
    def final(self) -> ClusterSet:
        return self.steps[-1]

    def to_dict(self) -> dict:
        return {
            "steps": [s.to_list() for s in self.steps],
            "events": [[kind, list(arg) if isinstance(arg, tuple) else arg]
                       for kind, arg in self.events],
            "reason": self.reason,
        }


def _state_dim(A: np.ndarray, cs: ClusterSet) -> int:
    n, r = divmod(A.shape[0], cs.N0)
    if r:
        raise InvalidPartitionError(
            f"state dimension {A.shape[0]} is not a multiple of {cs.N0} components"
        )
    return n


def local_defect(A, cs: ClusterSet, i: int, rank_tol: float = RANK_TOL) -> float:
    """Defect of the local condition for cluster ``i`` (0-based) in label order."""
    P0, Ps = lifting_matrices(cs, _state_dim(A, cs))
    R = controllable_subspace(A, Ps[i], rank_tol)
    return orthonormal_basis(np.hstack([Ps[i], P0]), rank_tol).defect(R.Q)


def reachability_defect(A, cs: ClusterSet, i: int, rank_tol: float = RANK_TOL) -> float:
    if cs.N < 2:
        return np.inf
    P0, Ps = lifting_matrices(cs, _state_dim(A, cs))
    target = _orth(Ps[i] @ (Ps[i].T @ P0), rank_tol)
    others = np.hstack([Ps[j] for j in range(cs.N) if j != i])
    return controllable_subspace(A, others, rank_tol).defect(target)


def global_defect(A, cs: ClusterSet, rank_tol: float = RANK_TOL) -> float:
    P0, _ = lifting_matrices(cs, _state_dim(A, cs))
    R = controllable_subspace(A, P0, rank_tol)
    return orthonormal_basis(P0, rank_tol).defect(R.Q)


def refine(A, cs: ClusterSet, i: int, tol: float = INCLUSION_TOL,
           rank_tol: float = RANK_TOL) -> ClusterSet:
    """Split every cluster other than ``i`` (1-based) into the coarsest admissible pieces.

    Components outside cluster ``i`` are grouped when their row blocks of the
    controllable subspace of cluster ``i``, projected off ``im P_i``, coincide.
    The result refines ``cs``, keeps cluster ``i`` intact and is ordered by the
    smallest label of each cluster.
    """
    A = np.asarray(A, dtype=float)
    idx = i - 1
    if not 0 <= idx < cs.N:
        raise IndexError(f"cluster index {i} outside 1..{cs.N}")
    n = _state_dim(A, cs)
    P0, Ps = lifting_matrices(cs, n)
    Q = controllable_subspace(A, Ps[idx], rank_tol).Q
    if orthonormal_basis(np.hstack([Ps[idx], P0]), rank_tol).defect(Q) <= tol:
        raise NoRefinementNeeded(f"cluster {i} already satisfies the local condition")

    Z = Q - Ps[idx] @ (Ps[idx].T @ Q)
    rows = {k: Z[(k - 1) * n:k * n] for k in range(1, cs.N0 + 1)}
    scale = max(1.0, max(np.linalg.norm(r) for r in rows.values()))

    out = [cs.clusters[idx]]
    for j, cluster in enumerate(cs.clusters):
        if j == idx:
            continue
        groups: list[list[int]] = []
        for k in cluster:
            for g in groups:
                if np.linalg.norm(rows[k] - rows[g[0]]) <= tol * scale:
                    g.append(k)
                    break
            else:
                groups.append([k])
        out.extend(tuple(g) for g in groups)
    return ClusterSet(tuple(sorted(out, key=lambda c: min(c))))


def _first_offending(A, cs: ClusterSet, tol: float, rank_tol: float):
    for i in range(cs.N):
        if local_defect(A, cs, i, rank_tol) > tol:
            return i + 1
    return None


def algorithm1(A, initial: ClusterSet, tol: float = INCLUSION_TOL,
               rank_tol: float = RANK_TOL, max_iter: int | None = None):
    """Refine ``initial`` until every cluster satisfies the local condition.

    Returns ``(clusters, trace)``. A single initial cluster makes the routine
    return immediately with a warning.
    """
    A = np.asarray(A, dtype=float)
    if initial.N < 2:
        warnings.warn("initial cluster set has a single cluster; returning it unchanged",
                      stacklevel=2)
        return initial, PartitionTrace((initial,), (), "single-cluster")
    steps = [initial]
    events = []
    cur = initial
    limit = max_iter if max_iter is not None else initial.N0
    for _ in range(limit + 1):
        i = _first_offending(A, cur, tol, rank_tol)
        if i is None:
            return cur, PartitionTrace(tuple(steps), tuple(events), "admissible")
        nxt = refine(A, cur, i, tol, rank_tol)
        if nxt.N <= cur.N:
            return cur, PartitionTrace(tuple(steps), tuple(events), "stalled")
        steps.append(nxt)
        events.append(("refine", i))
        cur = nxt
    return cur, PartitionTrace(tuple(steps), tuple(events), "iteration-limit")


def algorithm2(A, initial: ClusterSet, tol: float = INCLUSION_TOL,
               rank_tol: float = RANK_TOL):
    """Extended clustering: also enforce reachability of every cluster from the others.

    Clusters violating reachability are split into singletons and the basic
    algorithm is rerun. If only singletons remain in violation, the result is
    certified directly with the global invariance condition and, failing that,
    every cluster is split. The output always admits an exact decomposition.
    """
    A = np.asarray(A, dtype=float)
    cur, tr = algorithm1(A, initial, tol, rank_tol)
    steps = list(tr.steps)
    events = list(tr.events)
    reason = tr.reason
    while True:
        if reason == "single-cluster":
            break
        failing = [i for i in range(cur.N) if reachability_defect(A, cur, i, rank_tol) > tol]
        splittable = [i for i in failing if len(cur.clusters[i]) > 1]
        if not failing:
            reason = "admissible"
            break
        if not splittable:
            reason = "singletons-unreachable"
            break
        pieces = [c for j, c in enumerate(cur.clusters) if j not in splittable]
        for j in splittable:
            pieces.extend((k,) for k in cur.clusters[j])
        cur = ClusterSet(tuple(sorted(pieces, key=lambda c: min(c))))
        steps.append(cur)
        events.append(("split", tuple(j + 1 for j in splittable)))
        cur, tr = algorithm1(A, cur, tol, rank_tol)
        steps.extend(tr.steps[1:])
        events.extend(tr.events)
        reason = tr.reason

    if global_defect(A, cur, rank_tol) > tol or _first_offending(A, cur, tol, rank_tol):
        multi = [j for j, c in enumerate(cur.clusters) if len(c) > 1]
        if multi:
            cur = ClusterSet.singletons(cur.N0)
            steps.append(cur)
            events.append(("split", tuple(j + 1 for j in multi)))
            reason = "fallback-singletons"
    return cur, PartitionTrace(tuple(steps), tuple(events), reason)


def is_partition_of(fine: ClusterSet, coarse: ClusterSet) -> bool:
    """Every cluster of ``fine`` lies inside a cluster of ``coarse``."""
    if set().union(*map(set, fine)) != set().union(*map(set, coarse)):
        raise InvalidPartitionError("cluster sets cover different components")
    owner = {k: j for j, c in enumerate(coarse) for k in c}
    return all(len({owner[k] for k in c}) == 1 for c in fine)


def admissible(A, cs: ClusterSet, tol: float = INCLUSION_TOL, rank_tol: float = RANK_TOL) -> bool:
    """All clusters satisfy the local condition."""
    return _first_offending(np.asarray(A, dtype=float), cs, tol, rank_tol) is None
