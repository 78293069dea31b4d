"""Component models, interconnections, cluster partitions and the clustered system.

Component and cluster labels are 1-based throughout the public API, so that a
cluster set reads ``[[1, 2, 3], [4, 5], [6, 7, 8, 9]]`` exactly as it would be
written by hand. Internally everything is 0-based.

State ordering of a clustered system: components grouped by cluster (in cluster
order), and by ascending label inside each cluster; each component contributes
its own state vector (``[theta, omega]`` for second-order components).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import (
    AssumptionViolation,
    InvalidParameterError,
    InvalidPartitionError,
    InvalidTopologyError,
)

#: Nominal (inertia, damping) of the three homogeneous groups in the benchmark.
BENCHMARK_PARAMETERS = ((3.0, 0.4), (2.0, 0.3), (1.0, 0.2))
#: Group sizes of the benchmark per unit of the replication factor.
BENCHMARK_GROUP_SIZES = (3, 2, 4)

_IO_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ComponentModel:
    """Linear component ``x' = A x + L v + B u``, ``y = C x`` with scalar ``u`` and ``y``."""

    A: np.ndarray
    L: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = _frozen(self.A)
        L = _frozen(self.L)
        B = _frozen(self.B)
        C = _frozen(self.C)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InvalidParameterError(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        if L.ndim == 1:
            L = _frozen(L.reshape(n, -1))
        if B.ndim == 1:
            B = _frozen(B.reshape(n, 1))
        if C.ndim == 1:
            C = _frozen(C.reshape(1, n))
        if L.shape[0] != n:
            raise InvalidParameterError(f"L must have {n} rows, got {L.shape}")
        if B.shape != (n, 1):
            raise InvalidParameterError(f"B must be {n}x1, got {B.shape}")
        if C.shape != (1, n):
            raise InvalidParameterError(f"C must be 1x{n}, got {C.shape}")
        for name, val in (("A", A), ("L", L), ("B", B), ("C", C)):
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def q(self) -> int:
        return self.L.shape[1]


def second_order_component(m: float, d: float) -> ComponentModel:
    """Swing-type component ``m theta'' + d theta' + v + u = 0`` measuring ``omega``."""
    if not m > 0:
        raise InvalidParameterError(f"inertia must be positive, got {m}")
    if d < 0:
        raise InvalidParameterError(f"damping must be nonnegative, got {d}")
    return ComponentModel(
        A=[[0.0, 1.0], [0.0, -d / m]],
        L=[[0.0], [-1.0 / m]],
        B=[[0.0], [-1.0 / m]],
        C=[[0.0, 1.0]],
    )


@dataclass(frozen=True)
class Interconnection:
    """Interaction map ``v = M x`` with block sparsity given by the neighborhoods.

    ``M`` has shape ``(N0*q, N0*n)``; ``neighborhoods[k]`` holds the 0-based
    indices of the neighbours of component ``k``.
    """

    M: np.ndarray
    neighborhoods: tuple
    state_dim: int
    q: int = 1

    def __post_init__(self):
        M = _frozen(self.M)
        N0 = len(self.neighborhoods)
        n, q = self.state_dim, self.q
        if M.shape != (N0 * q, N0 * n):
            raise InvalidTopologyError(
                f"M must be {N0 * q}x{N0 * n} for {N0} components, got {M.shape}"
            )
        nbrs = tuple(frozenset(int(l) for l in s) for s in self.neighborhoods)
        for k in range(N0):
            for l in range(N0):
                if l == k or l in nbrs[k]:
                    continue
                if np.any(M[k * q:(k + 1) * q, l * n:(l + 1) * n] != 0):
                    raise InvalidTopologyError(
                        f"M block ({k + 1},{l + 1}) is nonzero but {l + 1} is not a "
                        f"neighbour of {k + 1}"
                    )
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "neighborhoods", nbrs)

    @property
    def N0(self) -> int:
        return len(self.neighborhoods)

    def block(self, k: int, l: int) -> np.ndarray:
        """Block ``M_[k,l]`` (0-based indices)."""
        n, q = self.state_dim, self.q
        return self.M[k * q:(k + 1) * q, l * n:(l + 1) * n]

    @classmethod
    def from_matrix(cls, M, state_dim: int, q: int = 1) -> "Interconnection":
        M = np.asarray(M, dtype=float)
        N0 = M.shape[1] // state_dim
        nbrs = []
        for k in range(N0):
            row = M[k * q:(k + 1) * q]
            nbrs.append(
                {l for l in range(N0)
                 if l != k and np.any(row[:, l * state_dim:(l + 1) * state_dim] != 0)}
            )
        return cls(M, tuple(nbrs), state_dim, q)


def diffusive_coupling(edges: Iterable[Sequence], n_components: int,
                       state_dim: int = 2, angle_index: int = 0) -> Interconnection:
    """Diffusive interaction ``v_k = sum_l alpha_kl (theta_k - theta_l)``.

    ``edges`` holds ``(k, l, alpha)`` triples with 1-based labels; an edge may be
    listed once or in both directions, but repeated weights must agree.
    """
    weights: dict[tuple[int, int], float] = {}
    for edge in edges:
        k, l, alpha = int(edge[0]), int(edge[1]), float(edge[2])
        if k == l:
            raise InvalidTopologyError(f"self-loop at component {k}")
        if not (1 <= k <= n_components and 1 <= l <= n_components):
            raise InvalidTopologyError(f"edge ({k},{l}) outside 1..{n_components}")
        if not alpha > 0:
            raise InvalidTopologyError(f"edge ({k},{l}) has nonpositive weight {alpha}")
        key = (min(k, l), max(k, l))
        if key in weights and weights[key] != alpha:
            raise InvalidTopologyError(
                f"asymmetric weight on edge {key}: {weights[key]} vs {alpha}"
            )
        weights[key] = alpha

    n = state_dim
    M = np.zeros((n_components, n_components * n))
    nbrs: list[set] = [set() for _ in range(n_components)]
    for (k, l), alpha in weights.items():
        k0, l0 = k - 1, l - 1
        M[k0, k0 * n + angle_index] += alpha
        M[l0, l0 * n + angle_index] += alpha
        M[k0, l0 * n + angle_index] -= alpha
        M[l0, k0 * n + angle_index] -= alpha
        nbrs[k0].add(l0)
        nbrs[l0].add(k0)
    return Interconnection(M, tuple(nbrs), state_dim, 1)


@dataclass(frozen=True)
class NetworkSystem:
    components: tuple
    interconnection: Interconnection

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise InvalidParameterError("network needs at least one component")
        n, q = comps[0].n, comps[0].q
        for k, c in enumerate(comps):
            if c.n != n or c.q != q:
                raise InvalidParameterError(
                    f"component {k + 1} has dimensions (n={c.n}, q={c.q}); "
                    f"expected (n={n}, q={q})"
                )
        ic = self.interconnection
        if ic.N0 != len(comps) or ic.state_dim != n or ic.q != q:
            raise InvalidTopologyError("interconnection does not match the components")
        object.__setattr__(self, "components", comps)

    @property
    def N0(self) -> int:
        return len(self.components)

    @property
    def state_dim(self) -> int:
        return self.components[0].n

    @property
    def A_blocks(self) -> np.ndarray:
        return sla.block_diag(*(c.A for c in self.components))

    @property
    def L_blocks(self) -> np.ndarray:
        return sla.block_diag(*(c.L for c in self.components))

    @property
    def B_blocks(self) -> np.ndarray:
        return sla.block_diag(*(c.B for c in self.components))

    @property
    def C_blocks(self) -> np.ndarray:
        return sla.block_diag(*(c.C for c in self.components))

    @property
    def A(self) -> np.ndarray:
        """Global state matrix ``diag(A_k) + diag(L_k) M`` in label order."""
        return self.A_blocks + self.L_blocks @ self.interconnection.M


@dataclass(frozen=True)
class ClusterSet:
    """Partition of the component labels ``1..N0`` into nonempty disjoint clusters."""

    clusters: tuple

    def __post_init__(self):
        cl = tuple(tuple(sorted(int(k) for k in c)) for c in self.clusters)
        if not cl:
            raise InvalidPartitionError("cluster set is empty")
        seen: set[int] = set()
        for i, c in enumerate(cl):
            if not c:
                raise InvalidPartitionError(f"cluster {i + 1} is empty")
            dup = seen.intersection(c)
            if dup or len(set(c)) != len(c):
                raise InvalidPartitionError(f"component(s) {sorted(dup) or c} appear twice")
            seen.update(c)
        if seen != set(range(1, len(seen) + 1)):
            raise InvalidPartitionError(
                f"clusters must cover 1..{len(seen)} exactly, got {sorted(seen)}"
            )
        object.__setattr__(self, "clusters", cl)

    @classmethod
    def singletons(cls, N0: int) -> "ClusterSet":
        return cls(tuple((k,) for k in range(1, N0 + 1)))

    @property
    def N(self) -> int:
        return len(self.clusters)

    @property
    def N0(self) -> int:
        return sum(len(c) for c in self.clusters)

    @property
    def sizes(self) -> tuple:
        return tuple(len(c) for c in self.clusters)

    def __len__(self):
        return len(self.clusters)

    def __iter__(self):
        return iter(self.clusters)

    def __getitem__(self, i):
        return self.clusters[i]

    def canonical(self) -> "ClusterSet":
        """Same partition with clusters ordered by their smallest label."""
        return ClusterSet(tuple(sorted(self.clusters, key=lambda c: c[0])))

    def index_of(self, label: int) -> int:
        """1-based index of the cluster containing ``label``."""
        for i, c in enumerate(self.clusters):
            if label in c:
                return i + 1
        raise KeyError(label)

    def to_list(self) -> list:
        return [list(c) for c in self.clusters]

    def same_partition(self, other: "ClusterSet") -> bool:
        return set(map(frozenset, self.clusters)) == set(map(frozenset, other.clusters))


def lifting_matrices(cs: ClusterSet, state_dim: int):
    """Broadcast matrix ``P_0`` and embeddings ``P_i`` in label order.

    Column ``i*state_dim + j`` of ``P_0`` places state ``j`` on every component of
    cluster ``i``; ``P_i`` selects the components of cluster ``i``.
    """
    n = state_dim
    N0 = cs.N0
    I = np.eye(n)
    P0 = np.zeros((N0 * n, cs.N * n))
    Ps = []
    for i, c in enumerate(cs.clusters):
        Pi = np.zeros((N0 * n, len(c) * n))
        for j, k in enumerate(c):
            rows = slice((k - 1) * n, k * n)
            Pi[rows, j * n:(j + 1) * n] = I
            P0[rows, i * n:(i + 1) * n] = I
        Ps.append(Pi)
    return P0, Ps


@dataclass(frozen=True)
class ClusteredSystem:
    """Network rewritten cluster by cluster, with broadcast/embedding matrices.

    ``global_input`` is ``diag(B_i) E_0``, the true map from the global input into
    the states; ``P0 @ B0`` reproduces it exactly when the cluster input matrices
    agree, otherwise ``input_leakage`` holds the remainder (``B0`` is then the
    least-squares fit). ``output_leakage`` is the analogue for ``C0``.
    """

    clusters: ClusterSet
    order: tuple
    state_dim: int
    A: np.ndarray
    P0: np.ndarray
    Ps: tuple
    A_blocks: tuple
    L_blocks: tuple
    B_blocks: tuple
    C_blocks: tuple
    M: np.ndarray
    E0: np.ndarray
    B0: np.ndarray
    C0: np.ndarray
    input_leakage: np.ndarray
    output_leakage: np.ndarray
    io_violation: str | None = None

    @property
    def N(self) -> int:
        return self.clusters.N

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def r(self) -> tuple:
        return self.clusters.sizes

    @property
    def n_i(self) -> tuple:
        return tuple(r * self.state_dim for r in self.r)

    @property
    def n0_i(self) -> tuple:
        return tuple(self.state_dim for _ in self.r)

    @property
    def n_global(self) -> int:
        return self.P0.shape[1]

    @property
    def Adiag(self) -> np.ndarray:
        return sla.block_diag(*self.A_blocks)

    @property
    def Ldiag(self) -> np.ndarray:
        return sla.block_diag(*self.L_blocks)

    @property
    def Bdiag(self) -> np.ndarray:
        return sla.block_diag(*self.B_blocks)

    @property
    def Cdiag(self) -> np.ndarray:
        return sla.block_diag(*self.C_blocks)

    @property
    def global_input(self) -> np.ndarray:
        return self.Bdiag @ self.E0

    @property
    def global_output(self) -> np.ndarray:
        """``E_0^T diag(C_i)``: the map from ``x`` to the global measurement ``y_0``."""
        return self.E0.T @ self.Cdiag

    @property
    def C0_seen(self) -> np.ndarray:
        """Map from ``xi_0`` to ``y_0`` when ``x = P_0 xi_0``."""
        return self.global_output @ self.P0

    def interaction_rows(self, i: int) -> np.ndarray:
        """Rows of ``M`` producing ``v_i`` (0-based cluster index)."""
        q = self.L_blocks[0].shape[1] // self.r[0]
        start = sum(self.r[:i]) * q
        return self.M[start:start + self.r[i] * q]

    def to_label_order(self, x: np.ndarray) -> np.ndarray:
        """Permute cluster-ordered state rows (last axis) back to label order."""
        n = self.state_dim
        idx = np.concatenate([np.arange(k * n, (k + 1) * n) for k in self.order])
        out = np.empty_like(x)
        out[..., idx] = x
        return out


def clustered_system(net: NetworkSystem, cs: ClusterSet, strict: bool = True) -> ClusteredSystem:
    """Assemble the clustered interconnected system for ``net`` under ``cs``.

    With ``strict`` an :class:`AssumptionViolation` is raised when the input or
    output matrices differ inside a cluster; otherwise the violation is recorded
    and ``B0``/``C0`` become least-squares fits.
    """
    if cs.N0 != net.N0:
        raise InvalidPartitionError(
            f"cluster set covers {cs.N0} components, network has {net.N0}"
        )
    violation = None
    for i, c in enumerate(cs.clusters):
        ref = net.components[c[0] - 1]
        for k in c[1:]:
            comp = net.components[k - 1]
            for which in ("B", "C"):
                if np.max(np.abs(getattr(comp, which) - getattr(ref, which))) > _IO_TOL:
                    if strict:
                        raise AssumptionViolation(i + 1, (c[0], k), which)
                    if violation is None:
                        violation = str(AssumptionViolation(i + 1, (c[0], k), which))

    n = net.state_dim
    q = net.components[0].q
    order = tuple(k - 1 for c in cs.clusters for k in c)
    perm = np.concatenate([np.arange(k * n, (k + 1) * n) for k in order])
    vperm = np.concatenate([np.arange(k * q, (k + 1) * q) for k in order])
    A = net.A[np.ix_(perm, perm)]
    M = net.interconnection.M[np.ix_(vperm, perm)]

    comps = [net.components[k] for k in order]
    A_blocks, L_blocks, B_blocks, C_blocks = [], [], [], []
    start = 0
    for c in cs.clusters:
        sub = comps[start:start + len(c)]
        start += len(c)
        A_blocks.append(_frozen(sla.block_diag(*(s.A for s in sub))))
        L_blocks.append(_frozen(sla.block_diag(*(s.L for s in sub))))
        B_blocks.append(_frozen(sla.block_diag(*(s.B for s in sub))))
        C_blocks.append(_frozen(sla.block_diag(*(s.C for s in sub))))

    # P_0 and P_i in cluster order: block structure 1_{r_i} (x) I_n.
    N = cs.N
    P0 = sla.block_diag(*(np.kron(np.ones((r, 1)), np.eye(n)) for r in cs.sizes))
    Ps = []
    offset = 0
    for r in cs.sizes:
        Pi = np.zeros((A.shape[0], r * n))
        Pi[offset:offset + r * n] = np.eye(r * n)
        offset += r * n
        Ps.append(_frozen(Pi))
    E0 = sla.block_diag(*(np.ones((r, 1)) for r in cs.sizes))

    Bdiag = sla.block_diag(*B_blocks)
    Cdiag = sla.block_diag(*C_blocks)
    P0_pinv = np.linalg.pinv(P0)
    B0 = P0_pinv @ Bdiag @ E0
    target_out = E0.T @ Cdiag
    C0 = target_out @ P0_pinv.T
    return ClusteredSystem(
        clusters=cs,
        order=order,
        state_dim=n,
        A=_frozen(A),
        P0=_frozen(P0),
        Ps=tuple(Ps),
        A_blocks=tuple(A_blocks),
        L_blocks=tuple(L_blocks),
        B_blocks=tuple(B_blocks),
        C_blocks=tuple(C_blocks),
        M=_frozen(M),
        E0=_frozen(E0),
        B0=_frozen(B0),
        C0=_frozen(C0),
        input_leakage=_frozen(Bdiag @ E0 - P0 @ B0),
        output_leakage=_frozen(target_out - C0 @ P0.T),
        io_violation=violation,
    )


def grouped_network(group_sizes: Sequence[int], group_params: Sequence[tuple],
                    pairs: Iterable[tuple] | None = None, weight: float = 1.0,
                    component_params: Sequence[tuple] | None = None) -> NetworkSystem:
    """Second-order network of homogeneous groups with the canonical symmetric wiring.

    Every group is a complete graph and every listed pair of groups (0-based group
    indices; all pairs by default) is joined by a complete bipartite graph.
    ``component_params`` overrides the per-component ``(m, d)``.
    """
    labels = []
    for g, size in enumerate(group_sizes):
        labels.extend([g] * size)
    N0 = len(labels)
    G = len(group_sizes)
    if pairs is None:
        pairs = {(a, b) for a in range(G) for b in range(a + 1, G)}
    pairs = {(min(a, b), max(a, b)) for a, b in pairs}
    edges = []
    for k in range(N0):
        for l in range(k + 1, N0):
            gk, gl = labels[k], labels[l]
            if gk == gl or (min(gk, gl), max(gk, gl)) in pairs:
                edges.append((k + 1, l + 1, weight))
    if component_params is None:
        component_params = [group_params[g] for g in labels]
    comps = [second_order_component(m, d) for m, d in component_params]
    return NetworkSystem(tuple(comps), diffusive_coupling(edges, N0))


def benchmark_clusters(n0: int) -> ClusterSet:
    s = [size * n0 for size in BENCHMARK_GROUP_SIZES]
    bounds = np.cumsum([0] + s)
    return ClusterSet(tuple(tuple(range(bounds[g] + 1, bounds[g + 1] + 1)) for g in range(3)))


def benchmark_network(n0: int = 1, perturb: float | None = None, seed: int | None = 0):
    """Nine-per-unit second-order benchmark and its expected cluster set.

    ``perturb`` scales every inertia and damping by ``1 + delta`` with ``delta``
    drawn independently from ``U[-perturb, perturb]``.
    """
    if int(n0) != n0 or n0 < 1:
        raise InvalidParameterError(f"replication factor must be a positive integer, got {n0}")
    n0 = int(n0)
    sizes = [s * n0 for s in BENCHMARK_GROUP_SIZES]
    params = [BENCHMARK_PARAMETERS[g] for g, s in enumerate(sizes) for _ in range(s)]
    if perturb:
        if perturb < 0 or perturb >= 1:
            raise InvalidParameterError(f"perturbation magnitude must lie in [0, 1), got {perturb}")
        rng = np.random.default_rng(seed)
        delta = rng.uniform(-perturb, perturb, size=(len(params), 2))
        params = [(m * (1 + dm), d * (1 + dd)) for (m, d), (dm, dd) in zip(params, delta)]
    net = grouped_network(sizes, BENCHMARK_PARAMETERS, component_params=params)
    return net, benchmark_clusters(n0)


def initial_bipartition(N0: int) -> ClusterSet:
    """Two-cluster split ``{1..ceil(N0/2)}``, ``{rest}`` used as a default clustering seed."""
    h = (N0 + 1) // 2
    if N0 < 2:
        return ClusterSet(((1,),))
    return ClusterSet((tuple(range(1, h + 1)), tuple(range(h + 1, N0 + 1))))


# -- network description files ------------------------------------------------

def network_from_dict(data: dict):
    """Build ``(NetworkSystem, ClusterSet | None)`` from a parsed description."""
    comps = []
    for k, spec in enumerate(data["components"]):
        if "m" in spec:
            comps.append(second_order_component(float(spec["m"]), float(spec.get("d", 0.0))))
        else:
            try:
                comps.append(ComponentModel(spec["A"], spec["L"], spec["B"], spec["C"]))
            except KeyError as exc:
                raise InvalidParameterError(
                    f"component {k + 1} needs either m/d or A/L/B/C (missing {exc})"
                ) from None
    n = comps[0].n
    if "M" in data:
        ic = Interconnection.from_matrix(data["M"], n, comps[0].q)
    else:
        ic = diffusive_coupling(data.get("edges", []), len(comps), state_dim=n,
                                angle_index=int(data.get("angle_index", 0)))
    net = NetworkSystem(tuple(comps), ic)
    cs = ClusterSet(tuple(tuple(c) for c in data["clusters"])) if data.get("clusters") else None
    return net, cs


def load_network(path) -> tuple:
    with open(path) as fh:
        return network_from_dict(json.load(fh))


def network_to_dict(net: NetworkSystem, cs: ClusterSet | None = None) -> dict:
    out = {
        "components": [
            {"A": c.A.tolist(), "L": c.L.tolist(), "B": c.B.tolist(), "C": c.C.tolist()}
            for c in net.components
        ],
        "M": net.interconnection.M.tolist(),
    }
    if cs is not None:
        out["clusters"] = cs.to_list()
    return out


def save_network(path, net: NetworkSystem, cs: ClusterSet | None = None) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net, cs), indent=1))


def replicated_network(n0: int, spread: float = 0.05) -> tuple:
    """Benchmark variant whose every nine-component block has its own parameters.

    Block ``b`` scales inertia and damping by ``1 + spread*b``, so the network
    has ``3*n0`` homogeneous groups; all components are coupled with unit weight.
    Returns the network and its group partition.
    """
    if int(n0) != n0 or n0 < 1:
        raise InvalidParameterError(f"replication factor must be a positive integer, got {n0}")
    sizes, params = [], []
    for b in range(int(n0)):
        for s, (m, d) in zip(BENCHMARK_GROUP_SIZES, BENCHMARK_PARAMETERS):
            sizes.append(s)
            params.append((m * (1 + spread * b), d * (1 + spread * b)))
    net = grouped_network(sizes, params)
    bounds = np.cumsum([0] + sizes)
    cs = ClusterSet(tuple(tuple(range(bounds[g] + 1, bounds[g + 1] + 1)) for g in range(len(sizes))))
    return net, cs
