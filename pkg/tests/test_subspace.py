import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glocal.network import (
    ClusterSet,
    NetworkSystem,
    clustered_system,
    diffusive_coupling,
    second_order_component,
)
from glocal.subspace import (
    OrthonormalBasis,
    controllable_subspace,
    existence_check,
    orthonormal_basis,
    reachability_condition,
    subspace_leq,
)

from _helpers import BIPARTITION, random_network


def _basis(*cols, n=3):
    return orthonormal_basis(np.array(cols, dtype=float).T.reshape(n, -1))


class TestControllableSubspace:
    def test_zero_dynamics(self):
        b = controllable_subspace(np.zeros((3, 3)), np.array([[1.0], [0], [0]]))
        assert b.dim == 1

    def test_chain_integrator(self):
        b = controllable_subspace(np.array([[0.0, 1], [0, 0]]), np.array([[0.0], [1]]))
        assert b.dim == 2

    def test_cluster_two_of_bipartition(self, bench1):
        net, _ = bench1
        c = clustered_system(net, BIPARTITION, strict=False)
        assert controllable_subspace(c.A, c.Ps[1]).dim == 12

    def test_orthonormal(self, csys1):
        Q = controllable_subspace(csys1.A, csys1.Ps[0]).Q
        assert np.linalg.norm(Q.T @ Q - np.eye(Q.shape[1])) <= 1e-8

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            controllable_subspace(np.eye(3), np.ones((2, 1)))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 8), st.integers(1, 3), st.integers(0, 2**31 - 1), st.integers(0, 4))
    def test_matches_krylov_rank(self, n, m, seed, zeros):
        rng = np.random.default_rng(seed)
        # integer-valued matrices with deliberate rank loss
        A = rng.integers(-2, 3, size=(n, n)).astype(float)
        B = rng.integers(-1, 2, size=(n, m)).astype(float)
        B[: min(zeros, n)] = 0
        K = np.hstack([np.linalg.matrix_power(A, k) @ B for k in range(n)])
        assert controllable_subspace(A, B).dim == np.linalg.matrix_rank(K)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 8), st.integers(0, 2**31 - 1))
    def test_invariance_and_monotonicity(self, n, seed):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((n, n))
        B1 = rng.standard_normal((n, 1))
        B2 = rng.standard_normal((n, 1))
        Q = controllable_subspace(A, B1).Q
        assert np.linalg.norm(Q @ (Q.T @ (A @ Q)) - A @ Q) <= 1e-9 * np.linalg.norm(A)
        assert subspace_leq(controllable_subspace(A, B1), controllable_subspace(A, np.hstack([B1, B2])))


class TestSubspaceLeq:
    def test_equal(self):
        U = _basis([1, 0, 0], [0, 1, 0])
        assert subspace_leq(U, U)

    def test_orthogonal(self):
        assert not subspace_leq(_basis([1, 0, 0]), _basis([0, 1, 0]))

    def test_contained(self):
        assert subspace_leq(_basis([1, 0, 0]), _basis([1, 0, 0], [0, 1, 0]))

    def test_ambient_mismatch(self):
        with pytest.raises(ValueError):
            subspace_leq(OrthonormalBasis(np.eye(2)), OrthonormalBasis(np.eye(3)))


class TestExistence:
    def test_expected_clusters(self, csys1):
        rep = existence_check(csys1)
        assert rep.verdict and rep.offending == ()
        assert all(rep.reachable)

    def test_bipartition(self, bench1):
        net, _ = bench1
        rep = existence_check(clustered_system(net, BIPARTITION, strict=False))
        assert not rep.verdict
        assert rep.offending == (2,)

    def test_singletons(self, bench1):
        net, _ = bench1
        assert existence_check(clustered_system(net, ClusterSet.singletons(9))).verdict

    def test_verdict_is_conjunction(self, bench1):
        net, _ = bench1
        for cs in (BIPARTITION, ClusterSet(((1, 2, 3), (4, 5), (6, 7, 8, 9)))):
            rep = existence_check(clustered_system(net, cs, strict=False))
            assert rep.verdict == (all(rep.local_ok) and rep.global_ok)

    def test_report_serializable(self, csys1):
        d = existence_check(csys1).to_dict()
        assert d["verdict"] is True and len(d["local"]) == 3


class TestReachability:
    def test_benchmark(self, csys1):
        assert all(reachability_condition(csys1, i) for i in range(3))

    def test_disconnected(self):
        comps = tuple(second_order_component(1, 0.2) for _ in range(4))
        net = NetworkSystem(comps, diffusive_coupling([(1, 2, 1), (3, 4, 1)], 4))
        c = clustered_system(net, ClusterSet(((1, 2), (3, 4))))
        assert not reachability_condition(c, 0)
        assert not reachability_condition(c, 1)
        # brute force: the Krylov span from cluster 2 has no support on cluster 1
        K = np.hstack([np.linalg.matrix_power(c.A, k) @ c.Ps[1] for k in range(8)])
        assert np.allclose(K[:4], 0)

    def test_fully_connected(self):
        comps = tuple(second_order_component(1, 0.2) for _ in range(6))
        edges = [(k, l, 1.0) for k in range(1, 7) for l in range(k + 1, 7)]
        net = NetworkSystem(comps, diffusive_coupling(edges, 6))
        c = clustered_system(net, ClusterSet(((1, 2, 3), (4, 5, 6))))
        for i in range(2):
            assert reachability_condition(c, i)
            others = c.Ps[1 - i]
            K = np.hstack([np.linalg.matrix_power(c.A, k) @ others for k in range(12)])
            target = c.Ps[i] @ c.Ps[i].T @ c.P0
            r = np.linalg.matrix_rank(K, tol=1e-8)
            assert np.linalg.matrix_rank(np.hstack([K, target]), tol=1e-8) == r

    def test_single_cluster(self, bench1):
        net, _ = bench1
        comps = tuple(second_order_component(1, 0.2) for _ in range(3))
        net = NetworkSystem(comps, diffusive_coupling([(1, 2, 1), (2, 3, 1)], 3))
        c = clustered_system(net, ClusterSet(((1, 2, 3),)))
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            assert reachability_condition(c, 0) is False
        assert w
        assert existence_check(c).reachable == (None,)


def test_reachability_implies_global_condition():
    # local + reachability conditions imply the global condition
    rng = np.random.default_rng(11)
    hits = 0
    for trial in range(60):
        N0 = int(rng.integers(3, 9))
        sizes = rng.multinomial(N0 - 2, np.ones(2) / 2) + 1
        net = random_network(rng, N0, groups=list(sizes) if trial % 2 else None)
        k = int(rng.integers(2, N0 + 1))
        cuts = np.sort(rng.choice(np.arange(1, N0), size=k - 1, replace=False))
        cs = ClusterSet(tuple(tuple(int(x) + 1 for x in p) for p in np.split(np.arange(N0), cuts)))
        rep = existence_check(clustered_system(net, cs))
        if all(rep.local_ok) and all(rep.reachable):
            hits += 1
            assert rep.global_ok
    assert hits > 0
