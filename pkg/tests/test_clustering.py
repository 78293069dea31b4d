import warnings

import numpy as np
import pytest

from glocal.clustering import admissible, algorithm1, algorithm2, is_partition_of, refine
from glocal.errors import InvalidPartitionError, NoRefinementNeeded
from glocal.network import (
    ClusterSet,
    NetworkSystem,
    benchmark_network,
    clustered_system,
    diffusive_coupling,
    initial_bipartition,
    second_order_component,
)
from glocal.subspace import existence_check

from _helpers import BIPARTITION, EXPECTED, random_network, set_partitions


def _refinements(cs):
    """Every cluster set refining ``cs``."""
    def rec(k):
        if k == cs.N:
            yield []
            return
        for tail in rec(k + 1):
            for part in set_partitions(list(cs.clusters[k])):
                yield [tuple(sorted(p)) for p in part] + tail
    for blocks in rec(0):
        yield ClusterSet(tuple(sorted(blocks, key=min)))


class TestRefine:
    def test_benchmark(self, bench1):
        A = bench1[0].A
        assert refine(A, BIPARTITION, 2) == EXPECTED

    def test_heterogeneous_cluster(self):
        comps = tuple(second_order_component(1, d) for d in (0.1, 0.2, 0.3, 0.4))
        edges = [(1, 2, 1), (2, 3, 1), (3, 4, 1), (1, 4, 1)]
        net = NetworkSystem(comps, diffusive_coupling(edges, 4))
        cs = ClusterSet(((1, 2, 3), (4,)))
        out = refine(net.A, cs, 2)
        assert out == ClusterSet.singletons(4)

    def test_admissible_is_noop_error(self, bench1):
        with pytest.raises(NoRefinementNeeded):
            refine(bench1[0].A, EXPECTED, 1)

    def test_keeps_offending_cluster(self, bench1):
        out = refine(bench1[0].A, BIPARTITION, 2)
        assert (6, 7, 8, 9) in out.clusters
        assert is_partition_of(out, BIPARTITION)

    def test_bad_index(self, bench1):
        with pytest.raises(IndexError):
            refine(bench1[0].A, BIPARTITION, 3)


class TestAlgorithm1:
    def test_benchmark(self, bench1):
        out, tr = algorithm1(bench1[0].A, BIPARTITION)
        assert out == EXPECTED
        assert tr.refinements <= 2 and tr.reason == "admissible"
        assert tr.offending == (2,)

    def test_singletons_unchanged(self, bench1):
        s = ClusterSet.singletons(9)
        out, tr = algorithm1(bench1[0].A, s)
        assert out == s and tr.refinements == 0

    def test_idempotent(self, bench1):
        A = bench1[0].A
        out, _ = algorithm1(A, BIPARTITION)
        again, tr = algorithm1(A, out)
        assert again == out and tr.refinements == 0

    def test_single_cluster_warns(self, bench1):
        one = ClusterSet((tuple(range(1, 10)),))
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            out, tr = algorithm1(bench1[0].A, one)
        assert w and out == one and tr.reason == "single-cluster"

    def test_deterministic_trace(self):
        net, _ = benchmark_network(2)
        a = algorithm1(net.A, initial_bipartition(18))[1].to_dict()
        b = algorithm1(net.A, initial_bipartition(18))[1].to_dict()
        assert a == b

    def test_refinement_chain(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            net = random_network(rng, 8)
            _, tr = algorithm1(net.A, initial_bipartition(8))
            for a, b in zip(tr.steps, tr.steps[1:]):
                assert is_partition_of(b, a)
                assert b.N > a.N

    def test_scaled_benchmark(self):
        net, cs = benchmark_network(3)
        initial = initial_bipartition(27)
        out, _ = algorithm1(net.A, initial)
        # the cut splits group 2, so its straddling member ends up alone
        assert is_partition_of(out, cs) and is_partition_of(out, initial)
        assert admissible(net.A, out)
        assert out.N == 4


class TestAlgorithm2:
    def test_benchmark_same_as_algorithm1(self, bench1):
        out, tr = algorithm2(bench1[0].A, BIPARTITION)
        assert out == EXPECTED and tr.reason == "admissible"

    def test_singletons_unchanged(self, bench1):
        s = ClusterSet.singletons(9)
        assert algorithm2(bench1[0].A, s)[0] == s

    def test_disconnected_homogeneous(self):
        comps = tuple(second_order_component(1, 0.2) for _ in range(6))
        edges = [(1, 2, 1), (2, 3, 1), (1, 3, 1), (4, 5, 1), (5, 6, 1), (4, 6, 1)]
        net = NetworkSystem(comps, diffusive_coupling(edges, 6))
        initial = ClusterSet(((1, 2, 3), (4, 5, 6)))
        out, tr = algorithm2(net.A, initial)
        rep = existence_check(clustered_system(net, out))
        assert rep.verdict
        assert all(kind in ("refine", "split") for kind, _ in tr.events)

    def test_trace_export(self, bench1):
        _, tr = algorithm2(bench1[0].A, BIPARTITION)
        d = tr.to_dict()
        assert d["steps"][-1] == EXPECTED.to_list() and d["events"] == [["refine", 2]]


class TestIsPartitionOf:
    def test_fine(self):
        assert is_partition_of(ClusterSet(((1,), (2,))), ClusterSet(((1, 2),)))

    def test_coarse(self):
        assert not is_partition_of(ClusterSet(((1, 2),)), ClusterSet(((1,), (2,))))

    def test_benchmark(self):
        assert is_partition_of(EXPECTED, BIPARTITION)

    def test_ground_mismatch(self):
        with pytest.raises(InvalidPartitionError):
            is_partition_of(ClusterSet(((1, 2),)), ClusterSet(((1, 2, 3),)))


def test_algorithm2_certified_on_random_networks():
    rng = np.random.default_rng(21)
    for trial in range(15):
        N0 = int(rng.integers(4, 10))
        k = int(rng.integers(2, 4))
        sizes = list(rng.multinomial(N0 - k, np.ones(k) / k) + 1)
        net = random_network(rng, N0, groups=sizes if trial % 3 else None)
        out, _ = algorithm2(net.A, initial_bipartition(N0))
        assert existence_check(clustered_system(net, out)).verdict


def test_minimality_exhaustive_small():
    rng = np.random.default_rng(5)
    for trial in range(6):
        N0 = int(rng.integers(3, 7))
        sizes = list(rng.multinomial(N0 - 2, [0.5, 0.5]) + 1)
        net = random_network(rng, N0, groups=sizes if trial % 2 else None)
        initial = initial_bipartition(N0)
        out, _ = algorithm1(net.A, initial)
        for cand in _refinements(initial):
            if cand.N >= 2 and admissible(net.A, cand):
                assert is_partition_of(cand, out)
