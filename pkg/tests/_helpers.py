"""Network generators shared by the test modules."""
import numpy as np

from glocal.network import ClusterSet, NetworkSystem, diffusive_coupling, second_order_component

BIPARTITION = ClusterSet(((1, 2, 3, 4, 5), (6, 7, 8, 9)))
EXPECTED = ClusterSet(((1, 2, 3), (4, 5), (6, 7, 8, 9)))


def random_network(rng, N0, groups=None, m=1.0, density=0.5):
    """Second-order network with common inertia.

    With ``groups`` (list of group sizes) every group is homogeneous and each
    pair of groups is either fully coupled with a common weight or not coupled,
    so the groups are exchangeable. Otherwise edges and dampings are random.
    """
    if groups is None:
        d = rng.choice([0.1, 0.2, 0.3], size=N0)
        edges = [(k, l, float(rng.choice([1.0, 2.0])))
                 for k in range(1, N0 + 1) for l in range(k + 1, N0 + 1)
                 if rng.random() < density]
        comps = tuple(second_order_component(m, float(x)) for x in d)
        return NetworkSystem(comps, diffusive_coupling(edges, N0))
    labels = [g for g, s in enumerate(groups) for _ in range(s)]
    dg = rng.choice([0.1, 0.2, 0.3, 0.4], size=len(groups))
    w = {}
    for a in range(len(groups)):
        for b in range(a, len(groups)):
            w[(a, b)] = float(rng.choice([0.0, 1.0, 2.0])) if rng.random() < density + 0.3 else 0.0
    edges = []
    N0 = len(labels)
    for k in range(N0):
        for l in range(k + 1, N0):
            a, b = sorted((labels[k], labels[l]))
            if w[(a, b)] > 0:
                edges.append((k + 1, l + 1, w[(a, b)]))
    comps = tuple(second_order_component(m, float(dg[g])) for g in labels)
    return NetworkSystem(comps, diffusive_coupling(edges, N0))


def random_partition(rng, N0, n_blocks):
    labels = list(range(1, N0 + 1))
    rng.shuffle(labels)
    cuts = sorted(rng.choice(np.arange(1, N0), size=n_blocks - 1, replace=False))
    parts = np.split(np.array(labels), cuts)
    return ClusterSet(tuple(tuple(sorted(int(x) for x in p)) for p in parts))


def set_partitions(items):
    """All set partitions of ``items`` (as lists of lists)."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for j in range(len(part)):
            yield part[:j] + [[first] + part[j]] + part[j + 1:]
        yield [[first]] + part
