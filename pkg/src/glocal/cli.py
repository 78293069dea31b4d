"""Command-line driver: check, cluster, decompose, design, simulate and bench.

Exit codes: 0 success, 1 existence check failed, 2 invalid input or
numerical failure, 3 design refused because no exact decomposition exists.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clustering import algorithm1, algorithm2
from .control import (
    GlocalController,
    assemble_glocal,
    build_functional_observer,
    design_centralized,
    design_global,
    design_local,
    save_controller,
)
from .decomposition import decompose, robust_decompose, save_decomposition
from .errors import GlocalError
from .network import (
    ClusterSet,
    benchmark_network,
    clustered_system,
    initial_bipartition,
    load_network,
    replicated_network,
)
from .simulation import Trajectory, write_csv
from .subspace import existence_check

OUT_ENV = "GLOCAL_OUT"
REGIMES = ("free", "local-only", "global-only", "glocal")


@dataclass(frozen=True)
class Scenario:
    network_file: str | None
    benchmark: int | None
    perturb: float | None
    seed: int
    clusters: str | None
    robust: bool
    horizon: float
    step: float
    out: Path

    @classmethod
    def from_args(cls, args) -> "Scenario":
        out = args.out or os.environ.get(OUT_ENV) or "glocal_out"
        return cls(args.network, args.benchmark, args.perturb, args.seed, args.clusters,
                   args.robust, args.horizon, args.step, Path(out))

    def load(self):
        """``(network, clusters from the source or None)``."""
        if self.network_file:
            if not Path(self.network_file).exists():
                raise FileNotFoundError(self.network_file)
            return load_network(self.network_file)
        return benchmark_network(self.benchmark or 1, self.perturb, self.seed)

    def resolve_clusters(self, net, source_cs) -> ClusterSet:
        spec = self.clusters
        if spec is None or spec == "expected":
            if source_cs is None:
                raise GlocalError("no clusters given and the network file defines none")
            return source_cs
        if spec == "singletons":
            return ClusterSet.singletons(net.N0)
        if spec == "auto":
            return algorithm2(net.A, initial_bipartition(net.N0))[0]
        return parse_clusters(spec)


def parse_clusters(spec: str) -> ClusterSet:
    """Cluster set from a JSON file or an inline JSON list of label lists."""
    path = Path(spec)
    text = path.read_text() if path.exists() else spec
    data = json.loads(text)
    if isinstance(data, dict):
        data = data["clusters"]
    return ClusterSet(tuple(tuple(c) for c in data))


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def _prepare(sc: Scenario):
    net, source_cs = sc.load()
    cs = sc.resolve_clusters(net, source_cs)
    return net, cs, clustered_system(net, cs, strict=False)


def cmd_check(sc: Scenario) -> int:
    net, cs, csys = _prepare(sc)
    rep = existence_check(csys)
    print(f"clusters: {cs.to_list()}")
    print(rep.summary())
    data = rep.to_dict()
    if not rep.verdict:
        leak = robust_decompose(csys).leakage_norms
        data["leakage"] = leak
        print(f"  leakage: F0 {leak['F0']:.3e}, Fi {[round(v, 6) for v in leak['Fi']]}; "
              "an exact decomposition is unavailable, consider --robust")
    _write_json(sc.out / "existence.json", data)
    return 0 if rep.verdict else 1


def cmd_cluster(sc: Scenario, initial: str | None, which: int) -> int:
    net, _ = sc.load()
    init = parse_clusters(initial) if initial else initial_bipartition(net.N0)
    algo = algorithm2 if which == 2 else algorithm1
    cs, trace = algo(net.A, init)
    print(f"initial: {init.to_list()}")
    for kind, arg in trace.events:
        print(f"  {kind} {arg}")
    print(f"result: {cs.to_list()} ({trace.reason})")
    _write_json(sc.out / "clusters.json", {"clusters": cs.to_list()})
    _write_json(sc.out / "trace.json", trace.to_dict())
    return 0


def _decomposition(sc: Scenario, csys, allow_robust: bool = True):
    rep = existence_check(csys)
    if rep.verdict and not csys.io_violation:
        return decompose(csys), rep
    if sc.robust and allow_robust:
        return robust_decompose(csys), rep
    return None, rep


def cmd_decompose(sc: Scenario) -> int:
    _, cs, csys = _prepare(sc)
    if sc.robust:
        hd = robust_decompose(csys)
        print(f"robust decomposition; leakage F0 {hd.leakage_norms['F0']:.3e}, "
              f"Fi {[f'{v:.3e}' for v in hd.leakage_norms['Fi']]}")
    else:
        hd = decompose(csys)
        print(f"exact decomposition; max residual {hd.max_residual:.3e}")
    save_decomposition(sc.out / "decomposition.json", hd, csys)
    return 0


def _design(csys, hd) -> GlocalController:
    K0 = design_global(csys, hd)
    Ks = tuple(design_local(csys, hd, i) for i in range(csys.N))
    obs = tuple(build_functional_observer(csys, hd, i) for i in range(csys.N))
    return GlocalController(K0, Ks, obs)


def cmd_design(sc: Scenario) -> int:
    _, cs, csys = _prepare(sc)
    hd, rep = _decomposition(sc, csys)
    if hd is None:
        print("design refused: no exact decomposition for these clusters "
              "(existence check failed); rerun with --robust", file=sys.stderr)
        return 3
    ctrl = _design(csys, hd)
    loop = assemble_glocal(csys, hd, ctrl.K0, ctrl.Ks, ctrl.observers)
    print(f"{'robust' if hd.robust else 'exact'} decomposition, clusters {cs.to_list()}")
    print(f"closed loop order {loop.order}, abscissa {loop.abscissa():.3e}, "
          f"after removing {loop.n_deflated} rigid mode(s) {loop.deflated_abscissa():.3e}")
    save_controller(sc.out / "controller.json", ctrl)
    save_decomposition(sc.out / "decomposition.json", hd, csys)
    return 0


def _labels(net) -> tuple:
    n = net.state_dim
    names = ("theta", "omega") if n == 2 else tuple(f"s{j + 1}" for j in range(n))
    return tuple(f"{nm}_{k + 1}" for k in range(net.N0) for nm in names)


def cmd_simulate(sc: Scenario, regimes, component: int, value: float, state: int) -> int:
    net, cs, csys = _prepare(sc)
    x0 = np.zeros(net.N0 * net.state_dim)
    x0[(component - 1) * net.state_dim + state] = value
    n = net.state_dim
    perm = np.concatenate([np.arange(k * n, (k + 1) * n) for k in csys.order])
    x0c = x0[perm]
    need_ctrl = any(r != "free" for r in regimes)
    hd = ctrl = None
    if need_ctrl:
        hd, _ = _decomposition(sc, csys)
        if hd is None:
            print("simulation of controlled regimes refused: no exact decomposition; "
                  "rerun with --robust", file=sys.stderr)
            return 3
        ctrl = _design(csys, hd)
    for regime in regimes:
        K0 = ctrl.K0 if regime in ("global-only", "glocal") else None
        Ks = ctrl.Ks if regime in ("local-only", "glocal") else None
        obs = ctrl.observers if Ks is not None else None
        loop = assemble_glocal(csys, hd, K0, Ks, obs)
        traj = loop.simulate(x0c, sc.horizon, sc.step)
        plant = csys.to_label_order(traj.states[:, loop.slices["x"]])
        out = Trajectory(traj.times, plant, _labels(net))
        path = sc.out / f"trajectory_{regime}.csv"
        write_csv(path, out)
        omega = plant[:, 1::n] if n == 2 else plant
        spreads = []
        for c in cs.clusters:
            cols = [(k - 1) * n + j for k in c for j in range(n)]
            blk = plant[:, cols].reshape(len(plant), len(c), n)
            spreads.append(float(np.max(np.ptp(blk, axis=1))))
        print(f"{regime}: final max |omega| {np.max(np.abs(omega[-1])):.3e}, "
              f"within-cluster spread {[f'{s:.1e}' for s in spreads]} -> {path}")
    return 0


# -- bench --------------------------------------------------------------------

def time_glocal(n0: int) -> float:
    net, cs = benchmark_network(n0)
    csys = clustered_system(net, cs)
    t = time.perf_counter()
    hd = decompose(csys)
    design_global(csys, hd)
    for i in range(csys.N):
        design_local(csys, hd, i)
        build_functional_observer(csys, hd, i)
    return time.perf_counter() - t


def time_centralized(n0: int) -> float:
    net, cs = benchmark_network(n0)
    csys = clustered_system(net, cs)
    t = time.perf_counter()
    design_centralized(csys)
    return time.perf_counter() - t


def time_clustering(n0: int, case: str) -> float:
    if case == "fixed":
        net, _ = benchmark_network(n0)
    else:
        net, _ = replicated_network(n0)
    init = initial_bipartition(net.N0)
    A = net.A
    t = time.perf_counter()
    algorithm1(A, init)
    return time.perf_counter() - t


def loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def bench(n0_list, repetitions: int = 3, clustering: bool = True) -> dict:
    design_rows, cluster_rows = [], []
    for n0 in n0_list:
        g = [time_glocal(n0) for _ in range(repetitions)]
        c = [time_centralized(n0) for _ in range(repetitions)]
        design_rows.append((n0, 18 * n0, np.mean(g), np.std(g), np.mean(c), np.std(c)))
        if clustering:
            for case in ("fixed", "growing"):
                ts = [time_clustering(n0, case) for _ in range(repetitions)]
                cluster_rows.append((n0, 9 * n0, case, np.mean(ts), np.std(ts)))
    return {"design": design_rows, "clustering": cluster_rows}


def cmd_bench(sc: Scenario, n0_list, repetitions: int, clustering: bool) -> int:
    res = bench(n0_list, repetitions, clustering)
    sc.out.mkdir(parents=True, exist_ok=True)
    with open(sc.out / "bench_design.csv", "w") as fh:
        fh.write("n0,n,glocal_mean,glocal_std,centralized_mean,centralized_std\n")
        for row in res["design"]:
            fh.write("%d,%d,%.6g,%.6g,%.6g,%.6g\n" % row)
    print("n0     n   glocal[s]   centralized[s]")
    for n0, n, gm, _, cm, _ in res["design"]:
        print(f"{n0:3d} {n:5d}  {gm:10.4f}  {cm:14.4f}")
    if len(n0_list) > 1:
        xs = [r[1] for r in res["design"]]
        print(f"log-log slope: glocal {loglog_slope(xs, [r[2] for r in res['design']]):.2f}, "
              f"centralized {loglog_slope(xs, [r[4] for r in res['design']]):.2f}")
    if clustering:
        with open(sc.out / "bench_clustering.csv", "w") as fh:
            fh.write("n0,N0,case,mean,std\n")
            for row in res["clustering"]:
                fh.write("%d,%d,%s,%.6g,%.6g\n" % row)
        for n0, N0, case, m, _ in res["clustering"]:
            print(f"clustering n0={n0:3d} N0={N0:4d} {case:8s} {m:.4f} s")
    return 0


# -- argument parsing ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--network", metavar="FILE", help="network description (JSON)")
    src.add_argument("--benchmark", metavar="N0", type=int, help="built-in benchmark, replication factor")
    common.add_argument("--perturb", metavar="MAG", type=float, help="relative parameter perturbation")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--clusters", metavar="SPEC",
                        help="FILE, inline JSON, 'auto', 'singletons' or 'expected'")
    common.add_argument("--robust", action="store_true", help="allow robust decomposition")
    common.add_argument("--horizon", type=float, default=10.0)
    common.add_argument("--step", type=float, default=1e-3)
    common.add_argument("--out", metavar="DIR", help=f"output directory (default ${OUT_ENV} or ./glocal_out)")

    p = argparse.ArgumentParser(prog="glocal", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common], help="existence conditions for the clusters")
    pc = sub.add_parser("cluster", parents=[common], help="run the clustering algorithm")
    pc.add_argument("--initial", metavar="SPEC", help="initial clusters (default: bipartition)")
    pc.add_argument("--algorithm", type=int, choices=(1, 2), default=2)
    sub.add_parser("decompose", parents=[common], help="build the hierarchical decomposition")
    sub.add_parser("design", parents=[common], help="design the glocal controller")
    ps = sub.add_parser("simulate", parents=[common], help="closed-loop responses as CSV")
    for r in REGIMES:
        ps.add_argument(f"--{r}", dest="regimes", action="append_const", const=r)
    ps.add_argument("--disturb", metavar="K", type=int, default=1, help="disturbed component label")
    ps.add_argument("--disturb-value", type=float, default=1.0)
    ps.add_argument("--disturb-state", choices=("theta", "omega"), default="omega")
    pb = sub.add_parser("bench", parents=[common], help="design and clustering timings")
    pb.add_argument("--n0", type=int, nargs="+", default=[10, 15, 20, 25])
    pb.add_argument("--repetitions", type=int, default=3)
    pb.add_argument("--no-clustering", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    sc = Scenario.from_args(args)
    try:
        if args.command == "check":
            return cmd_check(sc)
        if args.command == "cluster":
            return cmd_cluster(sc, args.initial, args.algorithm)
        if args.command == "decompose":
            return cmd_decompose(sc)
        if args.command == "design":
            return cmd_design(sc)
        if args.command == "simulate":
            regimes = args.regimes or list(REGIMES)
            state = 1 if args.disturb_state == "omega" else 0
            return cmd_simulate(sc, regimes, args.disturb, args.disturb_value, state)
        if args.command == "bench":
            if any(n < 1 for n in args.n0):
                print("n0 values must be at least 1", file=sys.stderr)
                return 2
            return cmd_bench(sc, args.n0, args.repetitions, not args.no_clustering)
    except (GlocalError, FileNotFoundError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
