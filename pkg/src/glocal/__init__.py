"""Hierarchical model decomposition and glocal control of clustered linear networks."""
from .clustering import PartitionTrace, algorithm1, algorithm2, is_partition_of, refine
from .control import (
    ClosedLoop,
    DynamicController,
    FunctionalObserver,
    GlocalController,
    RiccatiSolution,
    assemble_glocal,
    build_functional_observer,
    design_glocal,
    lqr_observer_controller,
    solve_care,
    verify_observer_conditions,
)
from .decomposition import (
    HierarchicalDecomposition,
    RobustDecomposition,
    decompose,
    robust_decompose,
    verify_superposition,
)
from .errors import GlocalError
from .network import (
    ClusteredSystem,
    ClusterSet,
    ComponentModel,
    Interconnection,
    NetworkSystem,
    benchmark_network,
    clustered_system,
    diffusive_coupling,
    second_order_component,
)
from .simulation import (
    Trajectory,
    hankel_singular_values,
    lyapunov_solve,
    simulate,
    spectral_abscissa,
)
from .subspace import (
    ExistenceReport,
    OrthonormalBasis,
    controllable_subspace,
    existence_check,
    reachability_condition,
    subspace_leq,
)

__version__ = "0.1.0"
