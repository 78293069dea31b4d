"""Exception hierarchy shared across the package."""


class GlocalError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(GlocalError, ValueError):
    pass


class InvalidTopologyError(GlocalError, ValueError):
    pass


class InvalidPartitionError(GlocalError, ValueError):
    pass


class AssumptionViolation(GlocalError):
    """Input/output matrices differ inside a cluster.

    Carries the offending cluster (1-based) and component pair (1-based labels).
    """

    def __init__(self, cluster, pair, which):
        self.cluster = cluster
        self.pair = pair
        self.which = which
        super().__init__(
            f"cluster {cluster}: components {pair[0]} and {pair[1]} have different "
            f"{which} matrices"
        )


class ExistenceError(GlocalError):
    """No exact hierarchical decomposition for the given clusters."""

    def __init__(self, message, residuals=None):
        self.residuals = residuals or {}
        super().__init__(message)


class NoRefinementNeeded(GlocalError):
    """refine() was asked to split around a cluster that already satisfies the local condition."""


class SynthesisError(GlocalError):
    pass


class PreconditionError(GlocalError):
    pass


class DivergenceError(GlocalError, FloatingPointError):
    def __init__(self, time):
        self.time = time
        super().__init__(f"non-finite state encountered at t = {time:.6g}")


class WiringError(GlocalError, ValueError):
    pass
