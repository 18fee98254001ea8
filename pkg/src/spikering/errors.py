"""Exception types shared across the package."""


class SpikeRingError(Exception):
    """Base class for all package errors."""


class InadmissibleCoupling(SpikeRingError):
    """beta12 outside the open intervals where the synchronized pair exists."""


class BracketFailure(SpikeRingError):
    """Shooting bracket contains no sign change."""


class NonDecay(SpikeRingError):
    """Integrated radial solution fails to decay before R_max."""


class GridTooCoarse(SpikeRingError):
    """Grid spacing above the decay-length resolution floor."""


class OutOfDomain(SpikeRingError):
    """(r, rho) outside the admissible landscape square."""


class NoRoot(SpikeRingError):
    """Scalar critical-point equation has no bracketable large root."""


class BoundaryExtremum(SpikeRingError):
    """Landscape extremum sits on the domain boundary."""


class IterationStall(SpikeRingError):
    """Eigenvalue iteration failed to converge within the iteration cap."""


class LinearSolveFailure(SpikeRingError):
    """Projected Newton system is singular or too ill-conditioned to solve."""


class Diverged(SpikeRingError):
    """Newton iteration exceeded max_iter without reaching tolerance."""


class ConfigError(SpikeRingError):
    """Malformed run configuration; message carries the line number."""
