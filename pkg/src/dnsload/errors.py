"""Exception hierarchy shared across the package.

The grouping mirrors the CLI exit-code policy: configuration problems,
runtime/model problems (simulation and sensitivity analysis), and
estimation infeasibilities are distinguishable by base class.
"""


class DnsLoadError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(DnsLoadError):
    """A configuration document is missing, malformed, or inconsistent."""


class InvalidParams(DnsLoadError):
    """Distribution parameters violate their validity constraints."""


class EstimationError(DnsLoadError):
    """Base class for estimation failures (model inversion infeasible)."""


class InfeasibleMeasurement(EstimationError):
    """Observed rate exceeds the saturation ceiling n / ttl of the model."""


class DegenerateTtls(EstimationError):
    """Two measurement TTLs coincide, making the system singular."""


class NoFeasibleRoot(EstimationError):
    """The two-measurement solve has no admissible positive-rate root."""


class AmbiguousSolution(EstimationError):
    """Both quadratic roots are admissible; carries the candidate estimates."""

    def __init__(self, message, candidates):
        super().__init__(message)
        self.candidates = tuple(candidates)


class InconsistentMeasurements(EstimationError):
    """Three-measurement solve yields non-physical parameters."""


class ZeroDifference(EstimationError):
    """Loads at distinct TTLs are identical: no caching signal to invert."""


class UnseparableClusters(EstimationError):
    """Requestor clustering found no reliable two-cluster separation."""


class ZeroResolvers(EstimationError):
    """A requestor partition contains no resolvers."""


class SimulationError(DnsLoadError):
    """Traffic simulation failed."""


class GsaError(DnsLoadError):
    """Base class for sensitivity-analysis failures."""


class InsufficientTrajectories(GsaError):
    """Elementary-effects screening needs at least two trajectories."""


class NyquistViolation(GsaError):
    """FAST sample size is too small for the assigned frequency set."""


class InfeasibleBox(GsaError):
    """A corner of the uncertainty box violates the n > load * ttl constraint."""
