"""Exception types raised across the package."""


class EpiplanError(Exception):
    """Base class for all package errors."""


class StructuralError(EpiplanError):
    """Axis names/cardinalities do not line up, or a reference dangles."""


class DegenerateDistributionError(EpiplanError):
    """A slice that must be normalizable sums to zero."""


class ContractViolationError(EpiplanError):
    """An operation precondition (e.g. normalized input) was violated."""


class DivergenceUndefinedError(EpiplanError):
    """KL divergence undefined: q assigns zero mass where p does not."""


class ModelValidationError(EpiplanError):
    """A model or environment spec is malformed."""


class ScheduleError(EpiplanError):
    """A message directive references a missing node-edge incidence."""


class InconsistentEvidenceError(EpiplanError):
    """Message passing produced an all-zero belief on an edge."""

    def __init__(self, edge_id: str, message: str = ""):
        self.edge_id = edge_id
        super().__init__(message or f"all-zero belief on edge {edge_id!r}")


class EnumerationGuardError(EpiplanError):
    """A brute-force computation would exceed its size guard."""


class UsageError(EpiplanError):
    """API misuse, e.g. stepping a finished environment."""


class ConfigError(EpiplanError):
    """Invalid experiment or agent configuration."""
