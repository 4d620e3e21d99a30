"""Exception types shared across the package."""


class BeamlabError(Exception):
    """Base class; ``op`` names the operation that raised."""

    def __init__(self, message: str, op: str | None = None):
        super().__init__(message)
        self.op = op


class ConfigError(BeamlabError):
    pass


class PreconditionError(BeamlabError):
    pass


class DegenerateMetricError(BeamlabError):
    pass


class FrameError(BeamlabError):
    pass


class ChartError(BeamlabError):
    """Newton inversion of a Fermi chart failed; carries a suggested radius."""

    def __init__(self, message: str, suggested_radius: float | None = None, op: str | None = None):
        super().__init__(message, op)
        self.suggested_radius = suggested_radius


class ToleranceError(BeamlabError):
    pass


class BranchError(BeamlabError):
    pass


class ResolutionError(BeamlabError):
    pass


class ConditioningError(BeamlabError):
    pass


class ReconciliationError(BeamlabError):
    pass


class DegeneratePhaseError(BeamlabError):
    pass


class DegenerateConfigurationError(BeamlabError):
    pass


class GuardError(BeamlabError):
    """Amplitude guard tripped: the small-data regime was left."""


class InsufficientDataError(BeamlabError):
    pass
