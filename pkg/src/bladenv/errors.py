"""Exception and warning types shared across the package."""


class BladenvError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(BladenvError):
    """An input violates a documented precondition."""


class ConvergenceError(BladenvError):
    """An iterative routine failed to reach its tolerance."""


class InfeasibleRegionError(BladenvError):
    """A constraint region is empty where a nonempty one was required."""


class ExtrapolationError(BladenvError):
    """A resampling target lies outside the source span."""


class ConfigError(BladenvError):
    """A pipeline configuration failed schema validation."""


class ArtifactError(BladenvError):
    """A pipeline artifact is missing or stale relative to the config."""


class ResidualInfeasibleWarning(UserWarning):
    """The requested residual bound is below the minimum achievable one."""


class InseparableDataWarning(UserWarning):
    """Gate calibration data cannot be separated better than chance."""


class EmptyPolytopeWarning(UserWarning):
    """The requested active coordinate may define an empty polytope."""
