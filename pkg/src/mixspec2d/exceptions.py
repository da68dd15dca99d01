"""Exception types shared across the package."""


class MixSpec2DError(Exception):
    """Base class for all mixspec2d errors."""


class InvalidModelError(MixSpec2DError, ValueError):
    """A model object violates one of its structural invariants."""


class CoverageError(MixSpec2DError, ValueError):
    """An input field does not cover the index range an operation needs."""


class ConditioningError(MixSpec2DError, ArithmeticError):
    """A linear system is numerically singular, typically because regressor
    frequencies are too close together."""


class RankDeficiencyError(MixSpec2DError, ArithmeticError):
    """The data cannot support the requested number of components (for
    example, fitting sinusoids to an identically zero field)."""


class ConfigError(MixSpec2DError, ValueError):
    """A configuration document is malformed or internally inconsistent."""
