"""Exception types shared across the package."""


class ClickLabError(Exception):
    """Base class for all package errors."""


class PositionRangeError(ClickLabError, ValueError):
    """A position lies outside ``1..max_position``."""


class EmptyInputError(ClickLabError, ValueError):
    pass


class ValidationError(ClickLabError, ValueError):
    """Data violates a structural invariant (duplicate docs in a search, bad click value, ...)."""


class DivisionHazardError(ClickLabError, ZeroDivisionError):
    """A zero propensity sits at a position that has impressions."""


class PropensityCoverageError(ClickLabError, ValueError):
    """An estimated propensity is missing or zero at an occupied position."""


class DegenerateDenominatorError(ClickLabError, ZeroDivisionError):
    """Expected clicks are zero although the document has impressions."""


class InsufficientDataError(ClickLabError, ValueError):
    pass


class ConfigError(ClickLabError, ValueError):
    pass
