"""Exception hierarchy shared by all modules."""


class FQHError(Exception):
    """Base class for library errors."""


class DomainError(FQHError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class GuardError(FQHError, ValueError):
    """A numerical guard refused the evaluation (temperature bounds, cutoffs)."""


class TruncationError(GuardError):
    """Summation window could not be bounded."""


class UnknownSectorError(FQHError, LookupError):
    pass


class InadmissibleSectorError(FQHError, ValueError):
    pass


class InconsistentModelError(FQHError, ValueError):
    """Neutral model data violate a structural requirement."""


class ConfigError(FQHError, ValueError):
    pass
