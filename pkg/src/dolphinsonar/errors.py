"""Exception hierarchy shared by all modules."""


class SonarError(Exception):
    """Base class for domain errors raised by the package."""


class EmptyWindow(SonarError):
    pass


class DegenerateSignal(SonarError):
    """Raised when an echo (or its band power) carries no energy."""


class EmptySeries(SonarError):
    pass


class InsufficientEchoes(SonarError):
    pass


class EmptyDatabase(SonarError):
    pass


class NonPositivePower(SonarError):
    pass


class DuplicateTarget(SonarError):
    pass


class InvalidSpec(SonarError):
    pass


class InvalidLevel(SonarError):
    pass


class InsufficientBudget(SonarError):
    """Threshold search ran past its allowed range without a decision."""


class FormatError(SonarError):
    """Malformed echo, database or table file."""


class UnsupportedVersion(FormatError):
    pass


class SerializationError(SonarError):
    pass
