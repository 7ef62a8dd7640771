"""Exception hierarchy shared by every module."""


class ZetamaxError(Exception):
    """Base class for all library errors."""


class DomainError(ZetamaxError, ValueError):
    """An argument lies outside the documented domain of an operation."""


class ResourceError(ZetamaxError):
    """A request would exceed a configured memory or size budget."""


class NumericalError(ZetamaxError):
    """A numerical procedure could not reach its accuracy target."""


class PrecisionError(NumericalError):
    """The requested accuracy is unattainable; ``achieved`` holds the bound reached."""

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


class BranchError(NumericalError):
    """A continuation path came too close to a zero of zeta."""

    def __init__(self, message: str, location: complex):
        super().__init__(message)
        self.location = location


class MiscountError(NumericalError):
    """Sign-change counting disagrees with the zero-count prediction."""

    def __init__(self, message: str, interval: tuple[float, float]):
        super().__init__(message)
        self.interval = interval


class CoverageError(ZetamaxError, ValueError):
    """Reconstruction samples do not cover every required node."""

    def __init__(self, message: str, missing: list[int]):
        super().__init__(message)
        self.missing = missing


class BuildError(NumericalError):
    """A kernel tabulation failed its own accuracy self-check."""
