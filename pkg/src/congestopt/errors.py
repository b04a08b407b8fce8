"""Exception types raised by congestopt."""


class CongestoptError(Exception):
    """Base class for all library errors."""


class OrderingViolation(CongestoptError, ValueError):
    """The low-congestion cost exceeds the high-congestion cost somewhere."""


class GridMismatch(CongestoptError, ValueError):
    pass


class LineSearchFailure(CongestoptError):
    """No step satisfying the Wolfe conditions was found."""


class NonFiniteObjective(CongestoptError, FloatingPointError):
    pass


class OutOfBounds(CongestoptError, ValueError):
    """A dilated set would reach the raster boundary."""


class BoundaryContact(CongestoptError, ValueError):
    pass


class NoContour(CongestoptError, ValueError):
    pass


class DegenerateContour(CongestoptError, ValueError):
    pass


class ProbeOutOfDomain(CongestoptError, ValueError):
    pass


class ConfigError(CongestoptError, ValueError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class SolveError(CongestoptError):
    pass


class IncompatibleReports(CongestoptError, ValueError):
    pass
