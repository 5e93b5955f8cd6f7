"""Exception hierarchy. Every operation error derives from SoupfallError."""


class SoupfallError(Exception):
    """Base class for operation errors raised by the package."""


class GeometryError(SoupfallError, ValueError):
    """Invalid curve, domain or raster parameters."""


class InvalidScaleError(GeometryError):
    pass


class InvalidSpecError(SoupfallError, ValueError):
    pass


class ResolutionError(SoupfallError, ValueError):
    """Raster pitch too coarse for the requested distance scale."""


class InsufficientDataError(SoupfallError, ValueError):
    pass


class DegenerateInputError(SoupfallError, ValueError):
    pass


class WindowTooSmallError(SoupfallError, RuntimeError):
    """Too many gamma-star samples were truncated by the sampling window."""


class ExplorationCapError(SoupfallError, RuntimeError):
    pass


class DomainError(SoupfallError, ValueError):
    """Argument outside the mathematical domain of a closed-form evaluator."""


class SoupParseError(SoupfallError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
