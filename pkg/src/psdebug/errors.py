"""Exception types raised across the package."""


class PSDebugError(Exception):
    """Base class for all errors raised by psdebug."""


class InvalidArgument(PSDebugError, ValueError):
    pass


class DimensionMismatch(InvalidArgument):
    pass


class ParseError(PSDebugError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class EmptySelection(PSDebugError, ValueError):
    """A systematic-noise selector matched no points."""


class DivergenceError(PSDebugError, ArithmeticError):
    def __init__(self, iteration, message="non-finite value during training"):
        self.iteration = iteration
        super().__init__(f"{message} (iteration {iteration})")


class NoAcceptedWorlds(PSDebugError, RuntimeError):
    """Every sampled world was rejected by the conditioning step."""
