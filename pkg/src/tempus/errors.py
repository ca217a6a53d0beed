"""Exception types raised across the package."""


class TempusError(Exception):
    """Base class for all package errors."""


class InvalidArgument(TempusError, ValueError):
    pass


class IncompatibleGridError(TempusError, ValueError):
    pass


class DegenerateStateError(TempusError, ValueError):
    pass


class GridCoverageError(TempusError):
    """The energy grid misses a significant part of a state's weight."""


class WindowMassError(TempusError):
    """A time window holds too little of a temporal probability density."""


class ConfigError(TempusError):
    pass
