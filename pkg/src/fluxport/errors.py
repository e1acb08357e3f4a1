"""Exception types shared across the package."""


class FluxportError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(FluxportError):
    """Array shapes do not match the grid or operator they are used with."""


class CflViolationError(FluxportError):
    """An advection stage was asked to exceed its stable time step."""

    def __init__(self, realization, dt, limit):
        self.realization = realization
        self.dt = dt
        self.limit = limit
        super().__init__(
            f"advection step dt={dt:g} exceeds CFL limit {limit:g} "
            f"for realization {realization}"
        )


class ConfigError(FluxportError):
    """Base class for run-configuration errors."""


class ConfigSyntaxError(ConfigError):
    def __init__(self, line, col, message):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, col {col}: {message}")


class ConfigUnknownKeyError(ConfigError):
    def __init__(self, line, key):
        self.line = line
        self.key = key
        super().__init__(f"line {line}: unknown key '{key}'")


class ConfigValueError(ConfigError):
    def __init__(self, line, key, message):
        self.line = line
        self.key = key
        super().__init__(f"line {line}: key '{key}': {message}")


class MapFormatError(FluxportError):
    """Base class for map-file format errors."""


class MapBadMagicError(MapFormatError):
    pass


class MapTruncatedError(MapFormatError):
    def __init__(self, expected, found):
        self.expected = expected
        self.found = found
        super().__init__(
            f"map payload has {found} values, expected {expected}"
        )


class MapDimensionOverflowError(MapFormatError):
    pass


class HistoryFormatError(FluxportError):
    """A history text file does not parse."""


class ValidationStructureError(FluxportError):
    """Candidate and reference history files are not comparable."""
