"""Exception types shared across the package."""


class CapLabError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(CapLabError, ValueError):
    """A tensor or layer dimension does not match its contract."""


class NumericsError(CapLabError, ArithmeticError):
    """A computation produced non-finite values (NaN/Inf)."""


class CsvParseError(CapLabError, ValueError):
    """A CSV file violates the expected format; message carries the line number."""


class ConfigError(CapLabError, ValueError):
    """A run configuration is malformed; message names the offending field."""
