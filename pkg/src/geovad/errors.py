"""Exception types raised across the package.

Every error derives from :class:`GeoVadError`.  Errors that describe bad input
data (as opposed to bad command-line usage) also derive from
:class:`DataError`; the CLI maps those to exit code 2.
"""


class GeoVadError(Exception):
    pass


class DataError(GeoVadError):
    pass


class ZeroVector(DataError, ValueError):
    pass


class AntipodalPoint(DataError, ValueError):
    pass


class AtBasePoint(DataError, ValueError):
    pass


class DegenerateMean(DataError, ValueError):
    pass


class HemisphereViolation(DataError, ValueError):
    pass


class EmptyBank(DataError, ValueError):
    pass


class TooFewPoints(DataError, ValueError):
    pass


class DimensionMismatch(DataError, ValueError):
    pass


class OutOfInterval(DataError, ValueError):
    pass


class DegenerateVariance(DataError, ValueError):
    def __init__(self, layer: int, message: str = ""):
        self.layer = layer
        super().__init__(message or f"fitted Gaussian variance collapsed at layer {layer}")


class SingleClass(DataError, ValueError):
    pass


class NoPositives(DataError, ValueError):
    pass


class ConfigError(DataError, ValueError):
    pass


class UnknownKey(ConfigError):
    def __init__(self, key: str, line: int):
        self.key = key
        self.line = line
        super().__init__(f"unknown config key {key!r} at line {line}")


class ParseError(ConfigError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


class FormatError(DataError):
    pass


class BadMagic(FormatError):
    pass


class TruncatedFile(FormatError):
    pass


class NonFiniteValue(FormatError):
    def __init__(self, offset: int):
        self.offset = offset
        super().__init__(f"non-finite value at byte offset {offset}")
