"""Exception hierarchy shared by the compute modules and both front ends."""


class TxBeamError(Exception):
    """Base class for all errors raised by txbeam."""

    #: short machine-readable tag, carried over the HTTP API
    kind = "error"


class InvalidArgumentError(TxBeamError, ValueError):
    kind = "invalid-argument"


class ConfigError(InvalidArgumentError):
    """Invalid run configuration. ``key`` names the offending entry."""

    kind = "config"

    def __init__(self, message, key=None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


class SingularGeometryError(TxBeamError, ValueError):
    """A field point lies (numerically) on the radiating surface."""

    kind = "singular-geometry"


class CoverageError(TxBeamError, ValueError):
    """A time window or a stored grid does not cover what is asked of it."""

    kind = "coverage"


class EmptyBandError(TxBeamError, ValueError):
    kind = "empty-band"


class DegenerateError(TxBeamError, ValueError):
    """All-zero beam pattern or reference where a positive maximum is needed."""

    kind = "degenerate"


class RankDeficiencyError(TxBeamError, ValueError):
    kind = "rank-deficiency"


class MapIOError(TxBeamError, OSError):
    """A file that cannot be read or parsed."""

    kind = "io"


class IncompatibleMapError(TxBeamError):
    """Stored file header does not match the requested configuration.

    ``fields`` lists the mismatching header entries.
    """

    kind = "incompatible"

    def __init__(self, message, fields=()):
        super().__init__(message)
        self.fields = list(fields)


def error_class(kind: str) -> type:
    """The exception class carrying a given ``kind`` tag (``TxBeamError`` if unknown)."""
    stack = [TxBeamError]
    while stack:
        cls = stack.pop()
        if cls.kind == kind:
            return cls
        stack.extend(cls.__subclasses__())
    return TxBeamError
