"""Transmit beam patterns of linear-array ultrasound probes from precomputed spatial impulse maps."""

from .errors import (ConfigError, CoverageError, DegenerateError, EmptyBandError, IncompatibleMapError,
                     InvalidArgumentError, MapIOError, RankDeficiencyError, SingularGeometryError,
                     TxBeamError)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "CoverageError", "DegenerateError", "EmptyBandError", "IncompatibleMapError",
    "InvalidArgumentError", "MapIOError", "RankDeficiencyError", "SingularGeometryError", "TxBeamError",
]
