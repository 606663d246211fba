"""Beam-pattern comparison: scale-optimal distance, dB difference maps, histograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beam import BeamPattern, to_db
from .errors import DegenerateError, InvalidArgumentError


def _values(bp) -> np.ndarray:
    return np.asarray(bp.values if isinstance(bp, BeamPattern) else bp, dtype=float)


def _check_pair(a, b):
    if a.shape != b.shape:
        raise InvalidArgumentError(f"grid mismatch: {a.shape} vs {b.shape}")


def distance(bp, ref) -> tuple[float, float]:
    """Mean squared residual after max-normalizing both and fitting ``ref`` by a scalar.

    Returns ``(D, alpha_star)`` with ``alpha_star = <bp, ref> / <ref, ref>``
    computed on the normalized grids.
    """
    a, b = _values(bp), _values(ref)
    _check_pair(a, b)
    if not b.max() > 0:
        raise DegenerateError("reference beam pattern has no positive value")
    if not a.max() > 0:
        raise DegenerateError("beam pattern has no positive value")
    a = (a / a.max()).ravel()
    b = (b / b.max()).ravel()
    alpha = float(np.dot(a, b) / np.dot(b, b))
    r = a - alpha * b
    return float(np.dot(r, r) / a.size), alpha


@dataclass
class DbDifference:
    grid: np.ndarray
    edges: np.ndarray
    counts: np.ndarray


def db_difference(bp, ref, floor_db: float = 60.0, bin_width: float = 1.0) -> DbDifference:
    """Per-point ``|dB(bp) - dB(ref)|`` and its histogram with ``bin_width`` dB bins."""
    a, b = _values(bp), _values(ref)
    _check_pair(a, b)
    if not bin_width > 0:
        raise InvalidArgumentError("bin width must be positive")
    da = to_db(BeamPattern(a, None, ""), floor_db)
    db = to_db(BeamPattern(b, None, ""), floor_db)
    diff = np.abs(da - db)
    nbins = max(1, int(np.ceil(diff.max() / bin_width)))
    if diff.max() >= nbins * bin_width:
        nbins += 1
    edges = np.arange(nbins + 1) * bin_width
    counts, _ = np.histogram(diff, bins=edges)
    return DbDifference(diff, edges, counts)


@dataclass
class ComparisonReport:
    distance: float
    alpha_star: float
    difference: DbDifference
    num_points: int
    threshold: float | None = None

    @property
    def passed(self) -> bool | None:
        return None if self.threshold is None else self.distance <= self.threshold

    def to_text(self) -> str:
        d = self.difference
        lines = [
            f"distance: {self.distance:.6e}",
            f"alpha_star: {self.alpha_star:.9g}",
            f"num_points: {self.num_points}",
            f"max_abs_db_difference: {d.grid.max():.4f}",
            f"mean_abs_db_difference: {d.grid.mean():.4f}",
        ]
        if self.threshold is not None:
            lines.append(f"threshold: {self.threshold:.6e}")
            lines.append(f"result: {'pass' if self.passed else 'fail'}")
        lines.append("")
        lines.append("histogram:")
        lines.append(f"{'lo_db':>8} {'hi_db':>8} {'count':>10}")
        for lo, hi, c in zip(d.edges[:-1], d.edges[1:], d.counts):
            lines.append(f"{lo:8.2f} {hi:8.2f} {c:10d}")
        return "\n".join(lines) + "\n"


def compare(bp, ref, floor_db: float = 60.0, bin_width: float = 1.0,
            threshold: float | None = None) -> ComparisonReport:
    D, alpha = distance(bp, ref)
    diff = db_difference(bp, ref, floor_db, bin_width)
    return ComparisonReport(D, alpha, diff, int(_values(bp).size), threshold)
