"""Transmit delays and beam-pattern evaluation.

Wideband patterns are energies summed over the stored frequency bins,
narrowband patterns are single-frequency powers over symmetric element pairs.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateError, EmptyBandError, InvalidArgumentError
from .geometry import FieldGrid, Medium, Probe, element_center
from .pulse import PulseSpectrum
from .spectra import NarrowbandMap, WidebandMap, element_spectrum_view


@dataclass(frozen=True)
class Aperture:
    """Active elements, sorted by index."""

    indices: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.indices:
            raise InvalidArgumentError("empty aperture")
        if len(set(self.indices)) != len(self.indices):
            raise InvalidArgumentError("duplicate element in aperture")
        object.__setattr__(self, "indices", tuple(sorted(int(n) for n in self.indices)))

    @classmethod
    def centered(cls, num_active: int, probe: Probe | None = None) -> "Aperture":
        """``num_active`` (even) elements symmetric about x = 0."""
        if num_active < 2 or num_active % 2:
            raise InvalidArgumentError("a centred aperture needs an even, positive element count")
        if probe is not None and num_active > probe.num_elements:
            raise InvalidArgumentError(f"{num_active} active elements exceed the probe's {probe.num_elements}")
        h = num_active // 2
        return cls(tuple(range(-h, h)))

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def symmetric(self) -> bool:
        s = set(self.indices)
        return all(-n - 1 in s for n in s)

    @property
    def max_pair(self) -> int:
        """Largest pair index of a symmetric aperture."""
        if not self.symmetric:
            raise InvalidArgumentError("aperture is not symmetric")
        return max(self.indices)

    def pair_values(self, per_element) -> np.ndarray:
        """Pick the entries of elements ``m = 0 .. max_pair`` out of a per-element vector."""
        per_element = np.asarray(per_element, dtype=float)
        if per_element.shape != (len(self),):
            raise InvalidArgumentError(f"expected {len(self)} values, got {per_element.shape}")
        pos = {n: i for i, n in enumerate(self.indices)}
        return np.array([per_element[pos[m]] for m in range(self.max_pair + 1)])


@dataclass
class BeamPattern:
    """Non-negative energy or power per grid point, shape ``grid.shape``."""

    values: np.ndarray
    grid: FieldGrid
    kind: str
    metadata: dict = field(default_factory=dict)

    @property
    def raw_max(self) -> float:
        return float(self.values.max())

    def normalized(self) -> np.ndarray:
        m = self.raw_max
        if not m > 0:
            raise DegenerateError("beam pattern has no positive value")
        return self.values / m

    def peak(self) -> tuple[float, float]:
        """``(x, z)`` of the global maximum."""
        i, v = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return float(self.grid.x[i]), float(self.grid.z[v])


def focus_delays(aperture: Aperture, probe: Probe, medium: Medium, focus_depth: float) -> np.ndarray:
    """Firing delays making all element wavefronts meet at ``(0, 0, focus_depth)``.

    ``D_m = max_n t_n - t_m`` with ``t_m = sqrt(F**2 + x_m**2) / c``, so the
    outermost elements fire at 0. Ordered like ``aperture.indices``.
    """
    if not focus_depth > 0:
        raise InvalidArgumentError("focus depth must be positive")
    x = np.array([element_center(probe, n)[0] for n in aperture.indices])
    t = np.sqrt(focus_depth ** 2 + x ** 2) / medium.speed_of_sound
    return t.max() - t


def wrap_delays(delays, f0: float) -> np.ndarray:
    """Representatives in ``[0, 1/f0)`` of delays taken modulo one period."""
    return np.mod(np.asarray(delays, dtype=float), 1.0 / f0)


def _weights(apodization, n) -> np.ndarray:
    if apodization is None:
        return np.ones(n)
    a = np.asarray(apodization, dtype=float)
    if a.shape != (n,):
        raise InvalidArgumentError(f"apodization needs {n} weights, got {a.shape}")
    return a


def wideband_bp(wb: WidebandMap, grid: FieldGrid, spec: PulseSpectrum, aperture: Aperture, delays,
                apodization=None, threads: int = 1) -> BeamPattern:
    """Energy ``sum_k w_k |I(f_k) sum_m a_m H_m(f_k) exp(-2 pi i f_k D_m)|**2 df``.

    The sum runs over the bins kept by ``spec.mask``; ``w_k`` is the one-sided
    weight (1 at DC/Nyquist, 2 elsewhere). ``delays`` are absolute firing times
    ordered like ``aperture.indices``.
    """
    delays = np.asarray(delays, dtype=float)
    if delays.shape != (len(aperture),):
        raise InvalidArgumentError(f"expected {len(aperture)} delays, got {delays.shape}")
    if not np.all(np.isfinite(delays)):
        raise InvalidArgumentError("delays must be finite")
    if spec.freqs.shape != wb.freqs.shape or not np.allclose(spec.freqs, wb.freqs, rtol=1e-12, atol=0):
        raise InvalidArgumentError("pulse spectrum is not sampled on the map frequencies")
    kept = np.nonzero(spec.kept)[0]
    if kept.size == 0:
        raise EmptyBandError("band mask keeps no bins")
    a = _weights(apodization, len(aperture))
    f = wb.freqs[kept]
    quad = (wb.bin_weights()[kept] * wb.df) * np.abs(spec.values[kept]) ** 2
    phases = a[:, None] * np.exp(-2j * np.pi * np.outer(delays, f))
    views = [element_spectrum_view(wb, grid, n) for n in aperture.indices]
    full = kept.size == wb.freqs.size
    out = np.empty(grid.shape)

    def work(i0, i1):
        acc = np.zeros((i1 - i0, grid.nz, kept.size), dtype=complex)
        for v, ph in zip(views, phases):
            blk = v[i0:i1] if full else v[i0:i1][..., kept]
            acc += blk * ph
        out[i0:i1] = (acc.real ** 2 + acc.imag ** 2) @ quad

    step = 8
    blocks = [(i, min(i + step, grid.nx)) for i in range(0, grid.nx, step)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda b: work(*b), blocks))
    else:
        for b in blocks:
            work(*b)
    meta = {"delays": delays.tolist(), "elements": list(aperture.indices),
            "apodization": None if apodization is None else a.tolist()}
    return BeamPattern(out, grid, "energy", meta)


def narrowband_bp(nb: NarrowbandMap, delays, apodization=None) -> BeamPattern:
    """Power ``|sum_m a_m (H_m + H_{-m-1})(f0) exp(-2 pi i f0 D_m)|**2`` over pairs.

    ``delays`` has one entry per pair ``m = 0 .. len(delays) - 1``; fewer pairs
    than stored use the innermost ones.
    """
    delays = np.asarray(delays, dtype=float)
    if delays.ndim != 1 or not 1 <= delays.size <= nb.num_pairs:
        raise InvalidArgumentError(
            f"expected between 1 and {nb.num_pairs} pair delays, got shape {delays.shape}")
    a = _weights(apodization, delays.size)
    coef = a * np.exp(-2j * np.pi * nb.f0 * delays)
    s = nb.values[..., : delays.size] @ coef
    meta = {"delays": delays.tolist(), "f0": nb.f0,
            "apodization": None if apodization is None else a.tolist()}
    return BeamPattern(s.real ** 2 + s.imag ** 2, nb.grid, "power", meta)


def to_db(bp: BeamPattern, floor_db: float = 60.0) -> np.ndarray:
    """``10 log10(v / max)`` clamped below at ``-floor_db``."""
    norm = bp.normalized()
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(norm)
    return np.maximum(db, -float(floor_db))
