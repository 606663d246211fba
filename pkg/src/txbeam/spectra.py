"""Frequency-domain maps: reference-element spectra, translation views, symmetric pair sums.

Spectra are phase-referenced to absolute time zero,
``H(f) = sum_n h(t_n) exp(-2 pi i f t_n) dt``, so rows with different time
origins and different elements combine without hidden offsets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, IncompatibleMapError, InvalidArgumentError, MapIOError
from .geometry import FieldGrid, Medium, Probe, element_center
from .impulse import DEFAULT_TRUNCATION, ImpulseMap, TimeAxis, compute_impulse_map

#: columns of the field grid processed per streaming block
_BLOCK_COLUMNS = 16


@dataclass
class WidebandMap:
    """Spectra of the reference element at the stored frequencies.

    ``values`` has shape ``(nx, nz, len(freqs))`` over ``grid``. ``n_fft`` and
    ``dt`` define the bin spacing ``df = 1 / (n_fft * dt)``; a map evaluated at
    off-bin frequencies (single-frequency maps) still records them.
    """

    values: np.ndarray
    freqs: np.ndarray
    grid: FieldGrid
    dt: float
    n_fft: int
    element: int = 0
    alpha0: float = 0.0

    @property
    def df(self) -> float:
        return 1.0 / (self.n_fft * self.dt)

    def bin_weights(self) -> np.ndarray:
        """One-sided energy weights: 1 at DC and Nyquist, 2 elsewhere."""
        k = np.rint(self.freqs / self.df)
        edge = (k == 0) | (k == self.n_fft / 2)
        return np.where(edge, 1.0, 2.0)

    def freq_index(self, f: float) -> int:
        i = int(np.argmin(np.abs(self.freqs - f)))
        if abs(self.freqs[i] - f) > 1e-9 * max(abs(f), 1.0):
            raise InvalidArgumentError(f"frequency {f:g} Hz is not stored in the map")
        return i


@dataclass
class NarrowbandMap:
    """Per-pair sums ``H_m(f0) + H_{-m-1}(f0)``, shape ``(nx, nz, num_pairs)``."""

    values: np.ndarray
    f0: float
    grid: FieldGrid
    alpha0: float = 0.0

    @property
    def num_pairs(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class AttenuationModel:
    """Frequency-linear amplitude law ``10 ** (-alpha0 * f[MHz] * d[cm] / 20)``."""

    alpha0: float = 0.0

    def __post_init__(self) -> None:
        if not self.alpha0 >= 0:
            raise InvalidArgumentError("alpha0 must be non-negative")

    def factor(self, freqs, distances) -> np.ndarray:
        """Broadcast ``distances[..., None]`` against ``freqs``."""
        f_mhz = np.asarray(freqs, dtype=float) * 1e-6
        d_cm = np.asarray(distances, dtype=float)[..., None] * 100.0
        return 10.0 ** (-self.alpha0 * f_mhz * d_cm / 20.0)


def _row_phase(freqs, row_start, dt):
    return dt * np.exp(-2j * np.pi * np.outer(row_start, freqs))


def map_to_spectrum(imap: ImpulseMap, n_fft: int | None = None) -> WidebandMap:
    """One-sided spectra of every row, bins ``k = 0 .. n_fft/2``.

    ``n_fft`` defaults to the row length; longer transforms zero-pad.
    """
    n_fft = imap.num_samples if n_fft is None else int(n_fft)
    if n_fft % 2 or n_fft < imap.num_samples:
        raise InvalidArgumentError("n_fft must be even and at least the row length")
    freqs = np.fft.rfftfreq(n_fft, imap.dt)
    spec = np.fft.rfft(imap.values, n=n_fft, axis=1) * _row_phase(freqs, imap.row_start, imap.dt)
    g = imap.grid
    return WidebandMap(spec.reshape(g.nx, g.nz, freqs.size), freqs, g, imap.dt, n_fft, imap.element)


def single_frequency_spectrum(imap: ImpulseMap, freqs) -> np.ndarray:
    """Direct DFT of every row at arbitrary ``freqs``; shape ``(P, len(freqs))``."""
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    n = np.arange(imap.num_samples)
    kernel = np.exp(-2j * np.pi * np.outer(n * imap.dt, freqs))
    return (imap.values @ kernel) * _row_phase(freqs, imap.row_start, imap.dt)


def restrict_band(wb: WidebandMap, f_lo: float, f_hi: float) -> WidebandMap:
    keep = (wb.freqs >= f_lo) & (wb.freqs <= f_hi)
    return WidebandMap(wb.values[..., keep], wb.freqs[keep], wb.grid, wb.dt, wb.n_fft, wb.element, wb.alpha0)


def reference_distances(grid: FieldGrid, probe: Probe, element: int = 0) -> np.ndarray:
    """Distance from the element centre to every grid point, shape ``(nx, nz)``."""
    cx = element_center(probe, element)[0]
    return np.hypot(grid.x[:, None] - cx, grid.z[None, :])


def apply_attenuation(m, model: AttenuationModel, distances):
    """Attenuate a map in place-free fashion; ``alpha0 == 0`` returns ``m`` itself.

    For a :class:`WidebandMap` ``distances`` has the grid shape. For a
    :class:`NarrowbandMap` it must broadcast against ``(nx, nz, num_pairs)``.
    """
    if model.alpha0 == 0:
        return m
    distances = np.asarray(distances, dtype=float)
    if np.any(distances <= 0):
        raise InvalidArgumentError("distances must be positive")
    if isinstance(m, WidebandMap):
        vals = m.values * model.factor(m.freqs, distances)
        return WidebandMap(vals, m.freqs, m.grid, m.dt, m.n_fft, m.element, m.alpha0 + model.alpha0)
    if isinstance(m, NarrowbandMap):
        fac = 10.0 ** (-model.alpha0 * m.f0 * 1e-6 * distances * 100.0 / 20.0)
        return NarrowbandMap(m.values * fac, m.f0, m.grid, m.alpha0 + model.alpha0)
    raise InvalidArgumentError(f"cannot attenuate {type(m).__name__}")


def compute_reference_map(grid: FieldGrid, probe: Probe, medium: Medium, axis: TimeAxis, *,
                          n_fft: int | None = None, band: tuple[float, float] | None = None,
                          freqs=None, truncation: int = DEFAULT_TRUNCATION,
                          threads: int = 1) -> WidebandMap:
    """Reference-element spectra over ``grid`` without holding all time rows.

    Rows are built on local windows of ``axis.num_samples`` samples, block by
    block. Either the FFT bins within ``band`` (default: the probe band) are
    kept, or, when ``freqs`` is given, a direct DFT at exactly those
    frequencies is taken. Attenuation from ``medium`` is applied with
    distances from the reference element centre.
    """
    n_fft = axis.num_samples if n_fft is None else int(n_fft)
    if freqs is None:
        lo, hi = probe.band if band is None else band
        all_f = np.fft.rfftfreq(n_fft, axis.dt)
        keep = np.nonzero((all_f >= lo) & (all_f <= hi))[0]
        out_f = all_f[keep]
    else:
        out_f = np.atleast_1d(np.asarray(freqs, dtype=float))
    values = np.empty((grid.nx, grid.nz, out_f.size), dtype=complex)
    for i0 in range(0, grid.nx, _BLOCK_COLUMNS):
        i1 = min(i0 + _BLOCK_COLUMNS, grid.nx)
        sub = grid.columns(grid.u_lo + i0, grid.u_lo + i1 - 1)
        imap = compute_impulse_map(sub, probe, medium, axis, truncation=truncation,
                                   local_windows=True, threads=threads)
        if freqs is None:
            spec = np.fft.rfft(imap.values, n=n_fft, axis=1)[:, keep]
            spec *= _row_phase(out_f, imap.row_start, imap.dt)
        else:
            spec = single_frequency_spectrum(imap, out_f)
        values[i0:i1] = spec.reshape(i1 - i0, grid.nz, out_f.size)
    wb = WidebandMap(values, out_f, grid, axis.dt, n_fft, 0)
    if medium.attenuation_coeff > 0:
        model = AttenuationModel(medium.attenuation_coeff)
        wb = apply_attenuation(wb, model, reference_distances(grid, probe))
    return wb


def element_spectrum_view(wb: WidebandMap, grid: FieldGrid, n: int) -> np.ndarray:
    """Spectra of element ``n`` over ``grid``, as a view into the reference map.

    Element ``n`` at column ``u`` equals the reference element at ``u - n*L``.
    """
    if not grid.same_sampling(wb.grid):
        raise InvalidArgumentError("grid sampling differs from the stored map")
    lo = grid.u_lo - n * grid.L - wb.grid.u_lo
    if lo < 0 or lo + grid.nx > wb.grid.nx:
        raise CoverageError(
            f"element {n} needs stored columns {grid.u_lo - n * grid.L}..{grid.u_hi - n * grid.L}, "
            f"map holds {wb.grid.u_lo}..{wb.grid.u_hi}")
    return wb.values[lo:lo + grid.nx]


def build_narrowband_map(ref: WidebandMap, grid: FieldGrid, f0: float, max_pair: int,
                         band: tuple[float, float] | None = None) -> NarrowbandMap:
    """Pair sums for ``m = 0 .. max_pair`` at ``f0`` taken from a reference map holding ``f0``."""
    if band is not None and not band[0] <= f0 <= band[1]:
        raise InvalidArgumentError(f"f0 = {f0:g} Hz outside the probe band {band}")
    if max_pair < 0:
        raise InvalidArgumentError("max_pair must be non-negative")
    k = ref.freq_index(f0)
    out = np.empty((grid.nx, grid.nz, max_pair + 1), dtype=complex)
    for m in range(max_pair + 1):
        out[..., m] = element_spectrum_view(ref, grid, m)[..., k] + element_spectrum_view(ref, grid, -m - 1)[..., k]
    return NarrowbandMap(out, float(f0), grid, ref.alpha0)


def compute_narrowband_map(grid: FieldGrid, probe: Probe, medium: Medium, axis: TimeAxis, f0: float,
                           max_pair: int, *, truncation: int = DEFAULT_TRUNCATION,
                           threads: int = 1) -> NarrowbandMap:
    """Single-frequency reference spectrum over the extended grid, then pair sums."""
    if 2 * (max_pair + 1) > probe.num_elements:
        raise InvalidArgumentError(f"{2 * (max_pair + 1)} active elements exceed the probe")
    if not probe.f_min <= f0 <= probe.f_max:
        raise InvalidArgumentError(f"f0 = {f0:g} Hz outside the probe band {probe.band}")
    ext = grid.extended_for(range(-max_pair - 1, max_pair + 1))
    ref = compute_reference_map(ext, probe, medium, axis, freqs=[f0], truncation=truncation, threads=threads)
    return build_narrowband_map(ref, grid, f0, max_pair, probe.band)


def save_map(path, m, probe: Probe, medium: Medium, *, dt: float = 0.0, window: int = 0,
             truncation: int = DEFAULT_TRUNCATION, metadata: dict | None = None) -> None:
    """Write a wideband or narrowband map with its full parameter header.

    ``dt`` (narrowband maps only) and ``window``, the per-row time window used
    to build the map, are recorded for compatibility checks.
    """
    from . import fileformat as ff

    if isinstance(m, WidebandMap):
        h = ff.Header.describe(ff.KIND_WIDEBAND, probe, medium, m.grid, dt=m.dt, n_fft=m.n_fft,
                               num_samples=window, truncation=truncation)
        h.attenuation_coeff = m.alpha0
        ff.write(path, h, m.values, freqs=m.freqs, metadata=metadata)
    elif isinstance(m, NarrowbandMap):
        h = ff.Header.describe(ff.KIND_NARROWBAND, probe, medium, m.grid, f0=m.f0, dt=dt,
                               num_samples=window, truncation=truncation)
        h.attenuation_coeff = m.alpha0
        ff.write(path, h, m.values, metadata=metadata)
    else:
        raise InvalidArgumentError(f"cannot save {type(m).__name__}")


def load_map(path, expect=None, mmap: bool = False):
    """Read a map; ``expect`` (a :class:`~txbeam.fileformat.Header`) guards against reuse
    with a different configuration. Returns ``(map, header, metadata)``.
    """
    from . import fileformat as ff

    header, arr, freqs, meta = ff.read(path, mmap=mmap)
    if expect is not None:
        ff.check_compatible(header, expect, path=path)
    grid = header.grid()
    if header.kind == ff.KIND_WIDEBAND:
        m = WidebandMap(arr, freqs, grid, header.dt, header.n_fft, 0, header.attenuation_coeff)
    elif header.kind == ff.KIND_NARROWBAND:
        m = NarrowbandMap(arr, header.f0, grid, header.attenuation_coeff)
    else:
        raise IncompatibleMapError(f"{path}: not a map file", ["kind"])
    if arr.shape[:2] != grid.shape:
        raise MapIOError(f"{path}: payload shape {arr.shape} disagrees with the grid {grid.shape}")
    return m, header, meta
