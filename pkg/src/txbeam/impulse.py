"""Band-limited spatial impulse responses of one element over a field grid.

Each element is a set of point sources. A source at distance ``d`` emits a
band-limited Dirac ``sinc(fs (t - tau)) cos(phi) / d`` arriving at
``tau = d / c - lens_delay``; the response at a field point is the
area-weighted sum over sources, ``cell_area / (2 pi) * sum_j w_j(t)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from .errors import CoverageError, InvalidArgumentError, SingularGeometryError
from .geometry import ElementSubgrid, FieldGrid, Medium, Probe, element_center, element_subgrid

#: sinc truncation half-width, in samples
DEFAULT_TRUNCATION = 32
#: sources closer than this to a field point are rejected
MIN_DISTANCE = 1e-6
#: points per work item; fixed so results never depend on the worker count
CHUNK_POINTS = 1024

_OK, _SINGULAR, _UNCOVERED = 0, 1, 2


@dataclass(frozen=True)
class TimeAxis:
    """Uniform sampling ``t_n = t_start + n * dt`` for ``n < num_samples``."""

    dt: float
    num_samples: int
    t_start: float = 0.0

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise InvalidArgumentError("dt must be positive")
        if int(self.num_samples) != self.num_samples or self.num_samples < 1:
            raise InvalidArgumentError("num_samples must be a positive integer")

    @property
    def fs(self) -> float:
        return 1.0 / self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t_start + np.arange(self.num_samples) * self.dt

    def check_band(self, f_max: float) -> None:
        if not self.fs > 2 * f_max:
            raise InvalidArgumentError(
                f"sampling frequency {self.fs:g} Hz must exceed twice the band maximum {f_max:g} Hz"
            )


@dataclass
class ImpulseMap:
    """Impulse responses of one element, one row per field point.

    Row ``p`` is sampled at ``row_start[p] + n * dt``. With a global axis all
    row starts coincide; with local windows each row starts near its own
    earliest arrival, on the same sampling lattice.
    """

    values: np.ndarray
    row_start: np.ndarray
    dt: float
    grid: FieldGrid
    element: int = 0

    @property
    def num_samples(self) -> int:
        return self.values.shape[1]


def source_wave(t, d_j, phi_j, f_s, tof_shift, c=1540.0):
    """Band-limited point-source wave ``sinc(fs (t - (d/c - tof_shift))) cos(phi) / d``."""
    d_j = np.asarray(d_j, dtype=float)
    if np.any(d_j <= 0):
        raise SingularGeometryError("source distance must be positive")
    return np.sinc(f_s * (np.asarray(t) - (d_j / c - tof_shift))) * np.cos(phi_j) / d_j


@numba.njit(nogil=True, cache=True)
def _impulse_kernel(px, pz, cx, sx, sy, lens, c, fs, t_start, num_samples, K, local, scale,
                    out, row_start, status):
    J = sx.size
    tau = np.empty(J)
    amp = np.empty(J)
    for p in range(px.size):
        status[p] = 0
        zz = pz[p] * pz[p]
        tmin = np.inf
        tmax = -np.inf
        for j in range(J):
            dx = px[p] - cx - sx[j]
            d = math.sqrt(dx * dx + sy[j] * sy[j] + zz)
            if d < 1e-6:
                status[p] = 1
                break
            tau[j] = d / c - lens[j]
            # cos(phi) / d with cos(phi) = z / d
            amp[j] = pz[p] / (d * d)
            tmin = min(tmin, tau[j])
            tmax = max(tmax, tau[j])
        if status[p] != 0:
            continue
        t0 = t_start
        if local:
            t0 = t_start + (np.rint((tmin - t_start) * fs) - K) * (1.0 / fs)
        if np.rint((tmin - t0) * fs) - K < 0 or np.rint((tmax - t0) * fs) + K > num_samples - 1:
            status[p] = 2
            continue
        row_start[p] = t0
        row = out[p]
        for n in range(num_samples):
            row[n] = 0.0
        for j in range(J):
            u = (tau[j] - t0) * fs
            k = np.rint(u)
            r = k - u
            sr = math.sin(math.pi * r)
            k0 = int(k)
            sign = 1.0 if K % 2 == 0 else -1.0
            for s in range(-K, K + 1):
                x = r + s
                if x == 0.0:
                    v = 1.0
                else:
                    # sin(pi (r + s)) = (-1)^s sin(pi r)
                    v = sign * sr / (math.pi * x)
                row[k0 + s] += amp[j] * v
                sign = -sign
        for n in range(num_samples):
            row[n] *= scale


def _run_kernel(px, pz, center_x, subgrid, medium, axis, truncation, local, threads):
    P = px.size
    out = np.zeros((P, axis.num_samples))
    row_start = np.full(P, axis.t_start)
    status = np.zeros(P, dtype=np.int8)
    scale = subgrid.cell_area / (2.0 * math.pi)
    args = (subgrid.x, subgrid.y, subgrid.lens_delay, float(medium.speed_of_sound), axis.fs,
            float(axis.t_start), int(axis.num_samples), int(truncation), bool(local), scale)

    def work(lo):
        hi = min(lo + CHUNK_POINTS, P)
        _impulse_kernel(px[lo:hi], pz[lo:hi], center_x, *args, out[lo:hi], row_start[lo:hi], status[lo:hi])

    starts = range(0, P, CHUNK_POINTS)
    if threads > 1 and P > CHUNK_POINTS:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, starts))
    else:
        for lo in starts:
            work(lo)

    bad = np.nonzero(status)[0]
    if bad.size:
        p = int(bad[0])
        if status[p] == _SINGULAR:
            raise SingularGeometryError(
                f"field point {p} at (x={px[p]:g}, z={pz[p]:g}) lies on the element surface")
        raise CoverageError(
            f"time window misses the arrivals of field point {p} at (x={px[p]:g}, z={pz[p]:g}) "
            f"(+-{truncation} sinc samples)")
    return out, row_start


def impulse_response_point(r, subgrid: ElementSubgrid, center, medium: Medium, axis: TimeAxis,
                           truncation: int = DEFAULT_TRUNCATION) -> np.ndarray:
    """Impulse response at ``r = (x, y, z)`` (``y`` must be 0) on ``axis``."""
    x, y, z = (float(v) for v in r)
    if y != 0.0 or center[1] != 0.0 or center[2] != 0.0:
        raise InvalidArgumentError("field points and element centres must lie in the y = 0, z = 0 frame")
    if not z > 0:
        raise InvalidArgumentError("field point must satisfy z > 0")
    out, _ = _run_kernel(np.array([x]), np.array([z]), float(center[0]), subgrid, medium, axis,
                         truncation, False, 1)
    return out[0]


def arrival_range(grid: FieldGrid, probe: Probe, medium: Medium, element: int = 0):
    """Earliest and latest lens-shifted arrival over all grid points and sources."""
    sub = element_subgrid(probe, medium)
    cx = element_center(probe, element)[0]
    x, z = grid.points()
    lo, hi = np.inf, -np.inf
    # per-column extreme distances are attained at the first/last depth or the sub-point nearest in x
    for j in range(len(sub)):
        d = np.sqrt((x - cx - sub.x[j]) ** 2 + sub.y[j] ** 2 + z ** 2)
        t = d / medium.speed_of_sound - sub.lens_delay[j]
        lo, hi = min(lo, t.min()), max(hi, t.max())
    return lo, hi


def covering_axis(grid: FieldGrid, probe: Probe, medium: Medium, dt: float,
                  truncation: int = DEFAULT_TRUNCATION, num_samples: int | None = None,
                  element: int = 0) -> TimeAxis:
    """Global axis containing every arrival of ``grid`` plus the sinc margin.

    ``t_start`` is a multiple of ``dt``; ``num_samples`` defaults to the next
    power of two.
    """
    lo, hi = arrival_range(grid, probe, medium, element)
    k0 = int(np.floor(lo / dt)) - truncation - 1
    need = int(np.ceil(hi / dt)) + truncation + 2 - k0
    if num_samples is None:
        num_samples = 1 << max(need - 1, 1).bit_length()
    elif num_samples < need:
        raise CoverageError(f"{num_samples} samples cannot cover the {need} needed by the grid")
    return TimeAxis(dt, int(num_samples), k0 * dt)


def compute_impulse_map(grid: FieldGrid, probe: Probe, medium: Medium, axis: TimeAxis, *,
                        element: int = 0, truncation: int = DEFAULT_TRUNCATION,
                        local_windows: bool = False, threads: int = 1) -> ImpulseMap:
    """Impulse responses of ``element`` (default: the reference element 0) at every grid point.

    With ``local_windows`` each row gets its own ``axis.num_samples`` window,
    starting ``truncation`` samples before the point's earliest arrival;
    otherwise all rows share ``axis``. Output is bitwise independent of
    ``threads``.
    """
    axis.check_band(probe.f_max)
    subgrid = element_subgrid(probe, medium)
    cx = element_center(probe, element)[0]
    px, pz = grid.points()
    values, starts = _run_kernel(px, pz, cx, subgrid, medium, axis, truncation, local_windows, threads)
    return ImpulseMap(values=values, row_start=starts, dt=axis.dt, grid=grid, element=element)
