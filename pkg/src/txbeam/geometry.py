"""Linear-array probe, element sub-discretization and the xz field grid.

All lengths are in metres, times in seconds, frequencies in Hz.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class Medium:
    """Homogeneous propagation medium.

    Parameters
    ----------
    speed_of_sound : float
        Speed of sound in m/s.
    attenuation_coeff : float
        Frequency-linear amplitude attenuation in dB/(MHz cm). Zero is lossless.
    """

    speed_of_sound: float = 1540.0
    attenuation_coeff: float = 0.0

    def __post_init__(self) -> None:
        if not self.speed_of_sound > 0:
            raise InvalidArgumentError("speed_of_sound must be positive")
        if not self.attenuation_coeff >= 0:
            raise InvalidArgumentError("attenuation_coeff must be non-negative")


@dataclass(frozen=True)
class Probe:
    """Linear array of ``2 * num_element_pairs`` identical rectangular elements.

    Element ``n`` (``-N <= n <= N-1``) is centred at ``((n + 1/2) * pitch, 0, 0)``.
    The element width is derived as ``pitch - kerf``.
    """

    num_element_pairs: int
    pitch: float
    kerf: float
    element_height: float
    geometric_focus_depth: float
    f_min: float
    f_max: float
    sub_nx: int = 4
    sub_ny: int = 16

    def __post_init__(self) -> None:
        if int(self.num_element_pairs) != self.num_element_pairs or self.num_element_pairs < 1:
            raise InvalidArgumentError("num_element_pairs must be a positive integer")
        if not self.pitch > 0:
            raise InvalidArgumentError("pitch must be positive")
        if not 0 <= self.kerf < self.pitch:
            raise InvalidArgumentError("kerf must satisfy 0 <= kerf < pitch")
        if not self.element_height > 0:
            raise InvalidArgumentError("element_height must be positive")
        if not self.geometric_focus_depth > 0:
            raise InvalidArgumentError("geometric_focus_depth must be positive")
        if not 0 < self.f_min < self.f_max:
            raise InvalidArgumentError("band must satisfy 0 < f_min < f_max")
        for name in ("sub_nx", "sub_ny"):
            v = getattr(self, name)
            if int(v) != v or v < 2 or v % 2:
                raise InvalidArgumentError(f"{name} must be an even integer >= 2")

    @property
    def element_width(self) -> float:
        return self.pitch - self.kerf

    @property
    def num_elements(self) -> int:
        return 2 * self.num_element_pairs

    @property
    def band(self) -> tuple[float, float]:
        return (self.f_min, self.f_max)

    def element_indices(self) -> range:
        return range(-self.num_element_pairs, self.num_element_pairs)


def element_center(probe: Probe, n: int) -> tuple[float, float, float]:
    """Centre of element ``n`` as an ``(x, y, z)`` tuple."""
    N = probe.num_element_pairs
    if int(n) != n or not -N <= n <= N - 1:
        raise InvalidArgumentError(f"element index {n} outside [{-N}, {N - 1}]")
    return ((n + 0.5) * probe.pitch, 0.0, 0.0)


@dataclass(frozen=True)
class ElementSubgrid:
    """Point sources discretizing one element, relative to its centre.

    Index ``j = l1 + sub_nx * l2`` with ``l1`` running along x.
    """

    x: np.ndarray
    y: np.ndarray
    lens_delay: np.ndarray
    cell_area: float

    def __len__(self) -> int:
        return self.x.size


def element_subgrid(probe: Probe, medium: Medium) -> ElementSubgrid:
    """Cell-centred ``sub_nx x sub_ny`` sampling of the element surface.

    The acoustic lens is modelled as the per-point delay
    ``sqrt(y**2 + z_g**2) / c``, independent of the azimuth offset.
    """
    nx, ny = probe.sub_nx, probe.sub_ny
    w, h = probe.element_width, probe.element_height
    # half-integer offsets are exact, so the layout mirrors bitwise
    xs = (np.arange(nx) + 0.5 - nx / 2) * (w / nx)
    ys = (np.arange(ny) + 0.5 - ny / 2) * (h / ny)
    # l1 fastest
    x = np.tile(xs, ny)
    y = np.repeat(ys, nx)
    zg = probe.geometric_focus_depth
    lens = np.sqrt(y * y + zg * zg) / medium.speed_of_sound
    for a in (x, y, lens):
        a.setflags(write=False)
    return ElementSubgrid(x=x, y=y, lens_delay=lens, cell_area=w * h / (nx * ny))


@dataclass(frozen=True)
class FieldGrid:
    """Rectangular sampling of the xz plane (y = 0).

    Column ``i`` sits at ``x = (u_lo + i) * pitch / L`` and row ``v`` at
    ``z = z_min + v * dz``. Flattened point index is ``i * nz + v``.
    """

    pitch: float
    L: int
    u_lo: int
    nx: int
    z_min: float
    dz: float
    nz: int

    def __post_init__(self) -> None:
        if self.L < 1 or self.nx < 1 or self.nz < 1:
            raise InvalidArgumentError("grid dimensions must be positive")
        if not self.z_min > 0:
            raise InvalidArgumentError("field must lie at z > 0")
        if not self.dz > 0:
            raise InvalidArgumentError("dz must be positive")

    @property
    def u_hi(self) -> int:
        return self.u_lo + self.nx - 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.nz)

    @property
    def num_points(self) -> int:
        return self.nx * self.nz

    @cached_property
    def u(self) -> np.ndarray:
        return np.arange(self.u_lo, self.u_lo + self.nx)

    @cached_property
    def x(self) -> np.ndarray:
        return self.u * self.pitch / self.L

    @cached_property
    def z(self) -> np.ndarray:
        return self.z_min + np.arange(self.nz) * self.dz

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened ``(x, z)`` coordinates in point-index order."""
        xx, zz = np.meshgrid(self.x, self.z, indexing="ij")
        return xx.ravel(), zz.ravel()

    def columns(self, u_lo: int, u_hi: int) -> "FieldGrid":
        """Same depths and spacing over columns ``u_lo..u_hi`` inclusive."""
        return FieldGrid(self.pitch, self.L, u_lo, u_hi - u_lo + 1, self.z_min, self.dz, self.nz)

    def extended_for(self, elements) -> "FieldGrid":
        """Columns needed by the reference element to serve ``elements`` by translation."""
        elements = list(elements)
        if not elements:
            raise InvalidArgumentError("empty element set")
        lo = self.u_lo - max(elements) * self.L
        hi = self.u_hi - min(elements) * self.L
        return self.columns(min(lo, self.u_lo), max(hi, self.u_hi))

    def mirror_columns(self) -> tuple[np.ndarray, np.ndarray]:
        """Column index pairs ``(i, i')`` with ``x[i'] == -x[i]`` (i <= i')."""
        u = self.u
        keep = (-u >= self.u_lo) & (-u <= self.u_hi) & (u <= 0)
        i = np.nonzero(keep)[0]
        return i, -u[i] - self.u_lo

    def same_sampling(self, other: "FieldGrid") -> bool:
        return (self.pitch, self.L, self.z_min, self.dz, self.nz) == (
            other.pitch, other.L, other.z_min, other.dz, other.nz)


def build_field_grid(
    probe: Probe,
    L: int,
    dz: float,
    z_min: float,
    z_max: float,
    half_width_elements: int | None = None,
) -> FieldGrid:
    """Grid with x step ``pitch / L`` over ``u = -L*N .. L*(N-1)`` and z from ``z_min``.

    ``N`` defaults to the probe's ``num_element_pairs``; ``half_width_elements``
    narrows the lateral field of view to ``2 * half_width_elements`` elements.
    The last depth is the largest ``z_min + v*dz`` not exceeding ``z_max``
    (up to a 1e-9 relative slack for decimal steps).
    """
    if int(L) != L or L < 1:
        raise InvalidArgumentError("L must be a positive integer")
    if not dz > 0:
        raise InvalidArgumentError("dz must be positive")
    if not 0 < z_min <= z_max:
        raise InvalidArgumentError("z range must satisfy 0 < z_min <= z_max")
    N = probe.num_element_pairs if half_width_elements is None else int(half_width_elements)
    if N < 1:
        raise InvalidArgumentError("half_width_elements must be positive")
    nz_steps = int(np.floor((z_max - z_min) / dz * (1 + 1e-9) + 1e-9))
    return FieldGrid(probe.pitch, int(L), -int(L) * N, 2 * int(L) * N, float(z_min), float(dz), nz_steps + 1)
