"""Versioned little-endian binary container for maps and derived grids.

Layout::

    magic "PUST" | u32 version | u32 kind | u32 dtype
    fixed parameter block (probe, medium, grid, time axis, map), f64/u64/i64
    u64 ndim | 4 x u64 dims
    u64 metadata length | UTF-8 JSON metadata (resolved configuration, provenance)
    f64[num_freqs] stored frequencies (wideband maps only)
    payload, row-major; complex values as (f64 re, f64 im) pairs

Points are x-major, z-minor; the trailing axis is frequency (wideband),
pair index (narrowband) or absent (beam patterns).
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .errors import IncompatibleMapError, InvalidArgumentError, MapIOError
from .geometry import FieldGrid, Medium, Probe

MAGIC = b"PUST"
VERSION = 1

KIND_WIDEBAND = 1
KIND_NARROWBAND = 2
KIND_BEAM = 3
KIND_MATRIX = 4
_KIND_NAMES = {KIND_WIDEBAND: "wideband map", KIND_NARROWBAND: "narrowband map",
               KIND_BEAM: "beam pattern", KIND_MATRIX: "matrix"}

_DTYPE_REAL, _DTYPE_COMPLEX = 1, 2

_PREFIX = struct.Struct("<4sIII")
# probe | medium | grid | axis | map
_PARAMS = struct.Struct("<QddddQQdd" "dd" "QqQddQ" "dQQQ" "dQ")
_SHAPE = struct.Struct("<Q4Q")
_LEN = struct.Struct("<Q")


@dataclass
class Header:
    kind: int
    num_element_pairs: int = 0
    pitch: float = 0.0
    kerf: float = 0.0
    element_height: float = 0.0
    geometric_focus_depth: float = 0.0
    sub_nx: int = 0
    sub_ny: int = 0
    f_min: float = 0.0
    f_max: float = 0.0
    speed_of_sound: float = 0.0
    attenuation_coeff: float = 0.0
    L: int = 0
    u_lo: int = 0
    nx: int = 0
    z_min: float = 0.0
    dz: float = 0.0
    nz: int = 0
    dt: float = 0.0
    num_samples: int = 0
    n_fft: int = 0
    truncation: int = 0
    f0: float = 0.0
    num_freqs: int = 0
    version: int = VERSION

    _PARAM_FIELDS = ("num_element_pairs", "pitch", "kerf", "element_height", "geometric_focus_depth",
                     "sub_nx", "sub_ny", "f_min", "f_max", "speed_of_sound", "attenuation_coeff",
                     "L", "u_lo", "nx", "z_min", "dz", "nz", "dt", "num_samples", "n_fft",
                     "truncation", "f0", "num_freqs")

    @classmethod
    def describe(cls, kind, probe: Probe | None = None, medium: Medium | None = None,
                 grid: FieldGrid | None = None, **extra) -> "Header":
        h = cls(kind=kind)
        if probe is not None:
            for k in ("num_element_pairs", "pitch", "kerf", "element_height", "geometric_focus_depth",
                      "sub_nx", "sub_ny", "f_min", "f_max"):
                setattr(h, k, getattr(probe, k))
        if medium is not None:
            h.speed_of_sound = medium.speed_of_sound
            h.attenuation_coeff = medium.attenuation_coeff
        if grid is not None:
            for k in ("L", "u_lo", "nx", "z_min", "dz", "nz"):
                setattr(h, k, getattr(grid, k))
        for k, v in extra.items():
            if not hasattr(h, k):
                raise InvalidArgumentError(f"unknown header field {k}")
            setattr(h, k, v)
        return h

    def probe(self) -> Probe:
        return Probe(self.num_element_pairs, self.pitch, self.kerf, self.element_height,
                     self.geometric_focus_depth, self.f_min, self.f_max, self.sub_nx, self.sub_ny)

    def medium(self) -> Medium:
        return Medium(self.speed_of_sound, self.attenuation_coeff)

    def grid(self) -> FieldGrid:
        return FieldGrid(self.pitch, self.L, self.u_lo, self.nx, self.z_min, self.dz, self.nz)

    def params(self) -> dict:
        return {k: getattr(self, k) for k in self._PARAM_FIELDS}


def mismatched_fields(header: Header, expected: Header, names=None) -> list[str]:
    """Names of parameter fields that differ (floats compared to 1e-12 relative)."""
    out = []
    for k in names or Header._PARAM_FIELDS:
        a, b = getattr(header, k), getattr(expected, k)
        if isinstance(a, float) or isinstance(b, float):
            if not np.isclose(a, b, rtol=1e-12, atol=0):
                out.append(k)
        elif a != b:
            out.append(k)
    return out


def check_compatible(header: Header, expected: Header, names=None, path="") -> None:
    if header.kind != expected.kind:
        raise IncompatibleMapError(
            f"{path}: holds a {_KIND_NAMES.get(header.kind, header.kind)}, "
            f"expected a {_KIND_NAMES[expected.kind]}", ["kind"])
    bad = mismatched_fields(header, expected, names)
    if bad:
        detail = ", ".join(f"{k} (file {getattr(header, k)!r}, config {getattr(expected, k)!r})" for k in bad)
        raise IncompatibleMapError(f"{path}: header mismatch: {detail}", bad)


def write(path, header: Header, array: np.ndarray, freqs=None, metadata: dict | None = None) -> None:
    array = np.ascontiguousarray(array)
    if array.ndim > 4:
        raise InvalidArgumentError("at most 4 array dimensions")
    is_complex = np.iscomplexobj(array)
    payload = array.astype("<c16" if is_complex else "<f8", copy=False)
    if freqs is not None:
        freqs = np.ascontiguousarray(freqs, dtype="<f8")
        header.num_freqs = freqs.size
    dims = list(array.shape) + [0] * (4 - array.ndim)
    meta = json.dumps(metadata or {}, sort_keys=True, default=_json_default).encode()
    params = [getattr(header, k) for k in Header._PARAM_FIELDS]
    tmp = f"{os.fspath(path)}.tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(_PREFIX.pack(MAGIC, VERSION, header.kind, _DTYPE_COMPLEX if is_complex else _DTYPE_REAL))
            fh.write(_PARAMS.pack(*params))
            fh.write(_SHAPE.pack(array.ndim, *dims))
            fh.write(_LEN.pack(len(meta)))
            fh.write(meta)
            if freqs is not None:
                fh.write(freqs.tobytes())
            fh.write(payload.tobytes())
        os.replace(tmp, path)
    except OSError as exc:
        raise MapIOError(f"cannot write {path}: {exc}") from exc


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _take(buf, offset, size, path, what):
    if offset + size > len(buf):
        raise MapIOError(f"{path}: truncated file while reading {what}")
    return buf[offset:offset + size], offset + size


def read(path, mmap: bool = False):
    """Return ``(header, array, freqs, metadata)``.

    With ``mmap`` the payload is a read-only memory map.
    """
    try:
        with open(path, "rb") as fh:
            head = fh.read(_PREFIX.size + _PARAMS.size + _SHAPE.size + _LEN.size)
            off = 0
            raw, off = _take(head, off, _PREFIX.size, path, "magic")
            magic, version, kind, dtype = _PREFIX.unpack(raw)
            if magic != MAGIC:
                raise MapIOError(f"{path}: not a txbeam binary file (bad magic)")
            if version != VERSION:
                raise IncompatibleMapError(f"{path}: format version {version}, reader supports {VERSION}",
                                           ["version"])
            raw, off = _take(head, off, _PARAMS.size, path, "header")
            header = Header(kind, **dict(zip(Header._PARAM_FIELDS, _PARAMS.unpack(raw))))
            raw, off = _take(head, off, _SHAPE.size, path, "shape")
            ndim, *dims = _SHAPE.unpack(raw)
            raw, off = _take(head, off, _LEN.size, path, "metadata length")
            (meta_len,) = _LEN.unpack(raw)
            rest = fh.read(meta_len + 8 * header.num_freqs)
            raw, roff = _take(rest, 0, meta_len, path, "metadata")
            try:
                metadata = json.loads(raw.decode()) if meta_len else {}
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise MapIOError(f"{path}: corrupt metadata: {exc}") from exc
            freqs = None
            if header.num_freqs:
                raw, roff = _take(rest, roff, 8 * header.num_freqs, path, "frequencies")
                freqs = np.frombuffer(raw, dtype="<f8").copy()
            shape = tuple(int(d) for d in dims[:ndim])
            dt = np.dtype("<c16" if dtype == _DTYPE_COMPLEX else "<f8")
            nbytes = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
            start = off + roff
            if mmap:
                if os.path.getsize(path) < start + nbytes:
                    raise MapIOError(f"{path}: truncated file while reading payload")
                array = np.memmap(path, dtype=dt, mode="r", offset=start, shape=shape)
            else:
                raw = fh.read(nbytes)
                if len(raw) < nbytes:
                    raise MapIOError(f"{path}: truncated file while reading payload")
                array = np.frombuffer(raw, dtype=dt).reshape(shape).copy()
    except FileNotFoundError as exc:
        raise MapIOError(f"{path}: no such file") from exc
    except (IsADirectoryError, PermissionError) as exc:
        raise MapIOError(f"{path}: {exc}") from exc
    return header, array, freqs, metadata


def read_header(path) -> Header:
    try:
        with open(path, "rb") as fh:
            head = fh.read(_PREFIX.size + _PARAMS.size)
    except OSError as exc:
        raise MapIOError(f"{path}: {exc}") from exc
    if len(head) < _PREFIX.size + _PARAMS.size:
        raise MapIOError(f"{path}: truncated file while reading header")
    magic, version, kind, _ = _PREFIX.unpack(head[:_PREFIX.size])
    if magic != MAGIC:
        raise MapIOError(f"{path}: not a txbeam binary file (bad magic)")
    if version != VERSION:
        raise IncompatibleMapError(f"{path}: format version {version}, reader supports {VERSION}", ["version"])
    return Header(kind, **dict(zip(Header._PARAM_FIELDS, _PARAMS.unpack(head[_PREFIX.size:]))))


def header_dict(h: Header) -> dict:
    d = asdict(h)
    d["kind"] = _KIND_NAMES.get(h.kind, h.kind)
    return d


def write_text_matrix(path, values: np.ndarray) -> None:
    """Plain-text matrix, one x column per line (rows = x, columns = z)."""
    try:
        np.savetxt(path, np.asarray(values, dtype=float), fmt="%.17g")
    except OSError as exc:
        raise MapIOError(f"cannot write {path}: {exc}") from exc


def read_text_matrix(path) -> np.ndarray:
    try:
        return np.loadtxt(path, ndmin=2)
    except OSError as exc:
        raise MapIOError(f"{path}: {exc}") from exc
    except ValueError as exc:
        raise MapIOError(f"{path}: not a numeric matrix: {exc}") from exc


def write_pgm(path, db: np.ndarray, floor_db: float) -> None:
    """8-bit binary graymap of a dB image; 0 dB is white, ``-floor_db`` black.

    Depth runs down the image, azimuth across.
    """
    img = np.clip((np.asarray(db) + floor_db) / floor_db, 0.0, 1.0)
    pix = np.rint(img.T * 255).astype(np.uint8)
    h, w = pix.shape
    try:
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write(pix.tobytes())
    except OSError as exc:
        raise MapIOError(f"cannot write {path}: {exc}") from exc


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != b"P5":
        raise MapIOError(f"{path}: not a binary graymap")
    w, h = int(tokens[1]), int(tokens[2])
    # exactly one whitespace byte separates the header from the pixels
    return np.frombuffer(data[pos + 1:pos + 1 + w * h], dtype=np.uint8).reshape(h, w)
