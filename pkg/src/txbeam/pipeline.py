"""Command orchestration shared by the HTTP service and the in-process CLI backend.

Each ``run_*`` function takes a resolved :class:`~txbeam.config.RunConfig`,
does its work against the map store and output directory named there, and
returns a JSON-ready summary. Files written here embed the resolved
configuration and contain no timestamps, so reruns reproduce them bytewise.
"""

from __future__ import annotations

import itertools
import logging
import os
import threading
import time
from pathlib import Path

import numpy as np

from . import fileformat as ff
from .analysis import pca_project, sample_torus
from .beam import Aperture, BeamPattern, focus_delays, narrowband_bp, to_db, wideband_bp
from .config import RunConfig
from .errors import ConfigError, InvalidArgumentError, MapIOError, TxBeamError
from .impulse import TimeAxis
from .metrics import ComparisonReport, compare
from .pulse import Pulse, load_pulse_file, pulse_spectrum, with_band
from .spectra import NarrowbandMap, compute_narrowband_map, compute_reference_map, load_map, save_map

log = logging.getLogger("txbeam")

MODES = ("wideband", "narrowband")


def _mhz(f: float) -> str:
    return f"{f / 1e6:g}"


def config_echo(cfg: RunConfig) -> dict:
    return cfg.model_dump(mode="json")


# map store


def wideband_map_path(cfg: RunConfig) -> Path:
    return Path(cfg.paths.map_store) / "wideband.pust"


def narrowband_map_path(cfg: RunConfig, f0: float) -> Path:
    return Path(cfg.paths.map_store) / f"narrowband_f{_mhz(f0)}MHz.pust"


def _axis(cfg: RunConfig) -> TimeAxis:
    return TimeAxis(cfg.time.dt, cfg.time.window)


def _stored_half(cfg: RunConfig) -> int:
    return cfg.transmit.stored_elements // 2


def _band_bins(cfg: RunConfig) -> int:
    f = np.fft.rfftfreq(cfg.time.num_samples, cfg.time.dt)
    return int(np.count_nonzero((f >= cfg.probe.f_min) & (f <= cfg.probe.f_max)))


def wideband_expected(cfg: RunConfig) -> ff.Header:
    h = _stored_half(cfg)
    grid = cfg.make_grid().extended_for(range(-h, h))
    return ff.Header.describe(ff.KIND_WIDEBAND, cfg.make_probe(), cfg.make_medium(), grid,
                              dt=cfg.time.dt, n_fft=cfg.time.num_samples, num_samples=cfg.time.window,
                              truncation=cfg.time.truncation, num_freqs=_band_bins(cfg))


def narrowband_expected(cfg: RunConfig, f0: float) -> ff.Header:
    return ff.Header.describe(ff.KIND_NARROWBAND, cfg.make_probe(), cfg.make_medium(), cfg.make_grid(),
                              dt=cfg.time.dt, num_samples=cfg.time.window,
                              truncation=cfg.time.truncation, f0=f0)


class MapCache:
    """Maps loaded once and reused while the file on disk is unchanged."""

    def __init__(self):
        self._maps = {}
        self._lock = threading.Lock()

    def get(self, path: Path, expect: ff.Header):
        path = Path(path)
        try:
            st = os.stat(path)
        except FileNotFoundError as exc:
            raise MapIOError(f"{path}: no such map; run the maps command first") from exc
        key = (str(path.resolve()), st.st_mtime_ns, st.st_size)
        with self._lock:
            hit = self._maps.get(key[0])
            if hit is not None and hit[0] == key:
                m, header = hit[1], hit[2]
                ff.check_compatible(header, expect, path=path)
                return m
        m, header, _ = load_map(path, expect=expect)
        with self._lock:
            self._maps[key[0]] = (key, m, header)
        return m

    def clear(self):
        with self._lock:
            self._maps.clear()

    def __len__(self) -> int:
        return len(self._maps)


_default_cache = MapCache()


def _ensure_dir(d) -> Path:
    d = Path(d)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise MapIOError(f"cannot create {d}: {exc}") from exc
    return d


def build_maps(cfg: RunConfig, mode: str = "both", f0s=None, force: bool = False) -> list[dict]:
    """Compute missing maps (or all, with ``force``); reuse compatible ones.

    An existing map whose header disagrees with ``cfg`` raises
    :class:`~txbeam.errors.IncompatibleMapError` unless ``force`` is set.
    """
    if mode not in ("both",) + MODES:
        raise InvalidArgumentError(f"unknown mode {mode!r}")
    probe, medium, axis = cfg.make_probe(), cfg.make_medium(), _axis(cfg)
    threads = cfg.worker_count()
    f0s = [cfg.pulse.f0] if not f0s else list(f0s)
    _ensure_dir(cfg.paths.map_store)
    meta = {"config": config_echo(cfg)}
    jobs = []
    if mode in ("both", "wideband"):
        jobs.append(("wideband", None, wideband_map_path(cfg), wideband_expected(cfg)))
    if mode in ("both", "narrowband"):
        for f0 in f0s:
            jobs.append(("narrowband", f0, narrowband_map_path(cfg, f0), narrowband_expected(cfg, f0)))
    out = []
    for kind, f0, path, expect in jobs:
        if path.exists() and not force:
            ff.check_compatible(ff.read_header(path), expect, path=path)
            log.info("%s: compatible map present, skipped", path)
            out.append({"kind": kind, "path": str(path), "status": "reused", "f0": f0, "elapsed_s": 0.0})
            continue
        t0 = time.perf_counter()
        if kind == "wideband":
            grid = expect.grid()
            m = compute_reference_map(grid, probe, medium, axis, n_fft=cfg.time.num_samples,
                                      truncation=cfg.time.truncation, threads=threads)
            save_map(path, m, probe, medium, window=axis.num_samples, truncation=cfg.time.truncation,
                     metadata=meta)
            shape = list(m.values.shape)
        else:
            m = compute_narrowband_map(cfg.make_grid(), probe, medium, axis, f0, _stored_half(cfg) - 1,
                                       truncation=cfg.time.truncation, threads=threads)
            save_map(path, m, probe, medium, dt=axis.dt, window=axis.num_samples,
                     truncation=cfg.time.truncation, metadata=meta)
            shape = list(m.values.shape)
        elapsed = time.perf_counter() - t0
        log.info("%s: %s map %s computed in %.3f s", path, kind, shape, elapsed)
        out.append({"kind": kind, "path": str(path), "status": "computed", "f0": f0,
                    "shape": shape, "elapsed_s": elapsed})
    return out


# beam patterns


def make_pulse(cfg: RunConfig, f0: float | None = None) -> Pulse:
    f0 = cfg.pulse.f0 if f0 is None else f0
    if cfg.pulse.kind == "sampled":
        try:
            return load_pulse_file(cfg.pulse.file, f0)
        except OSError as exc:
            raise MapIOError(f"{cfg.pulse.file}: {exc}") from exc
    return Pulse(f0, cfg.pulse.cycles)


def read_delay_file(path) -> np.ndarray:
    try:
        d = np.loadtxt(path, ndmin=1, dtype=float)
    except OSError as exc:
        raise MapIOError(f"{path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: not a list of numbers: {exc}", "transmit.delays_file") from exc
    return d.ravel()


def per_element_delays(aperture: Aperture, values) -> np.ndarray:
    """Accept one delay per element, or one per pair for a symmetric aperture."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == len(aperture):
        return values
    if aperture.symmetric and values.size == aperture.max_pair + 1:
        return np.array([values[n if n >= 0 else -n - 1] for n in aperture.indices])
    raise InvalidArgumentError(
        f"{values.size} delays given for an aperture of {len(aperture)} elements")


def _pair_values(aperture: Aperture, per_element, what: str) -> np.ndarray:
    per_element = np.asarray(per_element, dtype=float)
    pairs = aperture.pair_values(per_element)
    mirrored = per_element_delays(aperture, pairs)
    if not np.allclose(mirrored, per_element, rtol=1e-12, atol=0):
        raise InvalidArgumentError(f"narrowband evaluation needs symmetric {what}")
    return pairs


def compute_bp(cfg: RunConfig, mode: str | None = None, *, f0: float | None = None,
               elements: int | None = None, focus: float | None = None, delays=None,
               cache: MapCache | None = None) -> tuple[BeamPattern, dict]:
    """One beam pattern from stored maps. Returns the pattern and its provenance record."""
    mode = mode or cfg.transmit.mode
    if mode not in MODES:
        raise InvalidArgumentError(f"unknown mode {mode!r}")
    cache = _default_cache if cache is None else cache
    probe, medium, grid = cfg.make_probe(), cfg.make_medium(), cfg.make_grid()
    f0 = cfg.pulse.f0 if f0 is None else float(f0)
    M = cfg.transmit.elements if elements is None else int(elements)
    F = cfg.transmit.focus if focus is None else float(focus)
    aperture = Aperture.centered(M, probe)
    source = "focus"
    if delays is None and cfg.transmit.delays_file:
        delays, source = read_delay_file(cfg.transmit.delays_file), "file"
    elif delays is not None:
        source = "explicit"
    D = focus_delays(aperture, probe, medium, F) if delays is None else per_element_delays(aperture, delays)
    apod = cfg.transmit.apodization
    if apod is not None:
        apod = per_element_delays(aperture, apod)
    if mode == "wideband":
        wb = cache.get(wideband_map_path(cfg), wideband_expected(cfg))
        t0 = time.perf_counter()
        spec = with_band(pulse_spectrum(make_pulse(cfg, f0), wb.freqs, wb.dt, wb.n_fft), probe.band,
                         cfg.pulse.threshold_db)
        bp = wideband_bp(wb, grid, spec, aperture, D, apod, threads=cfg.worker_count())
    else:
        nb = cache.get(narrowband_map_path(cfg, f0), narrowband_expected(cfg, f0))
        pair_d = _pair_values(aperture, D, "delays")
        pair_a = None if apod is None else _pair_values(aperture, apod, "apodization")
        t0 = time.perf_counter()
        bp = narrowband_bp(nb, pair_d, pair_a)
    elapsed = time.perf_counter() - t0
    x, z = bp.peak()
    info = {
        "mode": mode, "f0": f0, "elements": M, "focus": None if source != "focus" else F,
        "delay_source": source, "delays": D.tolist(), "aperture": list(aperture.indices),
        "apodization": None if apod is None else apod.tolist(), "quantity": bp.kind,
        "raw_max": bp.raw_max, "normalization": "values are raw; divide by raw_max for the normalized pattern",
        "peak_x": x, "peak_z": z, "shape": list(bp.values.shape),
    }
    log.info("%s BP (f0 %s MHz, M %d) evaluated in %.4f s", mode, _mhz(f0), M, elapsed)
    return bp, info | {"elapsed_s": elapsed}


def write_bp(bp: BeamPattern, cfg: RunConfig, stem: str, info: dict, *, image: bool = False,
             text: bool = False) -> dict:
    out = _ensure_dir(cfg.paths.out)
    meta = {k: v for k, v in info.items() if k != "elapsed_s"}
    meta["config"] = config_echo(cfg)
    h = ff.Header.describe(ff.KIND_BEAM, cfg.make_probe(), cfg.make_medium(), bp.grid, dt=cfg.time.dt,
                           f0=info.get("f0", 0.0))
    paths = {"bp": str(out / f"{stem}.pust")}
    ff.write(paths["bp"], h, bp.values, metadata=meta)
    if image:
        paths["image"] = str(out / f"{stem}.pgm")
        ff.write_pgm(paths["image"], to_db(bp, cfg.output.floor_db), cfg.output.floor_db)
    if text:
        paths["text"] = str(out / f"{stem}.txt")
        ff.write_text_matrix(paths["text"], bp.values)
    return paths


def case_stem(mode: str, f0: float, elements: int, focus: float | None) -> str:
    tail = "delays" if focus is None else f"F{focus * 1e3:g}mm"
    return f"{mode}_f{_mhz(f0)}MHz_M{elements}_{tail}"


def run_bp(cfg: RunConfig, mode: str | None = None, *, image: bool | None = None, text: bool | None = None,
           name: str | None = None, delays=None, cache: MapCache | None = None) -> dict:
    bp, info = compute_bp(cfg, mode, delays=delays, cache=cache)
    stem = name or case_stem(info["mode"], info["f0"], info["elements"], info["focus"])
    image = cfg.output.image if image is None else image
    text = cfg.output.text if text is None else text
    info["files"] = write_bp(bp, cfg, stem, info, image=image, text=text)
    return info


# comparison


def load_grid(path) -> np.ndarray:
    """A 2-D grid from a native binary file or a plain text matrix."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            magic = fh.read(4)
    except FileNotFoundError as exc:
        raise MapIOError(f"{path}: no such file") from exc
    except OSError as exc:
        raise MapIOError(f"{path}: {exc}") from exc
    if magic == ff.MAGIC:
        header, arr, _, _ = ff.read(path)
        if header.kind not in (ff.KIND_BEAM, ff.KIND_MATRIX) or arr.ndim != 2 or np.iscomplexobj(arr):
            raise InvalidArgumentError(f"{path}: not a real 2-D grid")
        return arr
    return ff.read_text_matrix(path)


def run_compare(bp_path, ref_path, *, floor_db: float = 60.0, bin_width: float = 1.0,
                threshold: float | None = None) -> ComparisonReport:
    return compare(load_grid(bp_path), load_grid(ref_path), floor_db, bin_width, threshold)


def _find_reference(ref_dir: Path, stem: str) -> Path | None:
    for ext in (".pust", ".txt"):
        p = ref_dir / f"{stem}{ext}"
        if p.exists():
            return p
    return None


def _with_max_elements(cfg: RunConfig, m: int) -> RunConfig:
    if m <= cfg.transmit.stored_elements:
        return cfg
    t = cfg.transmit.model_copy(update={"max_elements": m})
    return cfg.model_copy(update={"transmit": t})


def summary_table(cases: list[dict], key: str, fmt: str) -> str:
    """Rows by focal depth, columns by (f0, M), plus an average row."""
    f0s = sorted({c["f0"] for c in cases})
    Ms = sorted({c["elements"] for c in cases})
    Fs = sorted({c["focus"] for c in cases})
    cols = [(f, m) for f in f0s for m in Ms]
    cell = {(c["f0"], c["elements"], c["focus"]): c.get(key) for c in cases}
    head1 = f"{'':>8} " + " ".join(f"{'f0 ' + _mhz(f) + ' MHz':>12}" for f, _ in cols)
    head2 = f"{'F (mm)':>8} " + " ".join(f"{'M=' + str(m):>12}" for _, m in cols)
    lines = [head1, head2]

    def fmt_v(v):
        return f"{'-':>12}" if v is None else f"{format(v, fmt):>12}"

    for F in Fs:
        lines.append(f"{F * 1e3:>8g} " + " ".join(fmt_v(cell.get((f, m, F))) for f, m in cols))
    avg = []
    for f, m in cols:
        vals = [cell.get((f, m, F)) for F in Fs]
        vals = [v for v in vals if v is not None]
        avg.append(float(np.mean(vals)) if vals else None)
    lines.append(f"{'Average':>8} " + " ".join(fmt_v(v) for v in avg))
    return "\n".join(lines) + "\n"


def run_sweep(cfg: RunConfig, mode: str | None = None, *, reference_dir=None, image: bool | None = None,
              floor_db: float | None = None, cache: MapCache | None = None) -> dict:
    """Cartesian product over the sweep lists; failures are recorded per case."""
    mode = mode or cfg.transmit.mode
    if mode not in MODES:
        raise InvalidArgumentError(f"unknown mode {mode!r}")
    sw = cfg.sweep
    for key, lst in (("sweep.f0", sw.f0), ("sweep.elements", sw.elements), ("sweep.focus", sw.focus)):
        if not lst:
            raise ConfigError("list must not be empty", key)
    cfg = _with_max_elements(cfg, max(sw.elements))
    floor_db = cfg.output.floor_db if floor_db is None else floor_db
    ref_dir = Path(reference_dir) if reference_dir else None
    if ref_dir is not None and not ref_dir.is_dir():
        raise MapIOError(f"{ref_dir}: reference directory not found")
    map_errors = {}
    f0_list = sorted(set(sw.f0))
    try:
        if mode == "wideband":
            build_maps(cfg, "wideband")
        else:
            for f0 in f0_list:
                try:
                    build_maps(cfg, "narrowband", [f0])
                except TxBeamError as exc:
                    map_errors[f0] = exc
    except TxBeamError as exc:
        map_errors = {f0: exc for f0 in f0_list}
    cases = []
    for f0, M, F in itertools.product(sw.f0, sw.elements, sw.focus):
        stem = case_stem(mode, f0, M, F)
        rec = {"case": stem, "mode": mode, "f0": f0, "elements": M, "focus": F}
        try:
            if f0 in map_errors:
                raise map_errors[f0]
            bp, info = compute_bp(cfg, mode, f0=f0, elements=M, focus=F, cache=cache)
            rec["elapsed_s"] = info["elapsed_s"]
            rec["files"] = write_bp(bp, cfg, stem, info, image=cfg.output.image if image is None else image)
            if ref_dir is not None:
                ref = _find_reference(ref_dir, stem)
                if ref is None:
                    rec["reference"] = None
                else:
                    rep = compare(bp.values, load_grid(ref), floor_db)
                    rec["reference"] = str(ref)
                    rec["distance"] = rep.distance
                    rec["alpha_star"] = rep.alpha_star
            rec["status"] = "ok"
        except TxBeamError as exc:
            rec["status"] = "failed"
            rec["error"] = {"kind": exc.kind, "message": str(exc)}
            log.warning("%s failed: %s", stem, exc)
        cases.append(rec)
    tables = {"runtime_s": summary_table(cases, "elapsed_s", ".4f")}
    if ref_dir is not None:
        tables["distance"] = summary_table(cases, "distance", ".2e")
    out = _ensure_dir(cfg.paths.out)
    summary_path = out / f"sweep_{mode}_summary.txt"
    text = "".join(f"# {k}\n{v}\n" for k, v in tables.items())
    try:
        summary_path.write_text(text)
    except OSError as exc:
        raise MapIOError(f"cannot write {summary_path}: {exc}") from exc
    return {"mode": mode, "cases": cases, "tables": tables, "summary": str(summary_path),
            "failed": sum(c["status"] != "ok" for c in cases)}


# PCA


def run_pca(cfg: RunConfig, *, count: int = 30000, k: int = 3, f0s=None, num_pairs: int | None = None,
            pin_center: bool = True, save_ensemble: bool = True, cache: MapCache | None = None) -> list[dict]:
    """Random-delay ensembles and their ``k``-dimensional projections, one set per frequency."""
    cache = _default_cache if cache is None else cache
    out = _ensure_dir(cfg.paths.out)
    num_pairs = cfg.transmit.elements // 2 if num_pairs is None else int(num_pairs)
    results = []
    for f0 in ([cfg.pulse.f0] if not f0s else list(f0s)):
        nb: NarrowbandMap = cache.get(narrowband_map_path(cfg, f0), narrowband_expected(cfg, f0))
        t0 = time.perf_counter()
        ens = sample_torus(nb, count, cfg.seed, num_pairs, pin_center)
        proj = pca_project(ens, k)
        elapsed = time.perf_counter() - t0
        stem = f"pca_f{_mhz(f0)}MHz_P{num_pairs}_n{count}"
        meta = {"config": config_echo(cfg), "f0": f0, "count": count, "k": k, "num_pairs": num_pairs,
                "pin_center": pin_center, "seed": cfg.seed, "eigenvalues": proj.eigenvalues.tolist(),
                "shape": list(ens.shape)}
        files = {}
        h = ff.Header.describe(ff.KIND_MATRIX, cfg.make_probe(), cfg.make_medium(), nb.grid, f0=f0)
        files["projection"] = str(out / f"{stem}_projection.pust")
        ff.write(files["projection"], h, proj.coords, metadata=meta)
        files["basis"] = str(out / f"{stem}_basis.pust")
        ff.write(files["basis"], h, np.vstack([proj.mean, proj.components]),
                 metadata=meta | {"rows": "mean, then one row per component"})
        if save_ensemble:
            files["ensemble"] = str(out / f"{stem}_ensemble.pust")
            ff.write(files["ensemble"], h, ens.bps, metadata=meta | {"rows": "samples"})
        files["phases"] = str(out / f"{stem}_phases.txt")
        files["table"] = str(out / f"{stem}_projection.txt")
        try:
            np.savetxt(files["phases"], ens.phases, fmt="%.17g",
                       header="phase shift 2 pi f0 D_m mod 2 pi, one column per pair m = 0 ..")
            np.savetxt(files["table"], proj.coords, fmt="%.12e",
                       header=" ".join(f"pc{i + 1}" for i in range(k)))
        except OSError as exc:
            raise MapIOError(f"cannot write PCA output: {exc}") from exc
        log.info("PCA at %s MHz (%d samples) in %.3f s", _mhz(f0), count, elapsed)
        results.append({"f0": f0, "count": count, "k": k, "eigenvalues": proj.eigenvalues.tolist(),
                        "files": files, "elapsed_s": elapsed})
    return results
