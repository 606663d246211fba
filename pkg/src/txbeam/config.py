"""Run configuration: a TOML file with one table per section, plus flag overrides.

All physical quantities are SI (m, s, Hz, m/s); attenuation is dB/(MHz cm).

Example::

    seed = 0

    [probe]
    elements = 192
    pitch = 0.245e-3
    kerf = 0.03e-3
    height = 5e-3
    geometric_focus = 25e-3
    f_min = 1e6
    f_max = 8e6

    [grid]
    L = 4
    dz = 0.2e-3
    z_min = 2e-3
    z_max = 42e-3

    [pulse]
    f0 = 3e6
    cycles = 2

    [transmit]
    mode = "narrowband"
    elements = 50
    focus = 25e-3
"""

from __future__ import annotations

import os
import sys
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, InvalidArgumentError, MapIOError
from .geometry import FieldGrid, Medium, Probe, build_field_grid

ENV_MAP_STORE = "TXBEAM_MAP_STORE"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MediumConfig(_Section):
    speed_of_sound: float = Field(1540.0, gt=0)
    attenuation: float = Field(0.0, ge=0)


class ProbeConfig(_Section):
    elements: int = Field(192, gt=0)
    pitch: float = Field(0.245e-3, gt=0)
    kerf: float = Field(0.03e-3, ge=0)
    height: float = Field(5e-3, gt=0)
    geometric_focus: float = Field(25e-3, gt=0)
    f_min: float = Field(1e6, gt=0)
    f_max: float = Field(8e6, gt=0)
    sub_nx: int = 4
    sub_ny: int = 16


class GridConfig(_Section):
    L: int = Field(4, ge=1)
    dz: float = Field(0.2e-3, gt=0)
    z_min: float = Field(2e-3, gt=0)
    z_max: float = Field(42e-3, gt=0)
    half_width_elements: Optional[int] = Field(None, gt=0)


class TimeConfig(_Section):
    dt: float = Field(1e-8, gt=0)
    num_samples: int = Field(2048, gt=0)
    window: int = Field(256, gt=0)
    truncation: int = Field(32, ge=1)


class PulseConfig(_Section):
    kind: Literal["windowed-sinusoid", "sampled"] = "windowed-sinusoid"
    f0: float = Field(3e6, gt=0)
    cycles: float = Field(2.0, gt=0)
    file: Optional[str] = None
    threshold_db: float = Field(40.0, gt=0)


class TransmitConfig(_Section):
    mode: Literal["wideband", "narrowband"] = "narrowband"
    elements: int = Field(50, gt=0)
    focus: float = Field(25e-3, gt=0)
    delays_file: Optional[str] = None
    apodization: Optional[list[float]] = None
    max_elements: Optional[int] = Field(None, gt=0)

    @property
    def stored_elements(self) -> int:
        return self.max_elements or self.elements


class SweepConfig(_Section):
    f0: list[float] = [3e6, 4.5e6]
    elements: list[int] = [20, 50]
    focus: list[float] = [10e-3, 25e-3, 35e-3]


class PathsConfig(_Section):
    map_store: str = "maps"
    out: str = "out"


class OutputConfig(_Section):
    floor_db: float = Field(60.0, gt=0)
    image: bool = False
    text: bool = False


class RunConfig(_Section):
    seed: int = 0
    threads: int = Field(0, ge=0)
    medium: MediumConfig = MediumConfig()
    probe: ProbeConfig = ProbeConfig()
    grid: GridConfig = GridConfig()
    time: TimeConfig = TimeConfig()
    pulse: PulseConfig = PulseConfig()
    transmit: TransmitConfig = TransmitConfig()
    sweep: SweepConfig = SweepConfig()
    paths: PathsConfig = PathsConfig()
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _cross_checks(self) -> "RunConfig":
        p, t = self.probe, self.time
        if p.elements % 2:
            raise ConfigError("the probe needs an even number of elements", "probe.elements")
        if not p.f_min < p.f_max:
            raise ConfigError("band must satisfy f_min < f_max", "probe.f_max")
        if not 1.0 / t.dt > 2 * p.f_max:
            raise ConfigError(
                f"Nyquist constraint violated: sampling frequency {1 / t.dt:g} Hz must exceed "
                f"2 * f_max = {2 * p.f_max:g} Hz", "time.dt")
        if t.num_samples % 2:
            raise ConfigError("num_samples must be even", "time.num_samples")
        if t.window > t.num_samples:
            raise ConfigError("window cannot exceed num_samples", "time.window")
        if self.grid.z_max < self.grid.z_min:
            raise ConfigError("z_max must not be below z_min", "grid.z_max")
        for key, m in (("transmit.elements", self.transmit.elements),
                       ("transmit.max_elements", self.transmit.stored_elements)):
            if m % 2 or m > p.elements:
                raise ConfigError(f"{m} active elements must be even and at most {p.elements}", key)
        if self.transmit.elements > self.transmit.stored_elements:
            raise ConfigError("elements exceeds max_elements", "transmit.max_elements")
        if self.pulse.kind == "sampled" and not self.pulse.file:
            raise ConfigError("a sampled pulse needs a file", "pulse.file")
        return self

    # domain objects

    def make_probe(self) -> Probe:
        p = self.probe
        try:
            return Probe(p.elements // 2, p.pitch, p.kerf, p.height, p.geometric_focus, p.f_min, p.f_max,
                         p.sub_nx, p.sub_ny)
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc), "probe") from exc

    def make_medium(self) -> Medium:
        return Medium(self.medium.speed_of_sound, self.medium.attenuation)

    def make_grid(self) -> FieldGrid:
        g = self.grid
        try:
            return build_field_grid(self.make_probe(), g.L, g.dz, g.z_min, g.z_max, g.half_width_elements)
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc), "grid") from exc

    def worker_count(self) -> int:
        return self.threads or os.cpu_count() or 1


def _set_path(d: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    for k in keys[:-1]:
        d = d.setdefault(k, {})
        if not isinstance(d, dict):
            raise ConfigError("not a section", dotted)
    d[keys[-1]] = value


def _pydantic_error(exc: ValidationError) -> ConfigError:
    err = exc.errors()[0]
    key = ".".join(str(p) for p in err.get("loc", ()))
    ctx = err.get("ctx") or {}
    if isinstance(ctx.get("error"), ConfigError):
        return ctx["error"]
    return ConfigError(err.get("msg", str(exc)), key or None)


def resolve_config(data: dict | None = None, overrides: dict[str, Any] | None = None,
                   use_env: bool = True) -> RunConfig:
    """Validate a raw mapping after applying ``{"section.key": value}`` overrides.

    With ``use_env`` the map store directory may be redirected by the
    ``TXBEAM_MAP_STORE`` environment variable (overrides still win).
    """
    data = dict(data or {})
    data = {k: (dict(v) if isinstance(v, dict) else v) for k, v in data.items()}
    env_store = os.environ.get(ENV_MAP_STORE) if use_env else None
    if env_store:
        _set_path(data, "paths.map_store", env_store)
    for k, v in (overrides or {}).items():
        if v is not None:
            _set_path(data, k, v)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise _pydantic_error(exc) from exc


def load_config(path=None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Read a TOML run configuration; flags (``overrides``) win over the environment,
    which wins over the file."""
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise MapIOError(f"{path}: no such configuration file") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        base = Path(path).resolve().parent
        # relative file references resolve against the configuration file
        for sect, key in (("pulse", "file"), ("transmit", "delays_file")):
            v = data.get(sect, {}).get(key)
            if v and not os.path.isabs(v):
                data[sect][key] = str(base / v)
    return resolve_config(data, overrides)
