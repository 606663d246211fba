"""Request and response bodies of the HTTP API."""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field

Mode = Literal["wideband", "narrowband"]


class ErrorResponse(BaseModel):
    error: str = Field(description="machine-readable error kind")
    message: str
    key: Optional[str] = None
    fields: list[str] = []


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str
    cached_maps: int


class MapsRequest(BaseModel):
    config: dict[str, Any] = {}
    mode: Literal["both", "wideband", "narrowband"] = "both"
    f0: Optional[list[float]] = None
    force: bool = False


class MapRecord(BaseModel):
    kind: str
    path: str
    status: Literal["computed", "reused"]
    f0: Optional[float] = None
    shape: Optional[list[int]] = None
    elapsed_s: float


class MapsResponse(BaseModel):
    maps: list[MapRecord]


class BPRequest(BaseModel):
    config: dict[str, Any] = {}
    mode: Optional[Mode] = None
    delays: Optional[list[float]] = Field(None, description="per element or per pair; overrides the focus")
    image: Optional[bool] = None
    text: Optional[bool] = None
    name: Optional[str] = None


class BPResponse(BaseModel):
    mode: Mode
    f0: float
    elements: int
    focus: Optional[float]
    delay_source: str
    delays: list[float]
    aperture: list[int]
    apodization: Optional[list[float]]
    quantity: str
    raw_max: float
    normalization: str
    peak_x: float
    peak_z: float
    shape: list[int]
    elapsed_s: float
    files: dict[str, str]


class CompareRequest(BaseModel):
    bp_path: str
    reference_path: str
    floor_db: float = Field(60.0, gt=0)
    bin_width: float = Field(1.0, gt=0)
    threshold: Optional[float] = None


class CompareResponse(BaseModel):
    distance: float
    alpha_star: float
    num_points: int
    max_abs_db: float
    mean_abs_db: float
    edges: list[float]
    counts: list[int]
    threshold: Optional[float]
    passed: Optional[bool]
    report: str


class SweepRequest(BaseModel):
    config: dict[str, Any] = {}
    mode: Optional[Mode] = None
    reference_dir: Optional[str] = None
    image: Optional[bool] = None
    floor_db: Optional[float] = Field(None, gt=0)


class SweepResponse(BaseModel):
    mode: Mode
    cases: list[dict[str, Any]]
    tables: dict[str, str]
    summary: str
    failed: int


class PCARequest(BaseModel):
    config: dict[str, Any] = {}
    count: int = Field(30000, ge=1)
    k: int = Field(3, ge=1)
    f0: Optional[list[float]] = None
    num_pairs: Optional[int] = Field(None, ge=1)
    pin_center: bool = True
    save_ensemble: bool = True


class PCARecord(BaseModel):
    f0: float
    count: int
    k: int
    eigenvalues: list[float]
    files: dict[str, str]
    elapsed_s: float


class PCAResponse(BaseModel):
    results: list[PCARecord]
