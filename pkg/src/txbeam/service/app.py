"""HTTP front end: maps are loaded once per process and shared by every request."""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import ConfigError, IncompatibleMapError, MapIOError, TxBeamError
from . import schemas as s
from .handlers import Handlers

log = logging.getLogger("txbeam.service")

_STATUS = {IncompatibleMapError: 409, MapIOError: 404}


def error_body(exc: TxBeamError) -> dict:
    return s.ErrorResponse(error=exc.kind, message=str(exc),
                           key=getattr(exc, "key", None) if isinstance(exc, ConfigError) else None,
                           fields=getattr(exc, "fields", []) or []).model_dump()


def create_app(handlers: Handlers | None = None) -> FastAPI:
    h = handlers or Handlers()
    app = FastAPI(title="txbeam", version=__version__,
                  description="Transmit beam patterns from precomputed impulse-response maps.")
    app.state.handlers = h

    @app.exception_handler(TxBeamError)
    async def _domain_error(request: Request, exc: TxBeamError):
        status = next((v for k, v in _STATUS.items() if isinstance(exc, k)), 422)
        log.info("%s %s -> %d %s", request.method, request.url.path, status, exc)
        return JSONResponse(status_code=status, content=error_body(exc))

    err = {"model": s.ErrorResponse}
    errors = {404: err, 409: err, 422: err}

    @app.get("/health", response_model=s.HealthResponse)
    def health():
        return s.HealthResponse(version=__version__, cached_maps=len(h.cache))

    @app.post("/maps", response_model=s.MapsResponse, responses=errors)
    def maps(req: s.MapsRequest):
        return h.maps(req)

    @app.post("/bp", response_model=s.BPResponse, responses=errors)
    def bp(req: s.BPRequest):
        return h.bp(req)

    @app.post("/compare", response_model=s.CompareResponse, responses=errors)
    def compare(req: s.CompareRequest):
        return h.compare(req)

    @app.post("/sweep", response_model=s.SweepResponse, responses=errors)
    def sweep(req: s.SweepRequest):
        return h.sweep(req)

    @app.post("/pca", response_model=s.PCAResponse, responses=errors)
    def pca(req: s.PCARequest):
        return h.pca(req)

    return app


app = create_app()
