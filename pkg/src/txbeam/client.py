"""Backends the CLI talks to: handlers in this process, or a remote txbeam service."""

from __future__ import annotations

import httpx
from pydantic import BaseModel

from .errors import InvalidArgumentError, MapIOError, error_class


class LocalBackend:
    """Runs requests through the service handlers without a server."""

    def __init__(self, handlers=None):
        from .service.handlers import Handlers

        self.handlers = handlers or Handlers()

    def call(self, op: str, req: BaseModel) -> dict:
        return getattr(self.handlers, op)(req).model_dump(mode="json")


def _raise_for(resp: httpx.Response):
    try:
        body = resp.json()
    except ValueError:
        body = {}
    if isinstance(body, dict) and "error" in body:
        cls = error_class(body["error"])
        if body.get("key") is not None:
            raise cls(body["message"].removeprefix(f"{body['key']}: "), body["key"])
        if body.get("fields"):
            raise cls(body["message"], body["fields"])
        raise cls(body.get("message", ""))
    if resp.status_code == 422:
        raise InvalidArgumentError(f"request rejected by the service: {body.get('detail', body)}")
    raise MapIOError(f"service returned HTTP {resp.status_code}: {resp.text[:200]}")


class HttpBackend:
    """Posts requests to a running service; domain errors are re-raised locally.

    ``client`` may be any :class:`httpx.Client`, e.g. a FastAPI test client.
    """

    def __init__(self, base_url: str | None = None, client: httpx.Client | None = None):
        if client is None and not base_url:
            raise InvalidArgumentError("a server URL or a client is needed")
        self.client = client or httpx.Client(base_url=base_url, timeout=None)

    def call(self, op: str, req: BaseModel) -> dict:
        try:
            resp = self.client.post(f"/{op}", json=req.model_dump(mode="json"))
        except httpx.TransportError as exc:
            raise MapIOError(f"cannot reach the service: {exc}") from exc
        if resp.status_code >= 400:
            _raise_for(resp)
        return resp.json()
