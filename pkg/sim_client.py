"""
HTTP client for the simulation REST API.

Used by the MCP gateway and the REST transport of the harness. Any object with
requests-style `get`/`post` can stand in for the session (FastAPI's
TestClient in tests).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import requests

logger = logging.getLogger(__name__)


class UpstreamError(Exception):
    """The simulation service could not be reached or answered garbage."""

    code = -32000


@dataclass(frozen=True)
class SimResponse:
    status_code: int
    body: dict

    @property
    def success(self) -> bool:
        return bool(self.body.get("success"))

    @property
    def data(self) -> Any:
        return self.body.get("data")

    @property
    def error(self) -> dict | None:
        return self.body.get("error")

    @property
    def is_client_error(self) -> bool:
        return 400 <= self.status_code < 500


class SimClient:
    def __init__(self, base_url: str = "http://127.0.0.1:8350", timeout: float = 10.0, session: Any = None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = session if session is not None else requests.Session()

    def _call(self, method: str, path: str, payload: Any = None) -> SimResponse:
        url = f"{self.base_url}{path}"
        try:
            if method == "GET":
                response = self._session.get(url, timeout=self.timeout)
            else:
                response = self._session.post(url, json=payload, timeout=self.timeout)
        except requests.RequestException as exc:
            logger.warning("simulation service unreachable at %s: %s", url, exc)
            raise UpstreamError(f"simulation service unreachable at {self.base_url}: {exc}") from exc

        try:
            body = response.json()
        except ValueError:
            raise UpstreamError(f"{method} {path} returned non-JSON (HTTP {response.status_code})") from None
        if not isinstance(body, dict) or "success" not in body:
            raise UpstreamError(f"{method} {path} returned an unexpected payload")
        if response.status_code >= 500:
            raise UpstreamError(f"{method} {path} failed: {body.get('error', {}).get('message', 'server error')}")
        return SimResponse(response.status_code, body)

    # ---- Simulation control ----

    def health(self) -> SimResponse:
        return self._call("GET", "/")

    def start(self, scenario_id: str | None = None, scenario: dict | None = None, force: bool = False) -> SimResponse:
        payload: dict = {"force": force}
        if scenario_id is not None:
            payload["scenario_id"] = scenario_id
        if scenario is not None:
            payload["scenario"] = scenario
        return self._call("POST", "/simulation/start", payload)

    def stop(self) -> SimResponse:
        return self._call("POST", "/simulation/stop")

    # ---- Queries ----

    def status(self) -> SimResponse:
        return self._call("GET", "/status")

    def rules(self) -> SimResponse:
        return self._call("GET", "/rules")

    def scenarios(self) -> SimResponse:
        return self._call("GET", "/scenarios")

    # ---- Actions & verification ----

    def action(self, name: str, block: str, target: str | None = None) -> SimResponse:
        payload = {"block": block}
        if target is not None:
            payload["target"] = target
        return self._call("POST", f"/actions/{name}", payload)

    def verify(self, plan: Any) -> SimResponse:
        return self._call("POST", "/verify", plan)
