"""JSON-over-HTTP POST with exponential backoff, shared by the remote backends."""
from __future__ import annotations

import logging
import time

import httpx

from .errors import BackendError

logger = logging.getLogger(__name__)

RETRY_STATUS = {408, 409, 429, 500, 502, 503, 504}


class JsonPoster:
    def __init__(self, base_url: str, api_key: str | None = None, *, timeout: float = 60.0,
                 max_attempts: int = 5, backoff: float = 0.5, max_backoff: float = 30.0,
                 transport: httpx.BaseTransport | None = None, sleep=time.sleep):
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(base_url=base_url.rstrip("/"), headers=headers,
                                    timeout=timeout, transport=transport)
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.max_backoff = max_backoff
        self._sleep = sleep

    def post(self, path: str, payload: dict) -> dict:
        last: str = ""
        for attempt in range(1, self.max_attempts + 1):
            try:
                resp = self._client.post(path, json=payload)
            except httpx.TransportError as exc:
                last = f"{type(exc).__name__}: {exc}"
            else:
                if resp.status_code < 400:
                    try:
                        return resp.json()
                    except ValueError as exc:
                        raise BackendError(f"POST {path}: response is not JSON") from exc
                last = f"HTTP {resp.status_code}: {resp.text[:200]}"
                if resp.status_code not in RETRY_STATUS:
                    raise BackendError(f"POST {path} failed: {last}")
            if attempt < self.max_attempts:
                delay = min(self.max_backoff, self.backoff * 2 ** (attempt - 1))
                logger.warning("POST %s attempt %d failed (%s); retrying in %.1fs", path, attempt, last, delay)
                self._sleep(delay)
        raise BackendError(f"POST {path} failed after {self.max_attempts} attempts: {last}")

    def close(self):
        self._client.close()
