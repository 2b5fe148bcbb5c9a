"""Shared plumbing for remote tool backends: config, errors, JSON-over-HTTP
with retries, payload codecs, and stable seed derivation."""

from __future__ import annotations

import base64
import binascii
import hashlib
import threading
from dataclasses import dataclass

import requests

from .raster import RasterImage


class ProviderError(Exception):
    """Base class for backend failures."""


class ProviderUnavailable(ProviderError):
    pass


class ProviderTimeout(ProviderError):
    pass


class ProviderMalformedResponse(ProviderError):
    pass


MOCK_ENDPOINT = "mock"


@dataclass(frozen=True)
class BackendConfig:
    """How to reach one backend: a URL, or "mock" for the in-process stand-in."""

    endpoint: str = MOCK_ENDPOINT
    timeout: float = 30.0
    retries: int = 2
    seed: int = 0
    resolution: int = 224
    api_key: str | None = None

    def __post_init__(self):
        if not self.timeout > 0:
            raise ValueError("timeout must be positive")
        if self.retries < 0:
            raise ValueError("retries must be non-negative")

    @property
    def is_mock(self) -> bool:
        return self.endpoint == MOCK_ENDPOINT


_inflight = threading.BoundedSemaphore(8)


def set_inflight_limit(n: int) -> None:
    """Cap concurrent outbound requests across all backends."""
    global _inflight
    if n < 1:
        raise ValueError("limit must be at least 1")
    _inflight = threading.BoundedSemaphore(n)


def post_json(url: str, payload: dict, timeout: float, retries: int,
              api_key: str | None = None) -> dict:
    """POST a JSON payload; retry timeouts and non-200s up to ``retries`` times.

    Total wall time stays within (retries + 1) * timeout. A 200 with an
    unparseable or non-object body fails immediately as malformed.
    """
    headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
    failure: ProviderError = ProviderUnavailable(f"no attempt made against {url}")
    for _ in range(retries + 1):
        try:
            with _inflight:
                resp = requests.post(url, json=payload, timeout=timeout, headers=headers)
        except requests.Timeout:
            failure = ProviderTimeout(f"timed out after {timeout}s: {url}")
            continue
        except requests.RequestException as e:
            failure = ProviderUnavailable(f"{url}: {e}")
            continue
        if resp.status_code == 200:
            try:
                body = resp.json()
            except ValueError as e:
                raise ProviderMalformedResponse(f"{url}: body is not JSON") from e
            if not isinstance(body, dict):
                raise ProviderMalformedResponse(f"{url}: JSON body is not an object")
            return body
        failure = ProviderUnavailable(f"{url}: status {resp.status_code}")
    raise failure


def encode_image_b64(image: RasterImage) -> str:
    return base64.b64encode(image.to_png_bytes()).decode("ascii")


def decode_image_b64(data: str) -> RasterImage:
    try:
        return RasterImage.from_png_bytes(base64.b64decode(data, validate=True))
    except (binascii.Error, ValueError, OSError) as e:
        raise ProviderMalformedResponse(f"bad base64 PNG payload: {e}") from e


def derive_seed(*parts) -> int:
    """Platform-stable seed derived from arbitrary parts via sha256."""
    h = hashlib.sha256()
    for p in parts:
        h.update(repr(p).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "big")
