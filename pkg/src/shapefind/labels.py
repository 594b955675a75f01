"""Image-to-label extraction behind a pluggable provider.

Photographing an object and searching by its labels needs a vision backend.
Tests and offline use get a deterministic stub keyed by image content hash
(fixtures/labels.json); deployments can point at a remote HTTP service that
accepts the raw image and answers with a JSON array of {label, score}.  The
first guess in a result is the "best guess" a UI would pre-fill.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
from dataclasses import dataclass
from importlib import resources

import httpx
from PIL import Image, UnidentifiedImageError

API_KEY_ENV = "SHAPEFIND_LABELS_KEY"
DEFAULT_TIMEOUT_S = 10.0
MAX_LABELS = 10
FALLBACK_GUESS = ("object", 0.5)

_ACCEPTED_FORMATS = {"PNG": "image/png", "JPEG": "image/jpeg"}


class LabelError(RuntimeError):
    """A label request failed (bad image, provider error, timeout)."""


class LabelConfigError(ValueError):
    """Provider is misconfigured; raised at construction, not per request."""


@dataclass(frozen=True)
class LabelGuess:
    term: str
    confidence: float

    def __post_init__(self):
        if not self.term:
            raise ValueError("label term must be non-empty")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


def sniff_image(data: bytes) -> str:
    """Content type of a decodable PNG or JPEG; anything else is an error."""
    try:
        with Image.open(io.BytesIO(data)) as img:
            fmt = img.format
            img.verify()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise LabelError(f"image is not decodable: {exc}") from exc
    if fmt not in _ACCEPTED_FORMATS:
        raise LabelError(f"unsupported image format {fmt}, use PNG or JPEG")
    return _ACCEPTED_FORMATS[fmt]


def _parse_rows(rows) -> list[LabelGuess]:
    if not isinstance(rows, list):
        raise LabelError("label data must be a JSON array")
    guesses = []
    for row in rows:
        if not isinstance(row, dict) or "label" not in row or "score" not in row:
            raise LabelError(f"malformed label row {row!r}")
        try:
            guesses.append(LabelGuess(str(row["label"]), float(row["score"])))
        except (TypeError, ValueError) as exc:
            raise LabelError(f"malformed label row {row!r}: {exc}") from exc
    return guesses


class StubLabelProvider:
    """Deterministic offline provider: content hash → shipped label table."""

    def __init__(self, table: dict | None = None):
        if table is None:
            raw = resources.files("shapefind").joinpath(
                "fixtures/labels.json").read_bytes()
            table = json.loads(raw)
        self.table = dict(table)

    def labels(self, image: bytes, content_type: str | None = None) -> list[LabelGuess]:
        rows = self.table.get(hashlib.sha256(image).hexdigest())
        if rows is None:
            return [LabelGuess(*FALLBACK_GUESS)]
        return _parse_rows(rows)


class HttpLabelProvider:
    """Remote provider: POST the raw image, read a {label, score} array.

    The API key comes from the SHAPEFIND_LABELS_KEY environment variable
    unless given explicitly; a missing key fails here, at construction.
    """

    def __init__(self, endpoint: str, api_key: str | None = None,
                 timeout_s: float = DEFAULT_TIMEOUT_S, client=None):
        if not endpoint:
            raise LabelConfigError("label provider endpoint is required")
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not key:
            raise LabelConfigError(
                f"remote label provider needs {API_KEY_ENV} set")
        self.endpoint = endpoint
        self._key = key
        self._client = client or httpx.Client(timeout=timeout_s)

    def labels(self, image: bytes, content_type: str | None = None) -> list[LabelGuess]:
        headers = {
            "Content-Type": content_type or "application/octet-stream",
            "Authorization": f"Bearer {self._key}",
        }
        try:
            resp = self._client.post(self.endpoint, content=image, headers=headers)
        except httpx.HTTPError as exc:
            raise LabelError(f"label provider request failed: {exc}") from exc
        if resp.status_code // 100 != 2:
            raise LabelError(f"label provider returned status {resp.status_code}")
        try:
            rows = resp.json()
        except (json.JSONDecodeError, ValueError) as exc:
            raise LabelError(f"label provider sent non-JSON body: {exc}") from exc
        return _parse_rows(rows)


def extract_labels(image: bytes, provider) -> list[LabelGuess]:
    """Guesses for an image, best first, at most MAX_LABELS entries."""
    content_type = sniff_image(image)
    guesses = provider.labels(image, content_type)
    return sorted(guesses, key=lambda g: -g.confidence)[:MAX_LABELS]
