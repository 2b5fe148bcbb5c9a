"""Ports to the external guidance tools: text-to-image, image editing,
captioning, and completion suggestions, plus the embedding providers.

Every operation has two routes: a JSON-over-HTTP backend, and a fully
deterministic in-process mock so pipelines can run end to end with no
network. The mocks are pure functions of their inputs and the config seed.
"""

from __future__ import annotations

import functools
import random
from dataclasses import dataclass, field

import numpy as np

from .metrics import Embedding
from .ports import (
    BackendConfig,
    ProviderMalformedResponse,
    decode_image_b64,
    derive_seed,
    encode_image_b64,
    post_json,
)
from .raster import RasterImage, render
from .svg_core import PathStyle, Rgba, SvgDocument, SvgPath, lower_to_absolute, shape_to_path

@dataclass(frozen=True)
class GuidanceBackends:
    """One backend config per guidance tool."""

    text_to_image: BackendConfig = BackendConfig()
    edit_image: BackendConfig = BackendConfig()
    caption: BackendConfig = BackendConfig()
    suggest: BackendConfig = BackendConfig()

    @classmethod
    def mock(cls, seed: int = 0, resolution: int = 224) -> "GuidanceBackends":
        cfg = BackendConfig(endpoint="mock", seed=seed, resolution=resolution)
        return cls(cfg, cfg, cfg, cfg)


TEXT_TO_IMAGE_PROMPT = "Minimalist vector-style icon of {description}. Empty background."
EDIT_IMAGE_PROMPT = (
    "Keep as many original elements as possible, but edit by adding elements "
    "to transform it into a minimalist vector-style icon: {description}"
)
CAPTION_PROMPT = "Please describe it within 50 words."
CAPTION_WORD_LIMIT = 60


@dataclass
class GuidanceBundle:
    """Per-task collection of auxiliary signals with per-field provenance.

    ``provenance`` maps a populated field name to (provider id, seed).
    """

    image_complete: RasterImage | None = None
    image_edited: RasterImage | None = None
    image_partial: RasterImage | None = None
    text_complete: str | None = None
    text_suggestion: str | None = None
    provenance: dict[str, tuple[str, int]] = field(default_factory=dict)

    _FIELDS = ("image_complete", "image_edited", "image_partial",
               "text_complete", "text_suggestion")

    def set(self, name: str, value, provider: str, seed: int) -> None:
        if name not in self._FIELDS:
            raise ValueError(f"unknown guidance field {name!r}")
        setattr(self, name, value)
        self.provenance[name] = (provider, seed)

    def populated_fields(self) -> list[str]:
        return [f for f in self._FIELDS if getattr(self, f) is not None]

    def validate(self) -> None:
        populated = self.populated_fields()
        if not populated:
            raise ValueError("guidance bundle has no populated fields")
        missing = [f for f in populated if f not in self.provenance]
        if missing:
            raise ValueError(f"guidance fields without provenance: {missing}")


# ---------------------------------------------------------------------------
# Deterministic procedural imagery
# ---------------------------------------------------------------------------

_PALETTE: tuple[tuple[int, int, int], ...] = (
    (0, 0, 0),
    (230, 57, 70),
    (29, 53, 87),
    (69, 123, 157),
    (42, 157, 143),
    (233, 196, 106),
    (244, 162, 97),
    (38, 70, 83),
    (106, 76, 147),
    (217, 4, 41),
)

_COLOR_NAMES = {
    (0, 0, 0): "black",
    (230, 57, 70): "red",
    (29, 53, 87): "navy",
    (69, 123, 157): "blue",
    (42, 157, 143): "teal",
    (233, 196, 106): "yellow",
    (244, 162, 97): "orange",
    (38, 70, 83): "slate",
    (106, 76, 147): "purple",
    (217, 4, 41): "crimson",
}


def _rng_for(*parts) -> random.Random:
    return random.Random(derive_seed(*parts))


def _shape_path(rng: random.Random) -> SvgPath:
    kind = rng.choice(("circle", "rect", "triangle"))
    color = rng.choice(_PALETTE)
    style = PathStyle(fill=Rgba(*color, 1.0))
    if kind == "circle":
        r = rng.randrange(15, 60)
        cx = rng.randrange(r, 200 - r + 1)
        cy = rng.randrange(r, 200 - r + 1)
        raw = shape_to_path("circle", {"cx": cx, "cy": cy, "r": r})
    elif kind == "rect":
        w = rng.randrange(20, 110)
        h = rng.randrange(20, 110)
        x = rng.randrange(0, 200 - w + 1)
        y = rng.randrange(0, 200 - h + 1)
        raw = shape_to_path("rect", {"x": x, "y": y, "width": w, "height": h})
    else:
        pts = [(rng.randrange(0, 201), rng.randrange(0, 201)) for _ in range(3)]
        flat = [v for p in pts for v in p]
        raw = shape_to_path("polygon", {"points": flat})
    return SvgPath(tuple(lower_to_absolute(raw)), style)


def procedural_icon(key: str, seed: int, shapes: int = 3) -> SvgDocument:
    """Deterministic icon: ``shapes`` hash-placed primitives on a 200x200
    canvas, already in canonical integer form."""
    rng = _rng_for("procedural-icon", key, seed, shapes)
    paths = tuple(_shape_path(rng) for _ in range(shapes))
    return SvgDocument((0.0, 0.0, 200.0, 200.0), paths)


def _truncate_words(text: str, limit: int) -> str:
    words = text.split()
    if len(words) <= limit:
        return text
    return " ".join(words[:limit])


# ---------------------------------------------------------------------------
# Guidance operations
# ---------------------------------------------------------------------------


def text_to_image(text: str, cfg: BackendConfig) -> RasterImage:
    """Produce a complete image for a description (the visual guidance that
    stands in for the target drawing)."""
    if not text:
        raise ValueError("text must be non-empty")
    prompt = TEXT_TO_IMAGE_PROMPT.format(description=text)
    if cfg.is_mock:
        doc = procedural_icon(text, cfg.seed)
        return render(doc, cfg.resolution)
    body = post_json(
        cfg.endpoint,
        {"prompt": prompt, "seed": cfg.seed, "resolution": cfg.resolution},
        cfg.timeout,
        cfg.retries,
        cfg.api_key,
    )
    image = _image_from_body(body)
    if image.width != image.height or image.width != cfg.resolution:
        raise ProviderMalformedResponse(
            f"expected {cfg.resolution}x{cfg.resolution} image, got "
            f"{image.width}x{image.height}"
        )
    return image


def edit_image(image: RasterImage, text: str, cfg: BackendConfig) -> RasterImage:
    """Edit an image toward a description by adding elements; existing content
    is never erased (mock guarantee; remote backends must keep dimensions)."""
    prompt = EDIT_IMAGE_PROMPT.format(description=text)
    if cfg.is_mock:
        overlay_doc = procedural_icon(f"edit:{text}:{image.content_hash()}", cfg.seed, shapes=2)
        side = max(image.width, image.height, 16)
        overlay = render(overlay_doc, side).pixels[: image.height, : image.width]
        keep = (image.pixels != 255).any(axis=2)
        merged = overlay.copy()
        merged[keep] = image.pixels[keep]
        return RasterImage(merged)
    body = post_json(
        cfg.endpoint,
        {"png_base64": encode_image_b64(image), "prompt": prompt},
        cfg.timeout,
        cfg.retries,
        cfg.api_key,
    )
    edited = _image_from_body(body)
    if (edited.width, edited.height) != (image.width, image.height):
        raise ProviderMalformedResponse(
            f"edit changed dimensions: {image.width}x{image.height} -> "
            f"{edited.width}x{edited.height}"
        )
    return edited


def caption_image(image: RasterImage, cfg: BackendConfig) -> str:
    """Describe an image; captions are clamped to 60 words."""
    if cfg.is_mock:
        return _mock_caption(image)
    body = post_json(
        cfg.endpoint,
        {"png_base64": encode_image_b64(image), "prompt": CAPTION_PROMPT},
        cfg.timeout,
        cfg.retries,
        cfg.api_key,
    )
    text = _text_from_body(body)
    return _truncate_words(text, CAPTION_WORD_LIMIT)


def suggest_completion(text: str, partial_image: RasterImage, cfg: BackendConfig) -> str:
    """Suggest what to add to a partial drawing to satisfy the description."""
    if not text:
        raise ValueError("text must be non-empty")
    if cfg.is_mock:
        return f"add remaining elements to match: {text}"
    body = post_json(
        cfg.endpoint,
        {"prompt": text, "png_base64": encode_image_b64(partial_image)},
        cfg.timeout,
        cfg.retries,
        cfg.api_key,
    )
    suggestion = _text_from_body(body)
    if not suggestion:
        raise ProviderMalformedResponse("empty suggestion")
    return suggestion


def _image_from_body(body: dict) -> RasterImage:
    data = body.get("png_base64")
    if not isinstance(data, str):
        raise ProviderMalformedResponse("response lacks png_base64")
    return decode_image_b64(data)


def _text_from_body(body: dict) -> str:
    text = body.get("text")
    if not isinstance(text, str):
        raise ProviderMalformedResponse("response lacks text")
    return text


def _mock_caption(image: RasterImage) -> str:
    px = image.pixels
    non_white = (px != 255).any(axis=2)
    count = int(non_white.sum())
    if count == 0:
        return "blank white canvas"
    coverage_pct = round(100.0 * count / (image.width * image.height))
    colors = px[non_white].reshape(-1, 3).astype(np.int64)
    palette = np.array(_PALETTE, dtype=np.int64)
    dist = ((colors[:, None, :] - palette[None, :, :]) ** 2).sum(axis=2)
    nearest = np.bincount(dist.argmin(axis=1), minlength=len(_PALETTE))
    dominant = _COLOR_NAMES[_PALETTE[int(nearest.argmax())]]
    return (
        f"a minimalist icon with {dominant} shapes covering "
        f"{max(coverage_pct, 1)} percent of the canvas"
    )


# ---------------------------------------------------------------------------
# Embedding providers
# ---------------------------------------------------------------------------


def _byte_histogram(pixels: np.ndarray) -> np.ndarray:
    counts = np.bincount(pixels.reshape(-1), minlength=256).astype(np.float64)
    return counts


@functools.lru_cache(maxsize=4096)
def _mock_text_vector(text: str) -> bytes:
    icon = render(procedural_icon(text, seed=0), 64)
    return _byte_histogram(icon.pixels).tobytes()


class MockEmbedder:
    """Byte-histogram embeddings: images map to their 256-bin byte histogram,
    texts map to the histogram of their procedurally generated icon. Both live
    in the same space, so text/image cosines are meaningful and deterministic."""

    provider = "mock-histogram"

    def embed_image(self, image: RasterImage) -> Embedding:
        return Embedding(_byte_histogram(image.pixels), self.provider)

    def embed_text(self, text: str) -> Embedding:
        vec = np.frombuffer(_mock_text_vector(text), dtype=np.float64)
        return Embedding(vec, self.provider)


class HttpEmbedder:
    """JSON-over-HTTP embedding provider.

    Wire contract: request {kind: "text"|"image", payload: text | base64 PNG},
    response {vector: [float, ...]}.
    """

    def __init__(self, url: str, timeout: float = 30.0, retries: int = 2,
                 api_key: str | None = None):
        self.url = url
        self.timeout = timeout
        self.retries = retries
        self.api_key = api_key
        self.provider = f"http:{url}"

    def _embed(self, kind: str, payload: str) -> Embedding:
        body = post_json(self.url, {"kind": kind, "payload": payload},
                         self.timeout, self.retries, self.api_key)
        vector = body.get("vector")
        if not isinstance(vector, list) or not vector:
            raise ProviderMalformedResponse("response lacks a vector")
        try:
            return Embedding(np.asarray(vector, dtype=np.float64), self.provider)
        except ValueError as e:
            raise ProviderMalformedResponse(f"bad embedding vector: {e}") from e

    def embed_text(self, text: str) -> Embedding:
        return self._embed("text", text)

    def embed_image(self, image: RasterImage) -> Embedding:
        return self._embed("image", encode_image_b64(image))
