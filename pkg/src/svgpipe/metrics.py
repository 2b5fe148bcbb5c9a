"""Numerical guidance: structural validation, image similarity scores,
embedding-based scores, exact-prefix preservation, and argmax selection.

SSIM and MSE are computed here; text/image embedding scores go through an
EmbeddingPort so any provider (or a deterministic mock) can back them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable
import xml.etree.ElementTree as ET

import numpy as np

from . import svg_core
from .normalizer import TARGET_VIEWBOX_SIDE
from .raster import RasterImage, render
from .svg_core import RESTRICTED_LETTERS, SvgDocument, SvgError, serialize_path_element


class DimensionMismatch(ValueError):
    pass


class TooSmall(ValueError):
    pass


class EmptyCandidateSet(ValueError):
    pass


# Metrics where a smaller value means a better candidate.
LOWER_IS_BETTER = {"mse", "lpips", "fid"}

VALIDATION_RESOLUTION = 224


@dataclass(frozen=True)
class Score:
    """One metric value for one candidate, tagged with what it was scored
    against and (optionally) which provider produced the embeddings."""

    metric: str
    value: float
    reference: str  # "text" | "image"
    provider: str | None = None

    @property
    def higher_is_better(self) -> bool:
        return self.metric not in LOWER_IS_BETTER


@dataclass(frozen=True)
class ValidityReport:
    """Binary conformance verdict with coded findings.

    ``blank_render`` is a warning, not a failure: the code is well-formed but
    paints nothing.
    """

    valid: int
    diagnostics: tuple[str, ...] = ()
    blank_render: bool = False

    def __post_init__(self):
        if self.valid not in (0, 1):
            raise ValueError("valid must be 0 or 1")
        if self.valid == 0 and not self.diagnostics:
            raise ValueError("invalid reports need at least one diagnostic")


@dataclass(frozen=True)
class Embedding:
    """Unit-norm embedding vector plus the provider that produced it."""

    vector: np.ndarray
    provider: str

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float64).reshape(-1)
        norm = float(np.linalg.norm(vec))
        if not np.isfinite(norm) or norm == 0.0:
            raise ValueError("embedding vector must be finite and non-zero")
        if abs(norm - 1.0) > 1e-6:
            vec = vec / norm
        vec.flags.writeable = False
        object.__setattr__(self, "vector", vec)


@runtime_checkable
class EmbeddingPort(Protocol):
    provider: str

    def embed_text(self, text: str) -> Embedding: ...

    def embed_image(self, image: RasterImage) -> Embedding: ...


# ---------------------------------------------------------------------------
# Structural validation
# ---------------------------------------------------------------------------


def _raw_command_letters(code: str) -> set[str]:
    letters: set[str] = set()
    try:
        root = ET.fromstring(code)
    except ET.ParseError:
        return letters
    for elem in root.iter():
        if elem.tag.rsplit("}", 1)[-1] == "path":
            for cmd in svg_core.parse_path_data(elem.get("d", "")):
                letters.add(cmd.letter)
    return letters


def check_svg(code: str) -> ValidityReport:
    """Conformance check for generated SVG code.

    Valid means: strict parse succeeds, path data stays inside the absolute
    {M, L, C, Q, A, Z} alphabet, the viewbox is the canonical 200x200 square,
    and the document renders. An all-white render is flagged but still valid.
    """
    diagnostics: list[str] = []
    doc = None
    try:
        doc = svg_core.parse_svg(code, strict=True)
    except SvgError as e:
        diagnostics.append(f"{type(e).__name__}: {e}")

    if doc is not None:
        try:
            for letter in sorted(_raw_command_letters(code)):
                if letter not in RESTRICTED_LETTERS:
                    diagnostics.append(f"DisallowedCommand: {letter}")
        except SvgError as e:  # unreachable after a strict parse, kept for safety
            diagnostics.append(f"{type(e).__name__}: {e}")
        side = TARGET_VIEWBOX_SIDE
        if doc.viewbox != (0.0, 0.0, side, side):
            diagnostics.append(
                "NonCanonicalViewbox: expected 0 0 200 200, got "
                + " ".join(svg_core.format_number(v) for v in doc.viewbox)
            )

    blank = False
    if doc is not None and not diagnostics:
        try:
            image = render(doc, VALIDATION_RESOLUTION)
        except Exception as e:  # noqa: BLE001 - any render failure invalidates
            diagnostics.append(f"RenderFailed: {e}")
        else:
            blank = bool((image.pixels == 255).all())

    return ValidityReport(
        valid=0 if diagnostics else 1,
        diagnostics=tuple(diagnostics),
        blank_render=blank,
    )


# ---------------------------------------------------------------------------
# Pixel metrics
# ---------------------------------------------------------------------------


def _require_same_shape(a: RasterImage, b: RasterImage) -> None:
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionMismatch(
            f"{a.width}x{a.height} vs {b.width}x{b.height}"
        )


def mse(a: RasterImage, b: RasterImage) -> Score:
    """Mean squared error over all channels, intensities scaled to [0, 1]."""
    _require_same_shape(a, b)
    diff = (a.pixels.astype(np.float64) - b.pixels.astype(np.float64)) / 255.0
    return Score(metric="mse", value=float(np.mean(diff * diff)), reference="image")


def _luma(image: RasterImage) -> np.ndarray:
    px = image.pixels.astype(np.float64)
    return 0.299 * px[:, :, 0] + 0.587 * px[:, :, 1] + 0.114 * px[:, :, 2]


def _gaussian_kernel(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return k / k.sum()


def _filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # separable windowed mean, valid region only (no padding)
    from numpy.lib.stride_tricks import sliding_window_view

    size = kernel.size
    tmp = sliding_window_view(img, size, axis=1) @ kernel
    return sliding_window_view(tmp, size, axis=0) @ kernel


_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_C1 = (0.01 * 255.0) ** 2
_SSIM_C2 = (0.03 * 255.0) ** 2


def ssim(a: RasterImage, b: RasterImage) -> Score:
    """Mean structural similarity on luma with an 11x11 Gaussian window."""
    _require_same_shape(a, b)
    if min(a.width, a.height) < _SSIM_WINDOW:
        raise TooSmall(f"images must be at least {_SSIM_WINDOW} pixels per side")
    x = _luma(a)
    y = _luma(b)
    k = _gaussian_kernel(_SSIM_WINDOW, _SSIM_SIGMA)
    ux = _filter_valid(x, k)
    uy = _filter_valid(y, k)
    uxx = _filter_valid(x * x, k)
    uyy = _filter_valid(y * y, k)
    uxy = _filter_valid(x * y, k)
    vx = uxx - ux * ux
    vy = uyy - uy * uy
    cxy = uxy - ux * uy
    smap = ((2.0 * ux * uy + _SSIM_C1) * (2.0 * cxy + _SSIM_C2)) / (
        (ux * ux + uy * uy + _SSIM_C1) * (vx + vy + _SSIM_C2)
    )
    return Score(metric="ssim", value=float(smap.mean()), reference="image")


# ---------------------------------------------------------------------------
# Embedding-backed scores
# ---------------------------------------------------------------------------


def cosine(a: Embedding, b: Embedding) -> float:
    if a.vector.shape != b.vector.shape:
        raise DimensionMismatch(
            f"embedding dims differ: {a.vector.shape} vs {b.vector.shape}"
        )
    return float(np.clip(np.dot(a.vector, b.vector), -1.0, 1.0))


def clip_score(text: str, image: RasterImage, embedder: EmbeddingPort) -> Score:
    """100 * max(0, cos) between the text and image embeddings."""
    te = embedder.embed_text(text)
    ie = embedder.embed_image(image)
    value = 100.0 * max(0.0, cosine(te, ie))
    return Score(metric="clipscore", value=value, reference="text",
                 provider=embedder.provider)


def dino_similarity(a: RasterImage, b: RasterImage, embedder: EmbeddingPort) -> Score:
    """Cosine similarity of the two image embeddings, in [-1, 1]."""
    value = cosine(embedder.embed_image(a), embedder.embed_image(b))
    return Score(metric="dino", value=value, reference="image",
                 provider=embedder.provider)


# ---------------------------------------------------------------------------
# Preservation and selection
# ---------------------------------------------------------------------------


def preservation_check(partial: SvgDocument, output: SvgDocument) -> bool:
    """True iff the output starts with the partial document's paths, verbatim.

    Comparison is on canonical per-path serialization, so any coordinate,
    style, or ordering change breaks it.
    """
    if len(output.paths) < len(partial.paths):
        return False
    return all(
        serialize_path_element(p) == serialize_path_element(q)
        for p, q in zip(partial.paths, output.paths)
    )


def select_best(scores: Sequence[Score]) -> int:
    """Index of the best score; ties go to the lowest index."""
    if not scores:
        raise EmptyCandidateSet("no candidates to select from")
    metrics = {s.metric for s in scores}
    if len(metrics) != 1:
        raise ValueError(f"scores mix metrics: {sorted(metrics)}")
    higher = scores[0].higher_is_better
    best = 0
    for i, s in enumerate(scores[1:], start=1):
        if (s.value > scores[best].value) if higher else (s.value < scores[best].value):
            best = i
    return best
