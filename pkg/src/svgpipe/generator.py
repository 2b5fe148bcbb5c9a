"""SVG generator ports: prompt templates per module kind, validity-gated
generation with retries, and a deterministic mock backend.

A backend is anything that turns (prompt, images, seed) into text; the first
well-formed <svg>...</svg> span in the reply is taken as the candidate code.
Candidates must pass the structural check, and for partial-completion kinds
must keep the given partial document as an exact prefix, otherwise the
request is retried with a fresh seed and ultimately rejected.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Mapping, Protocol, runtime_checkable

from .metrics import check_svg, preservation_check
from .normalizer import normalize
from .ports import derive_seed, post_json, BackendConfig, encode_image_b64, ProviderMalformedResponse
from .raster import RasterImage
from .svg_core import SvgDocument, parse_svg, serialize_svg
from . import guidance


class MissingRequiredInput(ValueError):
    pass


class GenerationInvalid(Exception):
    """All attempts produced code that failed validation."""


MAX_ATTEMPTS = 3  # one try plus two fresh-seed retries


class GeneratorModuleKind(enum.Enum):
    IMAGE2SVG = "image2svg"
    TEXT2SVG = "text2svg"
    IMAGETEXT2SVG = "imagetext2svg"
    TEXT2SVG_PARTIAL = "text2svg_partial"
    IMAGETEXT2SVG_PARTIAL = "imagetext2svg_partial"

    @property
    def needs_image(self) -> bool:
        return self in (
            GeneratorModuleKind.IMAGE2SVG,
            GeneratorModuleKind.IMAGETEXT2SVG,
            GeneratorModuleKind.IMAGETEXT2SVG_PARTIAL,
        )

    @property
    def needs_text(self) -> bool:
        return self is not GeneratorModuleKind.IMAGE2SVG

    @property
    def needs_partial(self) -> bool:
        return self in (
            GeneratorModuleKind.TEXT2SVG_PARTIAL,
            GeneratorModuleKind.IMAGETEXT2SVG_PARTIAL,
        )


PROMPT_TEMPLATES: Mapping[GeneratorModuleKind, str] = {
    GeneratorModuleKind.IMAGE2SVG: "Convert this raster image to SVG code.",
    GeneratorModuleKind.TEXT2SVG: (
        "Generate an SVG illustration from the given description: {description}"
    ),
    GeneratorModuleKind.IMAGETEXT2SVG: (
        "Convert this raster image to SVG code with the following description: "
        "{description}"
    ),
    GeneratorModuleKind.TEXT2SVG_PARTIAL: (
        "Please complete the SVG code so that it fully represents the following "
        "description. Make sure to include the existing SVG code in the final "
        "result.\nDescription: {description}. Existing SVG code: {partial}"
    ),
    GeneratorModuleKind.IMAGETEXT2SVG_PARTIAL: (
        "Please complete the SVG code so that it fully represents the following "
        "description. Make sure to include the existing SVG code in the final "
        "result.\nDescription: {description}. Existing SVG code: {partial}"
    ),
}


@dataclass(frozen=True)
class GenerationRequest:
    """One generation call: the module kind plus whatever it needs.

    ``aux_text`` carries a secondary description (caption or suggestion) for
    the image+text module; it is folded into the prompt's description slot.
    """

    kind: GeneratorModuleKind
    text: str | None = None
    images: tuple[RasterImage, ...] = ()
    partial_svg: SvgDocument | None = None
    aux_text: str | None = None
    seed: int = 0

    def validate(self) -> None:
        missing = []
        if self.kind.needs_text and not self.text:
            missing.append("text")
        if self.kind.needs_image and not self.images:
            missing.append("image")
        if self.kind.needs_partial and self.partial_svg is None:
            missing.append("partial_svg")
        if missing:
            raise MissingRequiredInput(
                f"{self.kind.value} requires {', '.join(missing)}"
            )


def build_prompt(req: GenerationRequest) -> str:
    """Render the module's prompt template with the request's inputs."""
    req.validate()
    template = PROMPT_TEMPLATES[req.kind]
    description = req.text or ""
    if req.aux_text:
        description = f"{description}; {req.aux_text}" if description else req.aux_text
    partial = serialize_svg(req.partial_svg) if req.partial_svg is not None else ""
    return template.format(description=description, partial=partial)


@runtime_checkable
class GeneratorBackendPort(Protocol):
    provider: str

    def complete(self, prompt: str, images: tuple[RasterImage, ...], seed: int,
                 max_tokens: int) -> str: ...


def request_hash(prompt: str, images: tuple[RasterImage, ...], seed: int) -> str:
    """Content address for one backend call (used to key canned fixtures)."""
    import hashlib

    h = hashlib.sha256()
    h.update(prompt.encode("utf-8"))
    for img in images:
        h.update(bytes.fromhex(img.content_hash()))
    h.update(str(seed).encode("ascii"))
    return h.hexdigest()


_SVG_SPAN_RE = re.compile(r"<svg\b.*?</svg>", re.DOTALL | re.IGNORECASE)


def extract_svg(text: str) -> str | None:
    """First <svg>...</svg> span in a backend reply, or None."""
    m = _SVG_SPAN_RE.search(text)
    return m.group(0) if m else None


class HttpGeneratorBackend:
    """JSON-over-HTTP model server: {prompt, images, seed, max_tokens} -> {text}."""

    def __init__(self, cfg: BackendConfig):
        self.cfg = cfg
        self.provider = f"http:{cfg.endpoint}"

    def complete(self, prompt, images, seed, max_tokens) -> str:
        body = post_json(
            self.cfg.endpoint,
            {
                "prompt": prompt,
                "images": [encode_image_b64(i) for i in images],
                "seed": seed,
                "max_tokens": max_tokens,
            },
            self.cfg.timeout,
            self.cfg.retries,
            self.cfg.api_key,
        )
        text = body.get("text")
        if not isinstance(text, str):
            raise ProviderMalformedResponse("response lacks text")
        return text


_EXISTING_SVG_RE = re.compile(r"Existing SVG code:\s*(<svg\b.*?</svg>)", re.DOTALL)


class MockGeneratorBackend:
    """Deterministic stand-in model.

    Replies are keyed on the request hash: if a canned fixture exists for the
    hash it is returned verbatim, otherwise a procedural icon is synthesized.
    When the prompt embeds existing SVG code the reply keeps those paths as a
    prefix and draws additional ones, mimicking a completion-tuned model.
    """

    provider = "mock-generator"

    def __init__(self, fixtures: Mapping[str, str] | None = None):
        self.fixtures = dict(fixtures or {})

    def complete(self, prompt, images, seed, max_tokens) -> str:
        key = request_hash(prompt, tuple(images), seed)
        if key in self.fixtures:
            return self.fixtures[key]
        existing = _EXISTING_SVG_RE.search(prompt)
        rng_key = f"{key}:gen"
        if existing:
            base = normalize(parse_svg(existing.group(1), strict=False))
            extra = guidance.procedural_icon(rng_key, seed, shapes=1 + seed % 2)
            doc = SvgDocument(base.viewbox, base.paths + extra.paths)
        else:
            doc = guidance.procedural_icon(rng_key, seed, shapes=2 + seed % 3)
        return f"Here is the icon.\n{serialize_svg(doc)}\nDone."


def generate(
    req: GenerationRequest,
    backend: GeneratorBackendPort,
    max_tokens: int = 2048,
) -> SvgDocument:
    """Run one generation request through a backend and return the parsed,
    normalized document. Invalid output (structural failure, or a broken
    partial-prefix for completion kinds) triggers a fresh-seed retry; after
    MAX_ATTEMPTS failures the request is rejected."""
    req.validate()
    prompt = build_prompt(req)
    reasons: list[str] = []
    for attempt in range(MAX_ATTEMPTS):
        seed = req.seed if attempt == 0 else derive_seed(req.seed, "retry", attempt)
        reply = backend.complete(prompt, req.images, seed, max_tokens)
        code = extract_svg(reply)
        if code is None:
            reasons.append(f"attempt {attempt}: no svg code block in reply")
            continue
        report = check_svg(code)
        if not report.valid:
            reasons.append(f"attempt {attempt}: {'; '.join(report.diagnostics)}")
            continue
        doc = normalize(parse_svg(code, strict=True))
        if req.kind.needs_partial and not preservation_check(req.partial_svg, doc):
            reasons.append(f"attempt {attempt}: partial prefix not preserved")
            continue
        return doc
    raise GenerationInvalid("; ".join(reasons))
