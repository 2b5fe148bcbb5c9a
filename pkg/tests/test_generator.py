import pytest

from svgpipe.generator import (
    GenerationInvalid,
    GenerationRequest,
    GeneratorModuleKind,
    MissingRequiredInput,
    MockGeneratorBackend,
    build_prompt,
    extract_svg,
    generate,
    request_hash,
)
from svgpipe.metrics import check_svg, preservation_check
from svgpipe.normalizer import normalize
from svgpipe.raster import RasterImage
from svgpipe.svg_core import parse_svg, serialize_svg

PARTIAL = normalize(
    parse_svg(
        '<svg viewBox="0 0 200 200"><path d="M 10 10 L 90 10 L 90 90 Z" fill="#336699"/>'
        '<path d="M 100 100 L 150 100 L 150 150 Z"/></svg>'
    )
)

VALID_ICON = (
    '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 200 200">\n'
    '  <path d="M 20 20 L 180 20 L 100 170 Z" fill="#aa2233"/>\n'
    '  <path d="M 60 60 L 140 60 L 100 120 Z" fill="#223377"/>\n'
    "</svg>\n"
)


class ScriptedBackend:
    """Returns a fixed sequence of replies, recording the seeds used."""

    provider = "scripted"

    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = []

    def complete(self, prompt, images, seed, max_tokens):
        self.calls.append((prompt, seed))
        return self.replies[min(len(self.calls), len(self.replies)) - 1]


class TestPrompts:
    def test_image2svg(self):
        req = GenerationRequest(
            kind=GeneratorModuleKind.IMAGE2SVG, images=(RasterImage.blank(16, 16),)
        )
        assert build_prompt(req) == "Convert this raster image to SVG code."

    def test_text2svg(self):
        req = GenerationRequest(kind=GeneratorModuleKind.TEXT2SVG, text="a red car")
        assert build_prompt(req) == (
            "Generate an SVG illustration from the given description: a red car"
        )

    def test_imagetext2svg(self):
        req = GenerationRequest(
            kind=GeneratorModuleKind.IMAGETEXT2SVG,
            text="a red car",
            images=(RasterImage.blank(16, 16),),
        )
        assert build_prompt(req) == (
            "Convert this raster image to SVG code with the following description: "
            "a red car"
        )

    def test_partial_template_embeds_existing_code(self):
        req = GenerationRequest(
            kind=GeneratorModuleKind.TEXT2SVG_PARTIAL,
            text="a house",
            partial_svg=PARTIAL,
        )
        prompt = build_prompt(req)
        assert prompt.startswith(
            "Please complete the SVG code so that it fully represents the following "
            "description. Make sure to include the existing SVG code in the final "
            "result.\nDescription: a house. Existing SVG code: "
        )
        assert serialize_svg(PARTIAL) in prompt

    def test_aux_text_joined_into_description(self):
        req = GenerationRequest(
            kind=GeneratorModuleKind.IMAGETEXT2SVG,
            text="a house",
            aux_text="add a roof",
            images=(RasterImage.blank(16, 16),),
        )
        assert "a house; add a roof" in build_prompt(req)

    def test_missing_required_input(self):
        with pytest.raises(MissingRequiredInput):
            build_prompt(GenerationRequest(kind=GeneratorModuleKind.TEXT2SVG_PARTIAL,
                                           text="x"))
        with pytest.raises(MissingRequiredInput):
            build_prompt(GenerationRequest(kind=GeneratorModuleKind.IMAGE2SVG))
        with pytest.raises(MissingRequiredInput):
            build_prompt(GenerationRequest(kind=GeneratorModuleKind.TEXT2SVG))


class TestExtraction:
    def test_first_span(self):
        text = f"Sure thing!\n{VALID_ICON}\ntrailing<svg>nope</svg>"
        assert extract_svg(text).startswith("<svg xmlns")

    def test_none_when_absent(self):
        assert extract_svg("no markup here") is None

    def test_case_insensitive(self):
        assert extract_svg("<SVG viewBox='0 0 1 1'></SVG>") is not None


class TestGenerate:
    def test_mock_returns_valid_normalized_document(self):
        req = GenerationRequest(kind=GeneratorModuleKind.TEXT2SVG, text="a cat", seed=5)
        doc = generate(req, MockGeneratorBackend())
        assert check_svg(serialize_svg(doc)).valid == 1
        assert normalize(doc) == doc

    def test_mock_deterministic(self):
        req = GenerationRequest(kind=GeneratorModuleKind.TEXT2SVG, text="a cat", seed=5)
        assert generate(req, MockGeneratorBackend()) == generate(req, MockGeneratorBackend())

    def test_different_seeds_differ(self):
        a = generate(
            GenerationRequest(kind=GeneratorModuleKind.TEXT2SVG, text="a cat", seed=1),
            MockGeneratorBackend(),
        )
        b = generate(
            GenerationRequest(kind=GeneratorModuleKind.TEXT2SVG, text="a cat", seed=2),
            MockGeneratorBackend(),
        )
        assert a != b

    def test_fixture_store(self):
        req = GenerationRequest(kind=GeneratorModuleKind.TEXT2SVG, text="a cat", seed=9)
        key = request_hash(build_prompt(req), req.images, req.seed)
        backend = MockGeneratorBackend(fixtures={key: VALID_ICON})
        doc = generate(req, backend)
        assert len(doc.paths) == 2
        assert serialize_svg(doc) == VALID_ICON

    def test_non_svg_replies_exhaust_retries(self):
        backend = ScriptedBackend(["no code", "still none", "sorry"])
        req = GenerationRequest(kind=GeneratorModuleKind.TEXT2SVG, text="x", seed=0)
        with pytest.raises(GenerationInvalid):
            generate(req, backend)
        assert len(backend.calls) == 3
        seeds = [seed for _, seed in backend.calls]
        assert len(set(seeds)) == 3  # fresh seed per retry

    def test_invalid_then_valid_recovers(self):
        bad = '<svg viewBox="0 0 100 100"><path d="M 0 0 L 9 9"/></svg>'
        backend = ScriptedBackend([bad, VALID_ICON])
        req = GenerationRequest(kind=GeneratorModuleKind.TEXT2SVG, text="x", seed=0)
        doc = generate(req, backend)
        assert len(backend.calls) == 2
        assert len(doc.paths) == 2

    def test_partial_preservation_enforced(self):
        # a valid reply that ignores the partial must be rejected
        backend = ScriptedBackend([VALID_ICON, VALID_ICON, VALID_ICON])
        req = GenerationRequest(
            kind=GeneratorModuleKind.TEXT2SVG_PARTIAL,
            text="finish it",
            partial_svg=PARTIAL,
            seed=0,
        )
        with pytest.raises(GenerationInvalid):
            generate(req, backend)

    def test_mock_preserves_partial(self):
        for kind in (
            GeneratorModuleKind.TEXT2SVG_PARTIAL,
            GeneratorModuleKind.IMAGETEXT2SVG_PARTIAL,
        ):
            req = GenerationRequest(
                kind=kind,
                text="finish it",
                partial_svg=PARTIAL,
                images=(RasterImage.blank(32, 32),) if kind.needs_image else (),
                seed=3,
            )
            doc = generate(req, MockGeneratorBackend())
            assert preservation_check(PARTIAL, doc)
            assert len(doc.paths) > len(PARTIAL.paths)

    def test_every_output_passes_validity(self):
        backend = MockGeneratorBackend()
        for seed in range(5):
            req = GenerationRequest(
                kind=GeneratorModuleKind.IMAGE2SVG,
                images=(RasterImage.blank(24, 24),),
                seed=seed,
            )
            doc = generate(req, backend)
            assert check_svg(serialize_svg(doc)).valid == 1

    def test_request_hash_sensitive_to_all_parts(self):
        img = RasterImage.blank(8, 8)
        base = request_hash("p", (img,), 0)
        assert request_hash("q", (img,), 0) != base
        assert request_hash("p", (), 0) != base
        assert request_hash("p", (img,), 1) != base
