"""The four task pipelines: assemble guidance, fan out to generator modules,
score the candidates, and select the output document.

Text-driven tasks select by the text-image embedding score; image-driven
tasks select by structural similarity against the visual reference. With the
mock stack every pipeline is a pure function of (query, seed).
"""

from __future__ import annotations

import enum
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .generator import (
    GenerationInvalid,
    GenerationRequest,
    GeneratorBackendPort,
    GeneratorModuleKind,
    HttpGeneratorBackend,
    MockGeneratorBackend,
    generate,
)
from .guidance import (
    GuidanceBackends,
    GuidanceBundle,
    HttpEmbedder,
    MockEmbedder,
    caption_image,
    edit_image,
    suggest_completion,
    text_to_image,
)
from .metrics import (
    EmbeddingPort,
    Score,
    ValidityReport,
    clip_score,
    select_best,
    ssim,
)
from .normalizer import normalize
from .ports import BackendConfig, derive_seed
from .raster import RasterImage, render
from .svg_core import SvgDocument, serialize_svg


class AllCandidatesInvalid(Exception):
    """Every module's generation failed validation for this query."""


class Task(enum.Enum):
    TEXT_TO_SVG = "text_to_svg"
    IMAGE_TO_SVG = "image_to_svg"
    PARTIALSVG_TO_SVG = "partialsvg_to_svg"
    PARTIALIMAGE_TO_SVG = "partialimage_to_svg"


_TASK_NEEDS = {
    Task.TEXT_TO_SVG: ("text",),
    Task.IMAGE_TO_SVG: ("image",),
    Task.PARTIALSVG_TO_SVG: ("text", "partial_svg"),
    Task.PARTIALIMAGE_TO_SVG: ("text", "image"),
}


@dataclass(frozen=True)
class TaskQuery:
    task: Task
    text: str | None = None
    image: RasterImage | None = None
    partial_svg: SvgDocument | None = None

    def validate(self) -> None:
        for name in _TASK_NEEDS[self.task]:
            if getattr(self, name) is None:
                raise ValueError(f"{self.task.value} query requires {name}")


@dataclass(frozen=True)
class Candidate:
    """One generated candidate with full provenance.

    ``document`` is None when the module's generation was rejected; failed
    candidates keep their slot so the set order stays stable."""

    module: GeneratorModuleKind
    document: SvgDocument | None
    score: Score | None
    validity: ValidityReport
    render: RasterImage | None = None


@dataclass(frozen=True)
class TaskResult:
    task: Task
    candidates: tuple[Candidate, ...]
    chosen_index: int
    guidance: GuidanceBundle
    output: SvgDocument

    @property
    def chosen(self) -> Candidate:
        return self.candidates[self.chosen_index]


@dataclass(frozen=True)
class ServiceStack:
    """Everything a workflow needs to talk to: guidance tools, an embedding
    provider, and a generator backend."""

    guidance: GuidanceBackends
    embedder: EmbeddingPort
    generator: GeneratorBackendPort
    resolution: int = 224

    @classmethod
    def mock(cls, seed: int = 0, resolution: int = 224) -> "ServiceStack":
        backends = GuidanceBackends.mock(seed=seed, resolution=resolution)
        return cls(backends, MockEmbedder(), MockGeneratorBackend(), resolution)


def _guidance_cfg(stack: ServiceStack, seed: int, op: str, field_name: str) -> BackendConfig:
    base: BackendConfig = getattr(stack.guidance, op)
    return replace(base, seed=derive_seed(seed, "guidance", field_name))


def _generate_candidate(
    stack: ServiceStack, seed: int, index: int, kind: GeneratorModuleKind, **fields
) -> Candidate:
    req = GenerationRequest(
        kind=kind, seed=derive_seed(seed, "candidate", index), **fields
    )
    try:
        doc = generate(req, stack.generator)
    except GenerationInvalid as e:
        report = ValidityReport(valid=0, diagnostics=(f"GenerationInvalid: {e}",))
        return Candidate(kind, None, None, report)
    image = render(doc, stack.resolution)
    report = ValidityReport(
        valid=1, blank_render=bool((image.pixels == 255).all())
    )
    return Candidate(kind, doc, None, report, render=image)


def _finalize(task: Task, candidates: list[Candidate], bundle: GuidanceBundle,
              scorer) -> TaskResult:
    bundle.validate()
    scored: list[Candidate] = []
    valid_indices: list[int] = []
    valid_scores: list[Score] = []
    for i, cand in enumerate(candidates):
        if cand.document is None:
            scored.append(cand)
            continue
        score = scorer(cand)
        scored.append(replace(cand, score=score))
        valid_indices.append(i)
        valid_scores.append(score)
    if not valid_indices:
        failures = "; ".join(
            f"{c.module.value}: {' / '.join(c.validity.diagnostics)}" for c in scored
        )
        raise AllCandidatesInvalid(failures)
    chosen = valid_indices[select_best(valid_scores)]
    return TaskResult(
        task=task,
        candidates=tuple(scored),
        chosen_index=chosen,
        guidance=bundle,
        output=scored[chosen].document,
    )


def run_text_to_svg(query: TaskQuery, stack: ServiceStack, seed: int = 0) -> TaskResult:
    """Description in, document out; three candidates scored against the text."""
    query.validate()
    if query.task is not Task.TEXT_TO_SVG:
        raise ValueError(f"wrong task for this pipeline: {query.task.value}")
    cfg = _guidance_cfg(stack, seed, "text_to_image", "image_complete")
    image_complete = text_to_image(query.text, cfg)
    bundle = GuidanceBundle()
    bundle.set("image_complete", image_complete, cfg.endpoint, cfg.seed)

    candidates = [
        _generate_candidate(
            stack, seed, 0, GeneratorModuleKind.IMAGE2SVG, images=(image_complete,)
        ),
        _generate_candidate(
            stack, seed, 1, GeneratorModuleKind.TEXT2SVG, text=query.text
        ),
        _generate_candidate(
            stack, seed, 2, GeneratorModuleKind.IMAGETEXT2SVG,
            text=query.text, images=(image_complete,),
        ),
    ]
    scorer = lambda c: clip_score(query.text, c.render, stack.embedder)  # noqa: E731
    return _finalize(Task.TEXT_TO_SVG, candidates, bundle, scorer)


def run_image_to_svg(query: TaskQuery, stack: ServiceStack, seed: int = 0) -> TaskResult:
    """Image in, document out; two candidates scored by similarity to it."""
    query.validate()
    if query.task is not Task.IMAGE_TO_SVG:
        raise ValueError(f"wrong task for this pipeline: {query.task.value}")
    reference = query.image.resample_letterbox(stack.resolution, stack.resolution)
    cfg = _guidance_cfg(stack, seed, "caption", "text_complete")
    text_complete = caption_image(query.image, cfg)
    bundle = GuidanceBundle()
    bundle.set("text_complete", text_complete, cfg.endpoint, cfg.seed)

    candidates = [
        _generate_candidate(
            stack, seed, 0, GeneratorModuleKind.IMAGE2SVG, images=(query.image,)
        ),
        _generate_candidate(
            stack, seed, 1, GeneratorModuleKind.IMAGETEXT2SVG,
            text=text_complete, images=(query.image,),
        ),
    ]
    scorer = lambda c: ssim(c.render, reference)  # noqa: E731
    return _finalize(Task.IMAGE_TO_SVG, candidates, bundle, scorer)


def run_partialsvg_to_svg(query: TaskQuery, stack: ServiceStack, seed: int = 0) -> TaskResult:
    """Description plus existing paths in; two completion candidates, both
    keeping the existing paths verbatim, scored against the text."""
    query.validate()
    if query.task is not Task.PARTIALSVG_TO_SVG:
        raise ValueError(f"wrong task for this pipeline: {query.task.value}")
    partial = normalize(query.partial_svg)
    image_partial = render(partial, stack.resolution)
    cfg = _guidance_cfg(stack, seed, "edit_image", "image_edited")
    image_edited = edit_image(image_partial, query.text, cfg)
    bundle = GuidanceBundle()
    bundle.set("image_partial", image_partial, "local-render", seed)
    bundle.set("image_edited", image_edited, cfg.endpoint, cfg.seed)

    candidates = [
        _generate_candidate(
            stack, seed, 0, GeneratorModuleKind.TEXT2SVG_PARTIAL,
            text=query.text, partial_svg=partial,
        ),
        _generate_candidate(
            stack, seed, 1, GeneratorModuleKind.IMAGETEXT2SVG_PARTIAL,
            text=query.text, images=(image_edited,), partial_svg=partial,
        ),
    ]
    scorer = lambda c: clip_score(query.text, c.render, stack.embedder)  # noqa: E731
    return _finalize(Task.PARTIALSVG_TO_SVG, candidates, bundle, scorer)


def run_partialimage_to_svg(query: TaskQuery, stack: ServiceStack, seed: int = 0) -> TaskResult:
    """Description plus a partial drawing's image in; three candidates scored
    by similarity to the edited image (the only complete visual target this
    query shape offers)."""
    query.validate()
    if query.task is not Task.PARTIALIMAGE_TO_SVG:
        raise ValueError(f"wrong task for this pipeline: {query.task.value}")
    image_partial = query.image
    edit_cfg = _guidance_cfg(stack, seed, "edit_image", "image_edited")
    suggest_cfg = _guidance_cfg(stack, seed, "suggest", "text_suggestion")
    # the edit and the suggestion depend only on the query; fetch them together
    with ThreadPoolExecutor(max_workers=2) as pool:
        edited_f = pool.submit(edit_image, image_partial, query.text, edit_cfg)
        suggestion_f = pool.submit(suggest_completion, query.text, image_partial, suggest_cfg)
        image_edited = edited_f.result()
        text_suggestion = suggestion_f.result()
    bundle = GuidanceBundle()
    bundle.set("image_partial", image_partial, "query", seed)
    bundle.set("image_edited", image_edited, edit_cfg.endpoint, edit_cfg.seed)
    bundle.set("text_suggestion", text_suggestion, suggest_cfg.endpoint, suggest_cfg.seed)

    candidates = [
        _generate_candidate(
            stack, seed, 0, GeneratorModuleKind.IMAGE2SVG, images=(image_edited,)
        ),
        _generate_candidate(
            stack, seed, 1, GeneratorModuleKind.IMAGETEXT2SVG,
            text=query.text, images=(image_edited,),
        ),
        _generate_candidate(
            stack, seed, 2, GeneratorModuleKind.IMAGETEXT2SVG,
            text=query.text, images=(image_partial,), aux_text=text_suggestion,
        ),
    ]

    def scorer(c: Candidate) -> Score:
        rendered = c.render
        if (rendered.width, rendered.height) != (image_edited.width, image_edited.height):
            rendered = rendered.resample_letterbox(image_edited.width, image_edited.height)
        return ssim(rendered, image_edited)

    return _finalize(Task.PARTIALIMAGE_TO_SVG, candidates, bundle, scorer)


_RUNNERS = {
    Task.TEXT_TO_SVG: run_text_to_svg,
    Task.IMAGE_TO_SVG: run_image_to_svg,
    Task.PARTIALSVG_TO_SVG: run_partialsvg_to_svg,
    Task.PARTIALIMAGE_TO_SVG: run_partialimage_to_svg,
}


def run_task(query: TaskQuery, stack: ServiceStack, seed: int = 0) -> TaskResult:
    return _RUNNERS[query.task](query, stack, seed)


# ---------------------------------------------------------------------------
# Batch driver
# ---------------------------------------------------------------------------


def load_queries(path: str | Path, default_task: Task | None = None) -> list[TaskQuery]:
    """Read a JSONL query file; image and partial-SVG fields are file paths
    relative to the query file."""
    from .svg_core import parse_svg

    path = Path(path)
    base = path.parent
    queries: list[TaskQuery] = []
    with path.open("r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, 1):
            raw = raw.strip()
            if not raw:
                continue
            obj = json.loads(raw)
            task_name = obj.get("task")
            task = Task(task_name) if task_name else default_task
            if task is None:
                raise ValueError(f"line {line_no}: no task given and no default")
            if default_task is not None and task is not default_task:
                raise ValueError(
                    f"line {line_no}: task {task.value} does not match "
                    f"requested {default_task.value}"
                )
            image = None
            if obj.get("image"):
                image = RasterImage.load(base / obj["image"])
            partial = None
            if obj.get("partial_svg"):
                text = (base / obj["partial_svg"]).read_text(encoding="utf-8")
                partial = normalize(parse_svg(text, strict=False))
            queries.append(TaskQuery(task=task, text=obj.get("text"),
                                     image=image, partial_svg=partial))
    return queries


def _result_record(index: int, query: TaskQuery, result: TaskResult | None,
                   error: str | None, artifact_dir: str) -> dict:
    record: dict = {"index": index, "task": query.task.value, "artifacts": artifact_dir}
    if error is not None:
        record["status"] = "failed"
        record["error"] = error
        return record
    record["status"] = "ok"
    record["chosen_index"] = result.chosen_index
    chosen_score = result.chosen.score
    record["metric"] = chosen_score.metric
    record["score"] = chosen_score.value
    if chosen_score.provider:
        record["provider"] = chosen_score.provider
    record["candidates"] = [
        {
            "module": c.module.value,
            "valid": c.validity.valid,
            "score": None if c.score is None else c.score.value,
        }
        for c in result.candidates
    ]
    record["guidance"] = {
        name: {"provider": prov, "seed": s}
        for name, (prov, s) in sorted(result.guidance.provenance.items())
    }
    record["output"] = serialize_svg(result.output)
    return record


def _write_artifacts(dir_path: Path, result: TaskResult) -> None:
    dir_path.mkdir(parents=True, exist_ok=True)
    for name in result.guidance.populated_fields():
        value = getattr(result.guidance, name)
        if isinstance(value, RasterImage):
            value.save(dir_path / f"{name}.png")
        else:
            (dir_path / f"{name}.txt").write_text(value, encoding="utf-8")
    rows = []
    for i, cand in enumerate(result.candidates):
        if cand.document is not None:
            (dir_path / f"candidate_{i}.svg").write_text(
                serialize_svg(cand.document), encoding="utf-8"
            )
        if cand.render is not None:
            cand.render.save(dir_path / f"candidate_{i}.png")
        rows.append(
            {
                "candidate": i,
                "module": cand.module.value,
                "valid": cand.validity.valid,
                "score": None if cand.score is None else cand.score.value,
                "chosen": i == result.chosen_index,
            }
        )
    (dir_path / "scores.json").write_text(
        json.dumps(rows, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (dir_path / "chosen.svg").write_text(
        serialize_svg(result.output), encoding="utf-8"
    )


@dataclass
class BatchSummary:
    total: int
    failed: int
    mean_scores: dict[str, float]
    results_path: str

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "failed": self.failed,
            "mean_scores": {k: v for k, v in sorted(self.mean_scores.items())},
            "results": self.results_path,
        }


def run_batch(
    queries: list[TaskQuery],
    stack: ServiceStack,
    out_dir: str | Path,
    seed: int = 0,
    jobs: int | None = None,
) -> BatchSummary:
    """Run every query, write per-query artifact directories and a results
    JSONL. Output is ordered by query index regardless of worker count."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = jobs or os.cpu_count() or 1

    def work(item):
        index, query = item
        artifact_dir = f"q{index:04d}"
        try:
            result = run_task(query, stack, seed=derive_seed(seed, "query", index))
        except AllCandidatesInvalid as e:
            return _result_record(index, query, None, str(e), artifact_dir)
        _write_artifacts(out / artifact_dir, result)
        return _result_record(index, query, result, None, artifact_dir)

    items = list(enumerate(queries))
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(work, items))
    else:
        records = [work(it) for it in items]

    results_path = out / "results.jsonl"
    with results_path.open("w", encoding="utf-8") as f:
        for record in sorted(records, key=lambda r: r["index"]):
            f.write(json.dumps(record, sort_keys=True) + "\n")

    by_task: dict[str, list[float]] = {}
    failed = 0
    for record in records:
        if record["status"] != "ok":
            failed += 1
            continue
        by_task.setdefault(record["task"], []).append(record["score"])
    mean_scores = {t: sum(v) / len(v) for t, v in by_task.items() if v}
    return BatchSummary(
        total=len(records),
        failed=failed,
        mean_scores=mean_scores,
        results_path=str(results_path),
    )


def make_stack(
    generator_cfg: BackendConfig,
    guidance_backends: GuidanceBackends,
    embedding_cfg: BackendConfig,
    resolution: int = 224,
) -> ServiceStack:
    """Wire a stack from backend configs, using mocks where asked."""
    embedder: EmbeddingPort
    if embedding_cfg.is_mock:
        embedder = MockEmbedder()
    else:
        embedder = HttpEmbedder(
            embedding_cfg.endpoint, embedding_cfg.timeout,
            embedding_cfg.retries, embedding_cfg.api_key,
        )
    backend: GeneratorBackendPort
    if generator_cfg.is_mock:
        backend = MockGeneratorBackend()
    else:
        backend = HttpGeneratorBackend(generator_cfg)
    return ServiceStack(guidance_backends, embedder, backend, resolution)
