"""Corpus curation and training-record emission.

Raw SVG files plus their descriptions go through: lenient parse, canonical
normalization, a 224px render, and a text-image score filter (retain only
strictly above 20). Retained samples get a partial document (a seeded prefix
of their paths) and are emitted in five record flavors for the downstream
module training setups.
"""

from __future__ import annotations

import hashlib
import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .guidance import caption_image
from .metrics import EmbeddingPort, clip_score
from .normalizer import normalize
from .ports import BackendConfig
from .raster import RasterImage, render
from .svg_core import SvgDocument, SvgError, parse_svg, serialize_svg

CLIP_RETENTION_THRESHOLD = 20.0
CURATION_RESOLUTION = 224
DEFAULT_TEST_SIZE = 500


class TooFewPaths(ValueError):
    pass


class NotEnoughRecords(ValueError):
    pass


class MissingCaption(KeyError):
    pass


@dataclass(frozen=True)
class CurationRecord:
    """One retained sample: the complete document, its partial prefix (absent
    for single-path documents, which only feed the basic-task flavors), the
    description, the retention score, and render references."""

    id: str
    complete_svg: SvgDocument
    partial_svg: SvgDocument | None
    text: str
    clip_score: float
    provider: str
    render_complete: str | None = None
    render_partial: str | None = None
    image_hash: str | None = None


@dataclass(frozen=True)
class CurationRejection:
    reason: str  # ParseFailed | NormalizeFailed | ScoreBelowThreshold | TooFewPaths
    detail: str = ""
    source: str = ""


def derive_partial(doc: SvgDocument, seed: int) -> SvgDocument:
    """First k paths of the document, k drawn uniformly from [1, n-1] by a
    generator seeded on (document content, seed)."""
    n = len(doc.paths)
    if n < 2:
        raise TooFewPaths(f"need at least 2 paths, document has {n}")
    digest = hashlib.sha256(
        serialize_svg(doc).encode("utf-8") + str(seed).encode("ascii")
    ).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    k = rng.randint(1, n - 1)
    return SvgDocument(doc.viewbox, doc.paths[:k])


def record_id(complete_svg_text: str, text: str) -> str:
    h = hashlib.sha256()
    h.update(complete_svg_text.encode("utf-8"))
    h.update(b"\x1f")
    h.update(text.encode("utf-8"))
    return h.hexdigest()[:16]


def curate(
    raw_svg: str,
    text: str,
    embedder: EmbeddingPort,
    seed: int,
    renders_dir: str | Path | None = None,
    source: str = "",
) -> CurationRecord | CurationRejection:
    """Run one sample through the retention pipeline.

    Rejections are ordinary return values, never exceptions: a sample can
    fail to parse, fail to normalize, or score at or below the threshold.
    """
    try:
        doc = parse_svg(raw_svg, strict=False)
    except SvgError as e:
        return CurationRejection("ParseFailed", str(e), source)
    try:
        doc = normalize(doc)
    except (SvgError, ValueError) as e:
        return CurationRejection("NormalizeFailed", str(e), source)
    if not doc.paths:
        return CurationRejection("TooFewPaths", "document has no paths", source)

    image = render(doc, CURATION_RESOLUTION)
    score = clip_score(text, image, embedder)
    if not score.value > CLIP_RETENTION_THRESHOLD:
        return CurationRejection(
            "ScoreBelowThreshold", f"clip_score={score.value!r}", source
        )

    partial = derive_partial(doc, seed) if len(doc.paths) >= 2 else None
    rid = record_id(serialize_svg(doc), text)

    render_complete = render_partial = None
    if renders_dir is not None:
        renders = Path(renders_dir)
        renders.mkdir(parents=True, exist_ok=True)
        render_complete = f"{rid}_complete.png"
        image.save(renders / render_complete)
        if partial is not None:
            render_partial = f"{rid}_partial.png"
            render(partial, CURATION_RESOLUTION).save(renders / render_partial)

    return CurationRecord(
        id=rid,
        complete_svg=doc,
        partial_svg=partial,
        text=text,
        clip_score=score.value,
        provider=embedder.provider,
        render_complete=render_complete,
        render_partial=render_partial,
        image_hash=image.content_hash(),
    )


def split(
    ids: Sequence[str], test_size: int = DEFAULT_TEST_SIZE, seed: int = 0
) -> tuple[list[str], list[str]]:
    """Seeded uniform test sample without replacement; returns (train, test),
    both sorted, disjoint, and together covering every id exactly once."""
    unique = sorted(set(ids))
    if len(unique) != len(ids):
        raise ValueError("ids must be unique")
    if len(unique) <= test_size:
        raise NotEnoughRecords(
            f"need more than {test_size} records, got {len(unique)}"
        )
    rng = random.Random(seed)
    test = sorted(rng.sample(unique, test_size))
    test_set = set(test)
    train = [i for i in unique if i not in test_set]
    return train, test


# ---------------------------------------------------------------------------
# Training-record emission
# ---------------------------------------------------------------------------

FLAVORS = ("d_i2s", "d_t2s", "d_it2s", "dp_t2s", "dp_it2s")

FLAVOR_INPUT_FIELDS: Mapping[str, tuple[str, ...]] = {
    "d_i2s": ("image_ref",),
    "d_t2s": ("text",),
    "d_it2s": ("image_ref", "text", "aux_text"),
    "dp_t2s": ("text", "partial_svg_text"),
    "dp_it2s": ("image_ref", "text", "partial_svg_text"),
}

_PARTIAL_FLAVORS = ("dp_t2s", "dp_it2s")


@dataclass(frozen=True)
class TrainingRecord:
    flavor: str
    input: dict
    output: str  # canonical text of the complete document

    def to_json(self) -> dict:
        return {"flavor": self.flavor, "input": dict(self.input), "output": self.output}


def training_record_schema(flavor: str) -> dict:
    """JSON schema for one emitted line of the given flavor."""
    fields = FLAVOR_INPUT_FIELDS[flavor]
    return {
        "type": "object",
        "required": ["flavor", "input", "output"],
        "additionalProperties": False,
        "properties": {
            "flavor": {"const": flavor},
            "input": {
                "type": "object",
                "required": list(fields),
                "additionalProperties": False,
                "properties": {name: {"type": "string"} for name in fields},
            },
            "output": {"type": "string"},
        },
    }


def emit_training_records(
    records: Iterable[CurationRecord],
    flavor: str,
    captions: Mapping[str, str] | None = None,
) -> Iterator[TrainingRecord]:
    """Map curated records into one training flavor.

    Records without a partial document are skipped by the partial flavors.
    The image+text flavor needs a caption per complete render, keyed by the
    render's content hash.
    """
    if flavor not in FLAVORS:
        raise ValueError(f"unknown flavor {flavor!r}")
    for record in records:
        if flavor in _PARTIAL_FLAVORS and record.partial_svg is None:
            continue
        payload: dict[str, str] = {}
        for name in FLAVOR_INPUT_FIELDS[flavor]:
            if name == "image_ref":
                if record.render_complete is None:
                    raise ValueError(
                        f"record {record.id} has no persisted render for {flavor}"
                    )
                payload[name] = record.render_complete
            elif name == "text":
                payload[name] = record.text
            elif name == "aux_text":
                if captions is None or record.image_hash not in captions:
                    raise MissingCaption(record.id)
                payload[name] = captions[record.image_hash]
            elif name == "partial_svg_text":
                payload[name] = serialize_svg(record.partial_svg)
        yield TrainingRecord(flavor, payload, serialize_svg(record.complete_svg))


def write_training_jsonl(
    records: Iterable[CurationRecord],
    flavor: str,
    path: str | Path,
    captions: Mapping[str, str] | None = None,
) -> int:
    count = 0
    with Path(path).open("w", encoding="utf-8") as f:
        for tr in emit_training_records(records, flavor, captions):
            f.write(json.dumps(tr.to_json(), sort_keys=True) + "\n")
            count += 1
    return count


def build_caption_cache(
    records: Iterable[CurationRecord],
    cfg: BackendConfig,
    renders_dir: str | Path,
) -> dict[str, str]:
    """Caption each record's complete render once, keyed by image hash."""
    renders = Path(renders_dir)
    cache: dict[str, str] = {}
    for record in records:
        if record.image_hash is None or record.render_complete is None:
            continue
        if record.image_hash in cache:
            continue
        image = RasterImage.load(renders / record.render_complete)
        cache[record.image_hash] = caption_image(image, cfg)
    return cache


# ---------------------------------------------------------------------------
# Record persistence and the directory pipeline
# ---------------------------------------------------------------------------


def record_to_json(record: CurationRecord) -> dict:
    return {
        "id": record.id,
        "text": record.text,
        "clip_score": record.clip_score,
        "provider": record.provider,
        "complete_svg": serialize_svg(record.complete_svg),
        "partial_svg": None if record.partial_svg is None else serialize_svg(record.partial_svg),
        "render_complete": record.render_complete,
        "render_partial": record.render_partial,
        "image_hash": record.image_hash,
    }


def record_from_json(obj: Mapping) -> CurationRecord:
    return CurationRecord(
        id=obj["id"],
        complete_svg=normalize(parse_svg(obj["complete_svg"], strict=True)),
        partial_svg=(
            None
            if obj.get("partial_svg") is None
            else normalize(parse_svg(obj["partial_svg"], strict=True))
        ),
        text=obj["text"],
        clip_score=obj["clip_score"],
        provider=obj.get("provider", ""),
        render_complete=obj.get("render_complete"),
        render_partial=obj.get("render_partial"),
        image_hash=obj.get("image_hash"),
    )


def write_records_jsonl(records: Sequence[CurationRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as f:
        for record in sorted(records, key=lambda r: r.id):
            f.write(json.dumps(record_to_json(record), sort_keys=True) + "\n")


def read_records_jsonl(path: str | Path) -> list[CurationRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(record_from_json(json.loads(line)))
    return records


def load_metadata(path: str | Path) -> dict[str, str]:
    """File-to-description map: JSONL of {file, text} entries, or one JSON
    object mapping file paths to descriptions."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]

    def as_entry(line: str):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            return None
        if isinstance(obj, dict) and {"file", "text"} <= set(obj):
            return obj
        return None

    entries = [as_entry(ln) for ln in lines]
    if lines and all(e is not None for e in entries):
        return {e["file"]: e["text"] for e in entries}

    obj = json.loads(text)
    if not isinstance(obj, dict) or not all(isinstance(v, str) for v in obj.values()):
        raise ValueError("metadata must map file paths to description strings")
    return dict(obj)


def curate_directory(
    svg_dir: str | Path,
    metadata_path: str | Path,
    out_dir: str | Path,
    embedder: EmbeddingPort,
    seed: int = 0,
    jobs: int = 1,
) -> dict:
    """Curate every described SVG under a directory tree.

    Writes records.jsonl (sorted by content id), a renders/ directory, and a
    manifest with retention counts and rejection statistics. Deterministic
    for a fixed (corpus, seed).
    """
    svg_root = Path(svg_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    renders_dir = out / "renders"
    metadata = load_metadata(metadata_path)

    items = sorted(metadata.items())

    def work(item):
        rel, text = item
        file_path = svg_root / rel
        if not file_path.is_file():
            return CurationRejection("ParseFailed", "file not found", rel)
        raw = file_path.read_text(encoding="utf-8", errors="replace")
        return curate(raw, text, embedder, seed, renders_dir, source=rel)

    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(work, items))
    else:
        outcomes = [work(it) for it in items]

    records = [o for o in outcomes if isinstance(o, CurationRecord)]
    rejections = [o for o in outcomes if isinstance(o, CurationRejection)]
    write_records_jsonl(records, out / "records.jsonl")

    reject_counts: dict[str, int] = {}
    for r in rejections:
        reject_counts[r.reason] = reject_counts.get(r.reason, 0) + 1
    manifest = {
        "total": len(items),
        "retained": len(records),
        "rejections": {k: reject_counts[k] for k in sorted(reject_counts)},
        "clip_threshold": CLIP_RETENTION_THRESHOLD,
        "seed": seed,
        "embedder": embedder.provider,
        "records": "records.jsonl",
        "renders_dir": "renders",
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest
