"""Command-line entry point.

stdout carries machine-readable results (JSON lines or bare numbers);
human diagnostics go to stderr. Exit codes: 0 success, 1 usage or parse
problems, 2 provider failures, 3 internal errors, 4 generation failures
during a task run.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import dataset, workflows
from .guidance import GuidanceBackends, HttpEmbedder, MockEmbedder
from .metrics import (
    EmbeddingPort,
    check_svg,
    clip_score,
    dino_similarity,
    mse,
    ssim,
)
from .normalizer import normalize
from .ports import BackendConfig, ProviderError
from .raster import RasterImage, format_trajectory, path_to_trajectory, render
from .svg_core import SvgError, parse_svg, serialize_svg
from .workflows import Task, make_stack

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PROVIDER = 2
EXIT_INTERNAL = 3
EXIT_GENERATION = 4

ENV_PREFIX = "SVGPIPE_"

_URL_KEYS = (
    "generator_url",
    "embedding_url",
    "text_to_image_url",
    "edit_image_url",
    "caption_url",
    "suggest_url",
)

_DEFAULTS: dict = {key: "" for key in _URL_KEYS}
_DEFAULTS.update(
    {"api_key": "", "timeout": 30.0, "retries": 2, "resolution": 224, "seed": 0, "jobs": 0}
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def load_config(path: str | None, overrides: dict) -> dict:
    """Flat key-value config; environment overrides the file, flags override
    everything, and NO_NETWORK=1 forces every backend to its mock."""
    cfg = dict(_DEFAULTS)
    if path:
        file_cfg = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(file_cfg, dict):
            raise ValueError("config file must hold a flat JSON object")
        for key, value in file_cfg.items():
            if key not in _DEFAULTS:
                raise ValueError(f"unknown config key {key!r}")
            cfg[key] = value
    for key in _DEFAULTS:
        env_value = os.environ.get(ENV_PREFIX + key.upper())
        if env_value is not None:
            cfg[key] = env_value
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    for key in ("timeout",):
        cfg[key] = float(cfg[key])
    for key in ("retries", "resolution", "seed", "jobs"):
        cfg[key] = int(cfg[key])
    if os.environ.get("NO_NETWORK") == "1" or overrides.get("mock"):
        for key in _URL_KEYS:
            cfg[key] = "mock"
    return cfg


def _backend(cfg: dict, key: str, port_name: str) -> BackendConfig:
    url = cfg[key]
    if not url:
        raise SvgError(
            f"no endpoint for the {port_name} port; set {key} in the config, "
            f"{ENV_PREFIX}{key.upper()} in the environment, or pass --mock"
        )
    return BackendConfig(
        endpoint=url,
        timeout=cfg["timeout"],
        retries=cfg["retries"],
        seed=cfg["seed"],
        resolution=cfg["resolution"],
        api_key=cfg["api_key"] or None,
    )


def _embedder(cfg: dict) -> EmbeddingPort:
    backend = _backend(cfg, "embedding_url", "embedding")
    if backend.is_mock:
        return MockEmbedder()
    return HttpEmbedder(backend.endpoint, backend.timeout, backend.retries,
                        backend.api_key)


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_normalize(args) -> int:
    text = Path(args.input).read_text(encoding="utf-8")
    notes: list[str] = []
    doc = parse_svg(text, strict=args.strict, warnings=notes)
    for note in notes:
        print(f"note: {note}", file=sys.stderr)
    out = serialize_svg(normalize(doc))
    Path(args.output).write_text(out, encoding="utf-8")
    _emit({"output": args.output, "paths": out.count("<path ")})
    return EXIT_OK


def cmd_render(args) -> int:
    text = Path(args.input).read_text(encoding="utf-8")
    doc = normalize(parse_svg(text, strict=args.strict))
    image = render(doc, args.resolution)
    image.save(args.output)
    _emit({"output": args.output, "resolution": args.resolution})
    return EXIT_OK


def cmd_trajectory(args) -> int:
    text = Path(args.input).read_text(encoding="utf-8")
    doc = normalize(parse_svg(text, strict=False))
    traj = path_to_trajectory(doc, args.spacing)
    Path(args.output).write_text(format_trajectory(traj), encoding="utf-8")
    _emit({"output": args.output, "segments": len(traj.segments)})
    return EXIT_OK


def _load_image_or_svg(path: str, resolution: int) -> RasterImage:
    if path.endswith(".svg"):
        doc = normalize(parse_svg(Path(path).read_text(encoding="utf-8")))
        return render(doc, resolution)
    return RasterImage.load(path)


def cmd_score(args) -> int:
    cfg = load_config(args.config, {"mock": args.mock, "resolution": args.resolution})
    resolution = cfg["resolution"]
    if args.metric == "clip":
        text = Path(args.a).read_text(encoding="utf-8").strip()
        image = _load_image_or_svg(args.b, resolution)
        score = clip_score(text, image, _embedder(cfg))
    else:
        a = _load_image_or_svg(args.a, resolution)
        b = _load_image_or_svg(args.b, resolution)
        if (a.width, a.height) != (b.width, b.height):
            b = b.resample_letterbox(a.width, a.height)
        if args.metric == "ssim":
            score = ssim(a, b)
        elif args.metric == "mse":
            score = mse(a, b)
        else:
            score = dino_similarity(a, b, _embedder(cfg))
    print(f"{score.value:.6f}")
    return EXIT_OK


def cmd_verify(args) -> int:
    report = check_svg(Path(args.input).read_text(encoding="utf-8"))
    _emit(
        {
            "valid": report.valid,
            "diagnostics": list(report.diagnostics),
            "blank_render": report.blank_render,
        }
    )
    return EXIT_OK


def cmd_curate(args) -> int:
    cfg = load_config(args.config, {"mock": args.mock, "seed": args.seed, "jobs": args.jobs})
    manifest = dataset.curate_directory(
        args.svg_dir,
        args.metadata,
        args.out,
        _embedder(cfg),
        seed=cfg["seed"],
        jobs=max(1, cfg["jobs"] or (os.cpu_count() or 1)),
    )
    _emit(manifest)
    return EXIT_OK


def cmd_split(args) -> int:
    records = dataset.read_records_jsonl(args.records)
    train, test = dataset.split([r.id for r in records], args.test_size, args.seed)
    payload = {
        "seed": args.seed,
        "test_size": args.test_size,
        "train": train,
        "test": test,
    }
    Path(args.output).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _emit({"output": args.output, "train": len(train), "test": len(test)})
    return EXIT_OK


def cmd_emit(args) -> int:
    records = dataset.read_records_jsonl(args.records)
    captions = None
    if args.captions:
        captions = json.loads(Path(args.captions).read_text(encoding="utf-8"))
    elif args.flavor == "d_it2s" and args.renders:
        cfg = load_config(args.config, {"mock": args.mock})
        caption_cfg = _backend(cfg, "caption_url", "caption")
        captions = dataset.build_caption_cache(records, caption_cfg, args.renders)
    count = dataset.write_training_jsonl(records, args.flavor, args.output, captions)
    _emit({"output": args.output, "flavor": args.flavor, "count": count})
    return EXIT_OK


_TASK_ALIASES = {
    "t1": Task.TEXT_TO_SVG,
    "t2": Task.IMAGE_TO_SVG,
    "t3": Task.PARTIALSVG_TO_SVG,
    "t4": Task.PARTIALIMAGE_TO_SVG,
}

_TASK_PORTS = {
    Task.TEXT_TO_SVG: ("generator_url", "embedding_url", "text_to_image_url"),
    Task.IMAGE_TO_SVG: ("generator_url", "caption_url"),
    Task.PARTIALSVG_TO_SVG: ("generator_url", "embedding_url", "edit_image_url"),
    Task.PARTIALIMAGE_TO_SVG: ("generator_url", "edit_image_url", "suggest_url"),
}

_PORT_NAMES = {
    "generator_url": "generator",
    "embedding_url": "embedding",
    "text_to_image_url": "text_to_image",
    "edit_image_url": "edit_image",
    "caption_url": "caption",
    "suggest_url": "suggest",
}


def cmd_run_task(args) -> int:
    task = _TASK_ALIASES.get(args.task) or Task(args.task)
    cfg = load_config(
        args.config,
        {"mock": args.mock, "seed": args.seed, "jobs": args.jobs,
         "resolution": args.resolution},
    )
    for key in _TASK_PORTS[task]:
        _backend(cfg, key, _PORT_NAMES[key])  # fail early, naming the port

    def opt(key: str) -> BackendConfig:
        return (
            _backend(cfg, key, _PORT_NAMES[key])
            if cfg[key]
            else BackendConfig(endpoint="mock", seed=cfg["seed"],
                               resolution=cfg["resolution"])
        )

    backends = GuidanceBackends(
        text_to_image=opt("text_to_image_url"),
        edit_image=opt("edit_image_url"),
        caption=opt("caption_url"),
        suggest=opt("suggest_url"),
    )
    stack = make_stack(
        _backend(cfg, "generator_url", "generator"),
        backends,
        opt("embedding_url"),
        resolution=cfg["resolution"],
    )
    queries = workflows.load_queries(args.queries, default_task=task)
    summary = workflows.run_batch(
        queries, stack, args.out, seed=cfg["seed"], jobs=cfg["jobs"] or None
    )
    print(f"task {task.value}: {summary.total} queries, {summary.failed} failed",
          file=sys.stderr)
    for name, value in sorted(summary.mean_scores.items()):
        print(f"  mean score [{name}]: {value:.4f}", file=sys.stderr)
    _emit(summary.to_json())
    return EXIT_GENERATION if summary.failed else EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="svgpipe", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", help="rewrite an SVG in canonical form")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("render", help="rasterize an SVG to PNG or PPM")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--resolution", type=int, default=224)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("trajectory", help="export pen up/down polylines")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--spacing", type=float, default=2.0)
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("score", help="compare two inputs under one metric")
    p.add_argument("--metric", required=True, choices=["ssim", "mse", "clip", "dino"])
    p.add_argument("a", help="SVG/image path (a .txt file of text for clip)")
    p.add_argument("b", help="SVG or image path")
    p.add_argument("--resolution", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--mock", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("verify", help="structural conformance report")
    p.add_argument("input")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("curate", help="filter a corpus into curated records")
    p.add_argument("svg_dir")
    p.add_argument("metadata", help="file-to-description map (JSON or JSONL)")
    p.add_argument("out")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--mock", action="store_true")
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("split", help="seeded train/test partition of records")
    p.add_argument("records")
    p.add_argument("output")
    p.add_argument("--test-size", type=int, default=dataset.DEFAULT_TEST_SIZE)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("emit", help="write one training-record flavor as JSONL")
    p.add_argument("records")
    p.add_argument("flavor", choices=list(dataset.FLAVORS))
    p.add_argument("output")
    p.add_argument("--captions", default=None, help="JSON map of image hash to caption")
    p.add_argument("--renders", default=None, help="renders dir for caption building")
    p.add_argument("--config", default=None)
    p.add_argument("--mock", action="store_true")
    p.set_defaults(func=cmd_emit)

    p = sub.add_parser("run-task", help="run a task pipeline over a query file")
    p.add_argument("task", help="task name or t1..t4")
    p.add_argument("queries", help="JSONL query file")
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--mock", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--resolution", type=int, default=None)
    p.set_defaults(func=cmd_run_task)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except ProviderError as e:
        print(f"provider error: {e}", file=sys.stderr)
        return EXIT_PROVIDER
    except (SvgError, dataset.NotEnoughRecords, dataset.TooFewPaths,
            dataset.MissingCaption, FileNotFoundError, IsADirectoryError,
            json.JSONDecodeError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # noqa: BLE001
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
