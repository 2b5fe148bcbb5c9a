"""SVG generation pipeline toolkit: parsing and canonical normalization of a
restricted SVG dialect, rasterization, validity and similarity scoring,
guidance/generator tool ports with deterministic mocks, task workflows with
candidate selection, and dataset curation."""

from .svg_core import (
    PathCommand,
    PathStyle,
    RawCommand,
    Rgba,
    SvgDocument,
    SvgError,
    SvgPath,
    parse_path_data,
    parse_svg,
    serialize_svg,
)
from .normalizer import normalize
from .raster import RasterImage, Trajectory, flatten_path, path_to_trajectory, render
from .metrics import (
    Embedding,
    Score,
    ValidityReport,
    check_svg,
    clip_score,
    dino_similarity,
    mse,
    preservation_check,
    select_best,
    ssim,
)
from .workflows import ServiceStack, Task, TaskQuery, TaskResult, run_task

__version__ = "0.1.0"

__all__ = [
    "Embedding",
    "PathCommand",
    "PathStyle",
    "RasterImage",
    "RawCommand",
    "Rgba",
    "Score",
    "ServiceStack",
    "SvgDocument",
    "SvgError",
    "SvgPath",
    "Task",
    "TaskQuery",
    "TaskResult",
    "Trajectory",
    "ValidityReport",
    "check_svg",
    "clip_score",
    "dino_similarity",
    "flatten_path",
    "mse",
    "normalize",
    "parse_path_data",
    "parse_svg",
    "path_to_trajectory",
    "preservation_check",
    "render",
    "run_task",
    "select_best",
    "serialize_svg",
    "ssim",
]
