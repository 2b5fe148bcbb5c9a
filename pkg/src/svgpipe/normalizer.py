"""Lowering to the canonical form: restricted commands, 200x200 viewbox,
integer coordinates where that loses nothing.

The target form keeps aspect ratio: content is scaled uniformly and centered
inside the square viewbox (letterboxed) rather than stretched.
"""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Sequence

from .svg_core import (
    PathCommand,
    RawCommand,
    StartsWithoutMove,
    SvgDocument,
    SvgPath,
    lower_to_absolute,
)

TARGET_VIEWBOX_SIDE = 200.0

__all__ = [
    "TARGET_VIEWBOX_SIDE",
    "StartsWithoutMove",
    "lower_commands",
    "rescale_viewbox",
    "quantize_coords",
    "normalize",
]


def lower_commands(raw: Sequence[RawCommand]) -> list[PathCommand]:
    """Resolve relative/shorthand commands into absolute {M, L, C, Q, A, Z}."""
    return lower_to_absolute(raw)


def rescale_viewbox(doc: SvgDocument, target: float = TARGET_VIEWBOX_SIDE) -> SvgDocument:
    """Scale the document uniformly into a (0, 0, target, target) viewbox.

    The scale factor is target / max(width, height); the shorter axis is
    centered, so shapes keep their proportions. Arc rotation angles and flags
    are untouched; radii scale with everything else.
    """
    min_x, min_y, w, h = doc.viewbox
    s = target / max(w, h)
    ox = (target - w * s) / 2.0
    oy = (target - h * s) / 2.0

    def tx(x: float) -> float:
        return (x - min_x) * s + ox

    def ty(y: float) -> float:
        return (y - min_y) * s + oy

    new_paths = []
    for path in doc.paths:
        cmds = []
        for cmd in path.commands:
            if cmd.letter == "Z":
                cmds.append(cmd)
            elif cmd.letter == "A":
                rx, ry, rot, large, sweep, x, y = cmd.args
                cmds.append(PathCommand("A", (rx * s, ry * s, rot, large, sweep, tx(x), ty(y))))
            else:
                args = tuple(
                    tx(v) if k % 2 == 0 else ty(v) for k, v in enumerate(cmd.args)
                )
                cmds.append(PathCommand(cmd.letter, args))
        new_paths.append(SvgPath(tuple(cmds), path.style))
    return SvgDocument((0.0, 0.0, target, target), tuple(new_paths))


def _round_half_away(x: float) -> float:
    if x >= 0:
        return float(math.floor(x + 0.5))
    return float(math.ceil(x - 0.5))


def _round2(x: float) -> float:
    return _round_half_away(x * 100.0) / 100.0


def _quantize_command(cmd: PathCommand, rounder, integer_mode: bool) -> PathCommand:
    if cmd.letter == "Z":
        return cmd
    if cmd.letter == "A":
        rx, ry, rot, large, sweep, x, y = cmd.args
        qrx, qry = rounder(rx), rounder(ry)
        if integer_mode:
            # A sub-pixel radius that rounds to zero would turn the arc into
            # a straight line; hold it at 1 when the source radius was >= 0.5.
            if rx >= 0.5:
                qrx = max(1.0, qrx)
            if ry >= 0.5:
                qry = max(1.0, qry)
        return PathCommand("A", (qrx, qry, rounder(rot), large, sweep, rounder(x), rounder(y)))
    return PathCommand(cmd.letter, tuple(rounder(v) for v in cmd.args))


def _command_has_extent(cmd: PathCommand, cx: float, cy: float) -> bool:
    """True when a drawing command moves away from the current point at all."""
    if cmd.letter in ("M", "Z"):
        return True
    if cmd.letter == "L":
        return cmd.args != (cx, cy)
    if cmd.letter == "C":
        x1, y1, x2, y2, x, y = cmd.args
        return not (x1 == x2 == x == cx and y1 == y2 == y == cy)
    if cmd.letter == "Q":
        x1, y1, x, y = cmd.args
        return not (x1 == x == cx and y1 == y == cy)
    if cmd.letter == "A":
        return cmd.end != (cx, cy)
    return True


def _degeneracies(commands: Sequence[PathCommand]) -> tuple[set[int], set[int]]:
    """Indices of zero-extent drawing commands, and of collapsed closed subpaths
    (identified by the index of their M)."""
    zero: set[int] = set()
    collapsed: set[int] = set()
    cx = cy = sx = sy = 0.0
    sub_start_idx = 0
    sub_points: list[tuple[float, float]] = []
    sub_closed = False

    def finish_subpath():
        if sub_closed and sub_points and all(p == sub_points[0] for p in sub_points):
            collapsed.add(sub_start_idx)

    for i, cmd in enumerate(commands):
        if cmd.letter == "M":
            finish_subpath()
            cx, cy = cmd.end
            sx, sy = cx, cy
            sub_start_idx = i
            sub_points = [(cx, cy)]
            sub_closed = False
        elif cmd.letter == "Z":
            cx, cy = sx, sy
            sub_closed = True
        else:
            if not _command_has_extent(cmd, cx, cy):
                zero.add(i)
            cx, cy = cmd.end
            sub_points.append((cx, cy))
    finish_subpath()
    return zero, collapsed


def quantize_coords(doc: SvgDocument) -> SvgDocument:
    """Round every coordinate to the nearest integer, ties away from zero.

    A path whose rounding collapses something (a closed subpath shrinking to
    a point, or a command losing all extent it previously had) falls back to
    2-decimal precision for the whole path instead.

    Coordinates are snapped to 2 decimals before the integer decision and the
    degeneracy comparison runs against that snap; this makes one pass a fixed
    point, so repeated quantization never flips a path between precisions.
    """
    new_paths = []
    for path in doc.paths:
        snapped = tuple(
            _quantize_command(c, _round2, integer_mode=False)
            for c in path.commands
        )
        rounded = tuple(
            _quantize_command(c, _round_half_away, integer_mode=True)
            for c in snapped
        )
        zero_before, collapsed_before = _degeneracies(snapped)
        zero_after, collapsed_after = _degeneracies(rounded)
        if zero_after - zero_before or collapsed_after - collapsed_before:
            rounded = snapped
        new_paths.append(SvgPath(rounded, path.style))
    return replace(doc, paths=tuple(new_paths))


def normalize(doc: SvgDocument) -> SvgDocument:
    """Full canonicalization: absolute restricted commands (guaranteed by the
    document model), uniform rescale into the 200x200 viewbox, then integer
    quantization. Idempotent."""
    return quantize_coords(rescale_viewbox(doc))
