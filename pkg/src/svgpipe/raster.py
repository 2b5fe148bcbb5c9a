"""Rendering: vector documents to RGB rasters, plus pen trajectories.

Filling is scanline-based over flattened polylines: every pixel row is
sampled on 4 sub-rows, each sub-row resolves crossings by the path's fill
rule into inside spans, and a span contributes its exact horizontal overlap
to each pixel it touches. Strokes are built as quad-per-segment geometry
with octagon discs at the joints and filled the same way. Painting is
source-over onto an opaque white background, in document order.
"""

from __future__ import annotations

import hashlib
import io
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .svg_core import PathCommand, Rgba, SvgDocument

FLATTEN_TOLERANCE = 0.25
SUBSAMPLES = 4  # vertical sub-rows per pixel row
_MAX_SPLIT_DEPTH = 24


class RasterImage:
    """Immutable row-major RGB8 image backed by a read-only numpy array."""

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels, dtype=np.uint8)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"expected (h, w, 3) uint8 pixels, got {arr.shape}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    def __setattr__(self, name, value):
        raise AttributeError("RasterImage is immutable")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __repr__(self) -> str:
        return f"RasterImage({self.width}x{self.height})"

    @classmethod
    def blank(cls, width: int, height: int, color=(255, 255, 255)) -> "RasterImage":
        arr = np.empty((height, width, 3), dtype=np.uint8)
        arr[:] = color
        return cls(arr)

    # -- encoding ----------------------------------------------------------

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels, mode="RGB").save(buf, format="PNG")
        return buf.getvalue()

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "RasterImage":
        img = Image.open(io.BytesIO(data)).convert("RGB")
        return cls(np.asarray(img))

    def to_ppm_bytes(self) -> bytes:
        header = f"P6\n{self.width} {self.height}\n255\n".encode("ascii")
        return header + self.pixels.tobytes()

    @classmethod
    def from_ppm_bytes(cls, data: bytes) -> "RasterImage":
        if not data.startswith(b"P6"):
            raise ValueError("not a binary PPM (P6) stream")
        fields: list[bytes] = []
        pos = 2
        while len(fields) < 3:
            while pos < len(data) and data[pos : pos + 1].isspace():
                pos += 1
            if data[pos : pos + 1] == b"#":  # comment line
                pos = data.index(b"\n", pos) + 1
                continue
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace():
                pos += 1
            fields.append(data[start:pos])
        pos += 1  # single whitespace after maxval
        w, h, maxval = (int(f) for f in fields)
        if maxval != 255:
            raise ValueError(f"unsupported PPM maxval {maxval}")
        raw = data[pos : pos + w * h * 3]
        if len(raw) != w * h * 3:
            raise ValueError("truncated PPM pixel data")
        return cls(np.frombuffer(raw, dtype=np.uint8).reshape(h, w, 3))

    def save(self, path) -> None:
        path = str(path)
        data = self.to_ppm_bytes() if path.endswith(".ppm") else self.to_png_bytes()
        with open(path, "wb") as f:
            f.write(data)

    @classmethod
    def load(cls, path) -> "RasterImage":
        with open(str(path), "rb") as f:
            data = f.read()
        if data.startswith(b"P6"):
            return cls.from_ppm_bytes(data)
        return cls.from_png_bytes(data)

    # -- geometry ----------------------------------------------------------

    def resample_letterbox(self, width: int, height: int) -> "RasterImage":
        """Fit into width x height preserving aspect ratio, white borders."""
        if (self.width, self.height) == (width, height):
            return self
        scale = min(width / self.width, height / self.height)
        new_w = max(1, round(self.width * scale))
        new_h = max(1, round(self.height * scale))
        resized = Image.fromarray(self.pixels, mode="RGB").resize(
            (new_w, new_h), Image.BILINEAR
        )
        canvas = Image.new("RGB", (width, height), (255, 255, 255))
        canvas.paste(resized, ((width - new_w) // 2, (height - new_h) // 2))
        return RasterImage(np.asarray(canvas))

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.width}x{self.height}:".encode("ascii"))
        h.update(self.pixels.tobytes())
        return h.hexdigest()


def image_content_hash(image: RasterImage) -> str:
    return image.content_hash()


# ---------------------------------------------------------------------------
# Flattening
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Polyline:
    """Flattened subpath; a closed polyline implies the edge back to points[0]."""

    points: np.ndarray  # (n, 2) float64
    closed: bool


def _point_segment_distance(p, a, b) -> float:
    ab = (b[0] - a[0], b[1] - a[1])
    ap = (p[0] - a[0], p[1] - a[1])
    denom = ab[0] * ab[0] + ab[1] * ab[1]
    if denom == 0.0:
        return math.hypot(*ap)
    t = max(0.0, min(1.0, (ap[0] * ab[0] + ap[1] * ab[1]) / denom))
    return math.hypot(p[0] - a[0] - t * ab[0], p[1] - a[1] - t * ab[1])


def _flatten_cubic(p0, p1, p2, p3, tolerance, sink, depth=0):
    flatness = max(
        _point_segment_distance(p1, p0, p3),
        _point_segment_distance(p2, p0, p3),
    )
    if flatness <= tolerance or depth >= _MAX_SPLIT_DEPTH:
        sink.append(p3)
        return
    # de Casteljau split at t = 1/2
    m01 = ((p0[0] + p1[0]) / 2, (p0[1] + p1[1]) / 2)
    m12 = ((p1[0] + p2[0]) / 2, (p1[1] + p2[1]) / 2)
    m23 = ((p2[0] + p3[0]) / 2, (p2[1] + p3[1]) / 2)
    m012 = ((m01[0] + m12[0]) / 2, (m01[1] + m12[1]) / 2)
    m123 = ((m12[0] + m23[0]) / 2, (m12[1] + m23[1]) / 2)
    mid = ((m012[0] + m123[0]) / 2, (m012[1] + m123[1]) / 2)
    _flatten_cubic(p0, m01, m012, mid, tolerance, sink, depth + 1)
    _flatten_cubic(mid, m123, m23, p3, tolerance, sink, depth + 1)


def _quad_to_cubic(p0, q, p1):
    c1 = (p0[0] + 2.0 * (q[0] - p0[0]) / 3.0, p0[1] + 2.0 * (q[1] - p0[1]) / 3.0)
    c2 = (p1[0] + 2.0 * (q[0] - p1[0]) / 3.0, p1[1] + 2.0 * (q[1] - p1[1]) / 3.0)
    return c1, c2


def arc_to_cubics(start, rx, ry, xrot_deg, large_arc, sweep, end):
    """Decompose an endpoint-parameterized elliptical arc into cubic segments.

    Follows the standard endpoint-to-center conversion, including the
    out-of-range radii correction (radii are scaled up until the endpoints
    fit). Sweeps longer than 90 degrees are split so each cubic covers at
    most a quarter turn. Returns a list of (c1, c2, end) control tuples;
    an empty list means the arc degenerates to a straight line.
    """
    if rx == 0.0 or ry == 0.0 or start == end:
        return []
    rx, ry = abs(rx), abs(ry)
    phi = math.radians(xrot_deg)
    cos_phi, sin_phi = math.cos(phi), math.sin(phi)

    dx2 = (start[0] - end[0]) / 2.0
    dy2 = (start[1] - end[1]) / 2.0
    x1p = cos_phi * dx2 + sin_phi * dy2
    y1p = -sin_phi * dx2 + cos_phi * dy2

    lam = (x1p * x1p) / (rx * rx) + (y1p * y1p) / (ry * ry)
    if lam > 1.0:
        s = math.sqrt(lam)
        rx *= s
        ry *= s

    num = rx * rx * ry * ry - rx * rx * y1p * y1p - ry * ry * x1p * x1p
    den = rx * rx * y1p * y1p + ry * ry * x1p * x1p
    coef = math.sqrt(max(0.0, num / den)) if den != 0.0 else 0.0
    if large_arc == sweep:
        coef = -coef
    cxp = coef * rx * y1p / ry
    cyp = -coef * ry * x1p / rx

    cx = cos_phi * cxp - sin_phi * cyp + (start[0] + end[0]) / 2.0
    cy = sin_phi * cxp + cos_phi * cyp + (start[1] + end[1]) / 2.0

    def angle(ux, uy, vx, vy):
        dot = ux * vx + uy * vy
        norm = math.hypot(ux, uy) * math.hypot(vx, vy)
        a = math.acos(max(-1.0, min(1.0, dot / norm)))
        if ux * vy - uy * vx < 0:
            a = -a
        return a

    theta1 = angle(1.0, 0.0, (x1p - cxp) / rx, (y1p - cyp) / ry)
    dtheta = angle((x1p - cxp) / rx, (y1p - cyp) / ry, (-x1p - cxp) / rx, (-y1p - cyp) / ry)
    if not sweep and dtheta > 0:
        dtheta -= 2 * math.pi
    elif sweep and dtheta < 0:
        dtheta += 2 * math.pi

    segments = max(1, math.ceil(abs(dtheta) / (math.pi / 2.0)))
    out = []
    for k in range(segments):
        ta = theta1 + dtheta * k / segments
        tb = theta1 + dtheta * (k + 1) / segments
        t = (4.0 / 3.0) * math.tan((tb - ta) / 4.0)

        def ellipse_point(th):
            ex = rx * math.cos(th)
            ey = ry * math.sin(th)
            return (cos_phi * ex - sin_phi * ey + cx, sin_phi * ex + cos_phi * ey + cy)

        def ellipse_tangent(th):
            ex = -rx * math.sin(th)
            ey = ry * math.cos(th)
            return (cos_phi * ex - sin_phi * ey, sin_phi * ex + cos_phi * ey)

        pa, pb = ellipse_point(ta), ellipse_point(tb)
        da, db = ellipse_tangent(ta), ellipse_tangent(tb)
        c1 = (pa[0] + t * da[0], pa[1] + t * da[1])
        c2 = (pb[0] - t * db[0], pb[1] - t * db[1])
        out.append((c1, c2, pb))
    return out


def flatten_path(
    commands: list[PathCommand] | tuple[PathCommand, ...],
    tolerance: float = FLATTEN_TOLERANCE,
) -> list[Polyline]:
    """Flatten absolute commands into polylines, one per subpath.

    Curves subdivide until the control polygon sits within ``tolerance`` of
    the chord; arcs go through the cubic decomposition first. Zero-radius
    arcs degrade to straight lines.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    polylines: list[Polyline] = []
    current: list[tuple[float, float]] = []
    closed = False
    cx = cy = 0.0

    def commit():
        nonlocal current, closed
        if current:
            pts = [current[0]]
            for p in current[1:]:
                if p != pts[-1]:
                    pts.append(p)
            polylines.append(Polyline(np.array(pts, dtype=np.float64), closed))
        current = []
        closed = False

    for cmd in commands:
        if cmd.letter == "M":
            commit()
            cx, cy = cmd.end
            current = [(cx, cy)]
        elif cmd.letter == "L":
            current.append(cmd.end)
            cx, cy = cmd.end
        elif cmd.letter == "C":
            x1, y1, x2, y2, x, y = cmd.args
            _flatten_cubic((cx, cy), (x1, y1), (x2, y2), (x, y), tolerance, current)
            cx, cy = x, y
        elif cmd.letter == "Q":
            x1, y1, x, y = cmd.args
            c1, c2 = _quad_to_cubic((cx, cy), (x1, y1), (x, y))
            _flatten_cubic((cx, cy), c1, c2, (x, y), tolerance, current)
            cx, cy = x, y
        elif cmd.letter == "A":
            rx, ry, rot, large, sweep, x, y = cmd.args
            cubics = arc_to_cubics((cx, cy), rx, ry, rot, bool(large), bool(sweep), (x, y))
            if not cubics:
                if (x, y) != (cx, cy):
                    current.append((x, y))
            else:
                p0 = (cx, cy)
                for c1, c2, pb in cubics:
                    _flatten_cubic(p0, c1, c2, pb, tolerance, current)
                    p0 = pb
            cx, cy = x, y
        elif cmd.letter == "Z":
            closed = True
            commit()
    commit()
    return polylines


# ---------------------------------------------------------------------------
# Coverage rasterization
# ---------------------------------------------------------------------------


def _polygon_coverage(
    loops: list[np.ndarray], width: int, height: int, rule: str
) -> np.ndarray:
    """Per-pixel coverage in [0, 1] of the union of closed loops under a fill
    rule, with 4x vertical supersampling and exact horizontal span overlap."""
    edges = []
    for pts in loops:
        if len(pts) < 2:
            continue
        nxt = np.roll(pts, -1, axis=0)
        edges.append(np.column_stack([pts, nxt]))
    if not edges:
        return np.zeros((height, width))
    e = np.concatenate(edges, axis=0)
    x0, y0, x1, y1 = e[:, 0], e[:, 1], e[:, 2], e[:, 3]
    keep = y0 != y1
    x0, y0, x1, y1 = x0[keep], y0[keep], x1[keep], y1[keep]
    if x0.size == 0:
        return np.zeros((height, width))

    n_rows = height * SUBSAMPLES
    ymin = np.minimum(y0, y1)
    ymax = np.maximum(y0, y1)
    # sub-row i samples at y = (i + 0.5) / SUBSAMPLES; crossings use [ymin, ymax)
    i0 = np.clip(np.ceil(ymin * SUBSAMPLES - 0.5), 0, n_rows).astype(np.int64)
    i1 = np.clip(np.ceil(ymax * SUBSAMPLES - 0.5), 0, n_rows).astype(np.int64)
    counts = np.maximum(i1 - i0, 0)
    total = int(counts.sum())
    if total == 0:
        return np.zeros((height, width))

    eidx = np.repeat(np.arange(x0.size), counts)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    rows = np.arange(total) - np.repeat(starts, counts) + np.repeat(i0, counts)

    ys = (rows + 0.5) / SUBSAMPLES
    t = (ys - y0[eidx]) / (y1[eidx] - y0[eidx])
    xs = x0[eidx] + t * (x1[eidx] - x0[eidx])
    winding = np.where(y1 > y0, 1, -1)[eidx]

    order = np.lexsort((xs, rows))
    r = rows[order]
    x = xs[order]
    w = winding[order]

    if rule == "nonzero":
        # closed loops give zero net winding per row, so one global cumsum
        # never leaks winding across row boundaries
        inside = np.cumsum(w) != 0
    else:
        idx = np.arange(r.size)
        is_start = np.ones(r.size, dtype=bool)
        is_start[1:] = r[1:] != r[:-1]
        row_start = np.maximum.accumulate(np.where(is_start, idx, 0))
        inside = ((idx - row_start) % 2) == 0

    same_row = r[1:] == r[:-1]
    take = same_row & inside[:-1]
    a = np.clip(x[:-1][take], 0.0, float(width))
    b = np.clip(x[1:][take], 0.0, float(width))
    rr = r[:-1][take]
    keep_span = b > a
    a, b, rr = a[keep_span], b[keep_span], rr[keep_span]
    if a.size == 0:
        return np.zeros((height, width))

    ia = np.floor(a).astype(np.int64)
    ib = np.floor(b).astype(np.int64)
    stride = width + 1
    base = rr * stride
    cov = np.zeros(n_rows * stride)
    same_px = ia == ib
    np.add.at(cov, base[same_px] + ia[same_px], (b - a)[same_px])
    ms = ~same_px
    np.add.at(cov, base[ms] + ia[ms], ia[ms] + 1.0 - a[ms])
    right = ms & (ib < width)
    np.add.at(cov, base[right] + ib[right], (b - ib)[right])
    # full interior pixels via a difference array swept by cumsum
    run = np.zeros(n_rows * stride)
    np.add.at(run, base[ms] + ia[ms] + 1, 1.0)
    np.add.at(run, base[ms] + np.minimum(ib[ms], width), -1.0)
    cov += run.reshape(n_rows, stride).cumsum(axis=1).reshape(-1)

    per_row = cov.reshape(n_rows, stride)[:, :width]
    coverage = per_row.reshape(height, SUBSAMPLES, width).mean(axis=1)
    return np.clip(coverage, 0.0, 1.0)


_OCTAGON = np.array(
    [
        (math.cos(math.radians(22.5 + 45.0 * k)), math.sin(math.radians(22.5 + 45.0 * k)))
        for k in range(8)
    ]
)


def _oriented(loop: np.ndarray) -> np.ndarray:
    # normalize loop orientation so overlapping stroke pieces union under nonzero
    x, y = loop[:, 0], loop[:, 1]
    area2 = np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)
    return loop if area2 >= 0 else loop[::-1]


def _stroke_loops(polylines: list[Polyline], stroke_width: float) -> list[np.ndarray]:
    radius = stroke_width / 2.0
    loops: list[np.ndarray] = []
    disc = _OCTAGON * radius
    for pl in polylines:
        pts = pl.points
        if len(pts) == 0:
            continue
        segs = np.concatenate([pts, pts[:1]]) if pl.closed and len(pts) > 2 else pts
        for i in range(len(segs) - 1):
            p, q = segs[i], segs[i + 1]
            d = q - p
            length = math.hypot(d[0], d[1])
            if length == 0.0:
                continue
            n = np.array([d[1], -d[0]]) * (radius / length)
            loops.append(_oriented(np.array([p + n, q + n, q - n, p - n])))
        for v in pts:
            loops.append(_oriented(disc + v))
    return loops


def _composite(canvas: np.ndarray, paint: Rgba, coverage: np.ndarray) -> None:
    alpha = coverage * paint.a
    if not alpha.any():
        return
    color = np.array([paint.r, paint.g, paint.b], dtype=np.float64)
    canvas *= (1.0 - alpha)[:, :, None]
    canvas += color[None, None, :] * alpha[:, :, None]


def render(doc: SvgDocument, resolution: int = 224) -> RasterImage:
    """Rasterize a document onto an opaque white square canvas."""
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    min_x, min_y, vb_w, vb_h = doc.viewbox
    sx = resolution / vb_w
    sy = resolution / vb_h
    canvas = np.full((resolution, resolution, 3), 255.0)
    origin = np.array([min_x, min_y])
    scale = np.array([sx, sy])

    for path in doc.paths:
        polylines = flatten_path(path.commands)
        px = [Polyline((pl.points - origin) * scale, pl.closed) for pl in polylines]
        style = path.style
        if style.fill is not None:
            loops = [pl.points for pl in px if len(pl.points) >= 2]
            coverage = _polygon_coverage(loops, resolution, resolution, style.fill_rule)
            _composite(canvas, style.fill, coverage)
        if style.stroke is not None:
            width_px = style.stroke_width * (sx + sy) / 2.0
            loops = _stroke_loops(px, width_px)
            coverage = _polygon_coverage(loops, resolution, resolution, "nonzero")
            _composite(canvas, style.stroke, coverage)

    return RasterImage(np.rint(np.clip(canvas, 0.0, 255.0)).astype(np.uint8))


# ---------------------------------------------------------------------------
# Pen trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrajectorySegment:
    pen_down: bool
    points: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class Trajectory:
    segments: tuple[TrajectorySegment, ...]

    def total_down_length(self) -> float:
        length = 0.0
        for seg in self.segments:
            if not seg.pen_down:
                continue
            for (x0, y0), (x1, y1) in zip(seg.points, seg.points[1:]):
                length += math.hypot(x1 - x0, y1 - y0)
        return length


def _resample_polyline(points: np.ndarray, spacing: float) -> list[tuple[float, float]]:
    if len(points) == 1:
        return [tuple(points[0])]
    deltas = np.diff(points, axis=0)
    seg_len = np.hypot(deltas[:, 0], deltas[:, 1])
    total = float(seg_len.sum())
    if total == 0.0:
        return [tuple(points[0])]
    n = max(1, math.ceil(total / spacing))
    targets = np.linspace(0.0, total, n + 1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    xs = np.interp(targets, cum, points[:, 0])
    ys = np.interp(targets, cum, points[:, 1])
    out: list[tuple[float, float]] = []
    for x, y in zip(xs, ys):
        p = (float(x), float(y))
        if not out or p != out[-1]:
            out.append(p)
    return out


def path_to_trajectory(doc: SvgDocument, spacing: float) -> Trajectory:
    """Convert every subpath into a pen-down polyline resampled at arc-length
    steps of at most ``spacing``, with pen-up travel segments in between."""
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    segments: list[TrajectorySegment] = []
    for path in doc.paths:
        for pl in flatten_path(path.commands):
            pts = pl.points
            if pl.closed and len(pts) > 1:
                pts = np.concatenate([pts, pts[:1]])
            resampled = _resample_polyline(pts, spacing)
            if segments:
                prev_end = segments[-1].points[-1]
                segments.append(
                    TrajectorySegment(False, (prev_end, resampled[0]))
                )
            segments.append(TrajectorySegment(True, tuple(resampled)))
    return Trajectory(tuple(segments))


def format_trajectory(traj: Trajectory) -> str:
    """Line-oriented export: one ``U x y`` or ``D x y`` line per point."""
    from .svg_core import format_number

    lines = []
    for seg in traj.segments:
        tag = "D" if seg.pen_down else "U"
        for x, y in seg.points:
            lines.append(f"{tag} {format_number(x)} {format_number(y)}")
    return "\n".join(lines) + "\n"
