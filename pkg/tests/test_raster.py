import math
import random

import numpy as np
import pytest

from conftest import random_document
from svgpipe.normalizer import normalize
from svgpipe.raster import (
    RasterImage,
    arc_to_cubics,
    flatten_path,
    format_trajectory,
    path_to_trajectory,
    render,
)
from svgpipe.svg_core import (
    PathStyle,
    Rgba,
    SvgDocument,
    SvgPath,
    arc,
    close,
    cubic,
    line,
    move,
)

BLACK = PathStyle(fill=Rgba(0, 0, 0, 1.0))


def square_doc():
    path = SvgPath((move(0, 0), line(200, 0), line(200, 200), line(0, 200), close()), BLACK)
    return SvgDocument((0.0, 0.0, 200.0, 200.0), (path,))


# ---------------------------------------------------------------------------
# RasterImage container
# ---------------------------------------------------------------------------


class TestRasterImage:
    def test_immutability(self):
        img = RasterImage.blank(4, 4)
        with pytest.raises(ValueError):
            img.pixels[0, 0, 0] = 3
        with pytest.raises(AttributeError):
            img.pixels = None

    def test_png_roundtrip(self):
        rng = np.random.default_rng(0)
        img = RasterImage(rng.integers(0, 256, (20, 30, 3), dtype=np.uint8))
        assert RasterImage.from_png_bytes(img.to_png_bytes()) == img

    def test_ppm_roundtrip(self):
        rng = np.random.default_rng(1)
        img = RasterImage(rng.integers(0, 256, (7, 5, 3), dtype=np.uint8))
        data = img.to_ppm_bytes()
        assert data.startswith(b"P6\n5 7\n255\n")
        assert RasterImage.from_ppm_bytes(data) == img

    def test_save_load(self, tmp_path):
        img = render(square_doc(), 32)
        for name in ("a.png", "a.ppm"):
            img.save(tmp_path / name)
            assert RasterImage.load(tmp_path / name) == img

    def test_letterbox_resample(self):
        arr = np.zeros((50, 100, 3), dtype=np.uint8)
        img = RasterImage(arr).resample_letterbox(224, 224)
        assert (img.width, img.height) == (224, 224)
        assert tuple(img.pixels[0, 112]) == (255, 255, 255)  # top border
        assert tuple(img.pixels[112, 112]) == (0, 0, 0)  # centered content

    def test_content_hash_distinguishes(self):
        a = RasterImage.blank(4, 4)
        b = RasterImage.blank(4, 4, color=(0, 0, 0))
        assert a.content_hash() != b.content_hash()
        assert a.content_hash() == RasterImage.blank(4, 4).content_hash()


# ---------------------------------------------------------------------------
# Flattening
# ---------------------------------------------------------------------------


def _polyline_samples(polyline, n):
    pts = polyline.points
    if polyline.closed:
        pts = np.concatenate([pts, pts[:1]])
    seg = np.diff(pts, axis=0)
    lengths = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    targets = np.linspace(0.0, cum[-1], n)
    xs = np.interp(targets, cum, pts[:, 0])
    ys = np.interp(targets, cum, pts[:, 1])
    return np.column_stack([xs, ys])


class TestFlatten:
    def test_lines_pass_through(self):
        (pl,) = flatten_path([move(0, 0), line(10, 0), close()])
        assert pl.closed
        assert pl.points.tolist() == [[0, 0], [10, 0]]

    def test_quarter_arc_stays_on_circle(self):
        cmds = [move(150, 100), arc(50, 50, 0, 0, 1, 100, 150)]
        (pl,) = flatten_path(cmds, tolerance=0.05)
        samples = _polyline_samples(pl, 1000)
        radii = np.hypot(samples[:, 0] - 100, samples[:, 1] - 100)
        assert np.abs(radii - 50).max() <= 0.1

    def test_big_arc_radial_deviation(self):
        cmds = [move(100, 0), arc(100, 100, 0, 0, 1, 0, 100)]
        (pl,) = flatten_path(cmds, tolerance=0.05)
        samples = _polyline_samples(pl, 1000)
        radii = np.hypot(samples[:, 0] - 0, samples[:, 1] - 0)
        assert np.abs(radii - 100).max() <= 0.1

    def test_cubic_length_matches_adaptive_simpson(self):
        p0, p1, p2, p3 = (0, 0), (0, 10), (10, 10), (10, 0)

        def speed(t):
            mt = 1 - t
            dx = 3 * mt**2 * (p1[0] - p0[0]) + 6 * mt * t * (p2[0] - p1[0]) + 3 * t**2 * (p3[0] - p2[0])
            dy = 3 * mt**2 * (p1[1] - p0[1]) + 6 * mt * t * (p2[1] - p1[1]) + 3 * t**2 * (p3[1] - p2[1])
            return math.hypot(dx, dy)

        def simpson(f, a, b):
            return (b - a) / 6 * (f(a) + 4 * f((a + b) / 2) + f(b))

        def adaptive(f, a, b, eps, whole, depth=0):
            m = (a + b) / 2
            left, right = simpson(f, a, m), simpson(f, m, b)
            if depth > 30 or abs(left + right - whole) <= 15 * eps:
                return left + right + (left + right - whole) / 15
            return adaptive(f, a, m, eps / 2, left, depth + 1) + adaptive(
                f, m, b, eps / 2, right, depth + 1
            )

        oracle = adaptive(speed, 0.0, 1.0, 1e-9, simpson(speed, 0.0, 1.0))
        assert abs(oracle - 20.0) < 1.0  # the curve is about 20 units long

        (pl,) = flatten_path([move(*p0), cubic(p1[0], p1[1], p2[0], p2[1], p3[0], p3[1])],
                             tolerance=0.01)
        seg = np.diff(pl.points, axis=0)
        chord_length = np.hypot(seg[:, 0], seg[:, 1]).sum()
        assert abs(chord_length - oracle) <= 0.01 * oracle

    def test_zero_radius_arc_degrades_to_line(self):
        (pl,) = flatten_path([move(0, 0), arc(0, 5, 0, 0, 1, 10, 0)])
        assert pl.points.tolist() == [[0, 0], [10, 0]]

    def test_multiple_subpaths(self):
        pls = flatten_path(
            [move(0, 0), line(1, 0), move(5, 5), line(6, 5), close()]
        )
        assert len(pls) == 2
        assert not pls[0].closed and pls[1].closed

    def test_bad_tolerance(self):
        with pytest.raises(ValueError):
            flatten_path([move(0, 0)], tolerance=0.0)


def test_arc_to_cubic_radial_error_below_threshold():
    # one cubic per <= 90 degree sweep must stay within 1e-3 * r of the circle
    for r in (5.0, 50.0, 100.0):
        cubics = arc_to_cubics((r, 0), r, r, 0, False, True, (0, r))
        assert len(cubics) == 1
        p0 = (r, 0.0)
        for c1, c2, p3 in cubics:
            for t in np.linspace(0, 1, 400):
                mt = 1 - t
                x = mt**3 * p0[0] + 3 * mt**2 * t * c1[0] + 3 * mt * t**2 * c2[0] + t**3 * p3[0]
                y = mt**3 * p0[1] + 3 * mt**2 * t * c1[1] + 3 * mt * t**2 * c2[1] + t**3 * p3[1]
                assert abs(math.hypot(x, y) - r) <= 1e-3 * r
            p0 = p3


def test_out_of_range_radii_scale_up():
    # endpoints 20 apart but radius 5: radii must scale so the arc exists
    cubics = arc_to_cubics((0, 0), 5, 5, 0, False, True, (20, 0))
    end = cubics[-1][2]
    assert math.hypot(end[0] - 20, end[1]) < 1e-9
    xs = [p[0] for c in cubics for p in c]
    ys = [p[1] for c in cubics for p in c]
    assert max(map(abs, xs)) < 50 and max(map(abs, ys)) < 50


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _dark_fraction(img: RasterImage) -> float:
    luma = img.pixels.astype(np.float64).mean(axis=2)
    return float((luma < 128).mean())


class TestRender:
    def test_full_viewbox_square_all_black(self):
        img = render(square_doc(), 200)
        assert (img.pixels == 0).all()

    def test_empty_document_all_white(self):
        img = render(SvgDocument((0.0, 0.0, 200.0, 200.0)), 64)
        assert (img.pixels == 255).all()

    def test_right_triangle_half_area(self):
        path = SvgPath((move(0, 0), line(200, 0), line(0, 200), close()), BLACK)
        img = render(SvgDocument((0.0, 0.0, 200.0, 200.0), (path,)), 224)
        assert abs(_dark_fraction(img) - 0.5) <= 0.01

    def test_deterministic(self):
        doc = normalize(random_document(random.Random(11)))
        assert render(doc, 96) == render(doc, 96)

    def test_resolution_must_be_sane(self):
        with pytest.raises(ValueError):
            render(square_doc(), 8)

    def test_evenodd_ring_has_hole(self):
        outer = (move(40, 40), line(160, 40), line(160, 160), line(40, 160), close())
        inner = (move(80, 80), line(120, 80), line(120, 120), line(80, 120), close())
        ring = SvgPath(outer + inner, PathStyle(fill=Rgba(0, 0, 0, 1.0), fill_rule="evenodd"))
        img = render(SvgDocument((0.0, 0.0, 200.0, 200.0), (ring,)), 200)
        assert tuple(img.pixels[100, 100]) == (255, 255, 255)  # hole
        assert tuple(img.pixels[60, 60]) == (0, 0, 0)  # ring body
        solid = SvgPath(outer + inner, BLACK)  # same winding: nonzero fills it
        img2 = render(SvgDocument((0.0, 0.0, 200.0, 200.0), (solid,)), 200)
        assert tuple(img2.pixels[100, 100]) == (0, 0, 0)

    def test_alpha_blends_over_white(self):
        path = SvgPath(
            (move(0, 0), line(200, 0), line(200, 200), line(0, 200), close()),
            PathStyle(fill=Rgba(0, 0, 0, 0.5)),
        )
        img = render(SvgDocument((0.0, 0.0, 200.0, 200.0), (path,)), 32)
        assert tuple(img.pixels[16, 16]) == (128, 128, 128)

    def test_paint_order_is_document_order(self):
        below = SvgPath(
            (move(0, 0), line(200, 0), line(200, 200), line(0, 200), close()),
            PathStyle(fill=Rgba(255, 0, 0, 1.0)),
        )
        above = SvgPath(
            (move(50, 50), line(150, 50), line(150, 150), line(50, 150), close()),
            PathStyle(fill=Rgba(0, 0, 255, 1.0)),
        )
        img = render(SvgDocument((0.0, 0.0, 200.0, 200.0), (below, above)), 100)
        assert tuple(img.pixels[50, 50]) == (0, 0, 255)
        assert tuple(img.pixels[10, 10]) == (255, 0, 0)

    def test_stroke_band(self):
        path = SvgPath(
            (move(50, 100), line(150, 100)),
            PathStyle(fill=None, stroke=Rgba(0, 0, 0, 1.0), stroke_width=20.0),
        )
        img = render(SvgDocument((0.0, 0.0, 200.0, 200.0), (path,)), 200)
        assert tuple(img.pixels[100, 100]) == (0, 0, 0)  # on the line
        assert tuple(img.pixels[105, 100]) == (0, 0, 0)  # inside half-width
        assert tuple(img.pixels[100, 30]) == (255, 255, 255)  # beyond the cap
        assert tuple(img.pixels[130, 100]) == (255, 255, 255)  # below the band

    def test_convex_polygon_areas_match_shoelace(self):
        rng = random.Random(99)
        for _ in range(20):
            n = rng.randint(3, 9)
            angles = sorted(rng.uniform(0, 2 * math.pi) for _ in range(n))
            cx, cy = rng.uniform(60, 140), rng.uniform(60, 140)
            radius = rng.uniform(25, 55)
            pts = [
                (cx + radius * math.cos(a), cy + radius * math.sin(a)) for a in angles
            ]
            area = 0.5 * abs(
                sum(
                    pts[i][0] * pts[(i + 1) % n][1] - pts[(i + 1) % n][0] * pts[i][1]
                    for i in range(n)
                )
            )
            if area < 400:  # skip near-degenerate polygons
                continue
            cmds = [move(*pts[0])] + [line(*p) for p in pts[1:]] + [close()]
            doc = SvgDocument((0.0, 0.0, 200.0, 200.0), (SvgPath(tuple(cmds), BLACK),))
            img = render(doc, 224)
            assert abs(_dark_fraction(img) - area / 200**2) <= 0.01

    def test_monotone_coverage(self):
        rng = random.Random(5)
        for _ in range(10):
            doc = normalize(random_document(rng, max_paths=3))
            base = render(doc, 96)
            extra = SvgPath(
                (
                    move(rng.randint(0, 150), rng.randint(0, 150)),
                    line(rng.randint(0, 200), rng.randint(0, 200)),
                    line(rng.randint(0, 200), rng.randint(0, 200)),
                    close(),
                ),
                PathStyle(fill=Rgba(200, 30, 30, 1.0)),
            )
            grown = render(SvgDocument(doc.viewbox, doc.paths + (extra,)), 96)
            non_white = lambda im: int((im.pixels != 255).any(axis=2).sum())  # noqa: E731
            assert non_white(grown) >= non_white(base)

    def test_downscaled_render_matches_direct(self):
        rng = random.Random(21)
        for _ in range(5):
            doc = normalize(random_document(rng, max_paths=3))
            hi = render(doc, 448).pixels.astype(np.float64)
            box = hi.reshape(224, 2, 224, 2, 3).mean(axis=(1, 3))
            lo = render(doc, 224).pixels.astype(np.float64)
            assert np.abs(box - lo).mean() <= 4.0


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------


class TestTrajectory:
    def test_line_resampling(self):
        doc = SvgDocument((0.0, 0.0, 200.0, 200.0), (SvgPath((move(0, 0), line(10, 0))),))
        traj = path_to_trajectory(doc, spacing=5.0)
        assert len(traj.segments) == 1
        seg = traj.segments[0]
        assert seg.pen_down
        assert seg.points == ((0.0, 0.0), (5.0, 0.0), (10.0, 0.0))

    def test_two_subpaths_one_travel(self):
        doc = SvgDocument(
            (0.0, 0.0, 200.0, 200.0),
            (SvgPath((move(0, 0), line(10, 0), move(50, 50), line(60, 50))),),
        )
        traj = path_to_trajectory(doc, spacing=5.0)
        states = [s.pen_down for s in traj.segments]
        assert states == [True, False, True]
        up = traj.segments[1]
        assert up.points == ((10.0, 0.0), (50.0, 50.0))

    def test_quarter_arc_length(self):
        doc = SvgDocument(
            (0.0, 0.0, 200.0, 200.0),
            (SvgPath((move(100, 0), arc(100, 100, 0, 0, 1, 0, 100))),),
        )
        traj = path_to_trajectory(doc, spacing=1.0)
        assert abs(traj.total_down_length() - math.pi * 100 / 2) <= 0.5

    def test_spacing_respected(self):
        doc = SvgDocument((0.0, 0.0, 200.0, 200.0), (SvgPath((move(0, 0), line(33, 0))),))
        traj = path_to_trajectory(doc, spacing=4.0)
        pts = traj.segments[0].points
        gaps = [math.dist(a, b) for a, b in zip(pts, pts[1:])]
        assert all(g <= 4.0 + 1e-9 for g in gaps)

    def test_closed_subpath_includes_closing_edge(self):
        doc = SvgDocument(
            (0.0, 0.0, 200.0, 200.0),
            (SvgPath((move(0, 0), line(10, 0), line(10, 10), close())),),
        )
        traj = path_to_trajectory(doc, spacing=100.0)
        assert traj.segments[0].points[-1] == (0.0, 0.0)

    def test_format(self):
        doc = SvgDocument(
            (0.0, 0.0, 200.0, 200.0),
            (SvgPath((move(0, 0), line(10, 0), move(5, 5), line(6, 5))),),
        )
        text = format_trajectory(path_to_trajectory(doc, spacing=50.0))
        lines = text.strip().splitlines()
        assert lines[0] == "D 0 0"
        assert "U 10 0" in lines and "U 5 5" in lines
        assert text.endswith("\n")

    def test_bad_spacing(self):
        with pytest.raises(ValueError):
            path_to_trajectory(square_doc(), 0.0)
