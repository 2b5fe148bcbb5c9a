"""Restricted-dialect SVG document model.

The dialect accepted here is a single ``<svg>`` root with a viewBox, ``<path>``
children and the six basic shapes (rect, circle, ellipse, line, polygon,
polyline), with solid fills and strokes. Path data is parsed with the full
SVG 1.1 grammar (relative commands, H/V/S/T shorthands, implicit repetition)
and lowered to an absolute {M, L, C, Q, A, Z} command list, which is the only
form the document model stores. Serialization always emits one canonical text
form so equal documents produce byte-identical output.
"""

from __future__ import annotations

import math
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence


class SvgError(Exception):
    """Base class for all parse and conversion errors in this module."""


class PathDataError(SvgError):
    """Path-data error carrying the byte offset where parsing failed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class MissingCoordinate(PathDataError):
    pass


class UnknownLetter(PathDataError):
    pass


class NonFiniteNumber(PathDataError):
    pass


class BadArcFlag(PathDataError):
    pass


class MalformedMarkup(SvgError):
    pass


class MissingViewBox(SvgError):
    pass


class UnsupportedConstruct(SvgError):
    pass


class GradientUnsupported(SvgError):
    pass


class NegativeDimension(SvgError):
    pass


class RoundedRectUnsupported(SvgError):
    pass


class StartsWithoutMove(SvgError):
    pass


# Arity of each command letter (argument count per repetition group).
ARITY = {"M": 2, "L": 2, "H": 1, "V": 1, "C": 6, "S": 4, "Q": 4, "T": 2, "A": 7, "Z": 0}
COMMAND_LETTERS = set("MmLlHhVvCcSsQqTtAaZz")
RESTRICTED_LETTERS = ("M", "L", "C", "Q", "A", "Z")

_NUMBER_RE = re.compile(r"[-+]?(?:\d*\.\d+|\d+\.?)(?:[eE][-+]?\d+)?")
_WSP = " \t\r\n\f"


@dataclass(frozen=True)
class RawCommand:
    """A path command exactly as written: letter plus its argument run.

    The argument run may hold several repetition groups, so ``len(args)`` is
    a positive multiple of the letter's arity (zero for Z).
    """

    letter: str
    args: tuple[float, ...] = ()

    def __post_init__(self):
        if self.letter not in COMMAND_LETTERS:
            raise ValueError(f"not a path command letter: {self.letter!r}")
        arity = ARITY[self.letter.upper()]
        if arity == 0:
            if self.args:
                raise ValueError("close-path takes no arguments")
        elif not self.args or len(self.args) % arity != 0:
            raise ValueError(
                f"{self.letter} takes a positive multiple of {arity} arguments"
            )


@dataclass(frozen=True)
class PathCommand:
    """An absolute command over the restricted alphabet {M, L, C, Q, A, Z}.

    Argument layout: M/L (x, y); C (x1, y1, x2, y2, x, y); Q (x1, y1, x, y);
    A (rx, ry, xrot_deg, large_arc, sweep, x, y); Z ().
    """

    letter: str
    args: tuple[float, ...] = ()

    def __post_init__(self):
        if self.letter not in RESTRICTED_LETTERS:
            raise ValueError(f"letter outside restricted alphabet: {self.letter!r}")
        expected = {"M": 2, "L": 2, "C": 6, "Q": 4, "A": 7, "Z": 0}[self.letter]
        if len(self.args) != expected:
            raise ValueError(f"{self.letter} takes exactly {expected} arguments")
        if not all(math.isfinite(a) for a in self.args):
            raise ValueError("non-finite coordinate")
        if self.letter == "A":
            rx, ry, _, large, sweep = self.args[:5]
            if rx < 0 or ry < 0:
                raise ValueError("negative arc radius")
            if large not in (0.0, 1.0) or sweep not in (0.0, 1.0):
                raise ValueError("arc flags must be 0 or 1")

    @property
    def end(self) -> tuple[float, float]:
        if self.letter == "Z":
            raise ValueError("close-path has no endpoint")
        return self.args[-2], self.args[-1]


def move(x: float, y: float) -> PathCommand:
    return PathCommand("M", (x, y))


def line(x: float, y: float) -> PathCommand:
    return PathCommand("L", (x, y))


def cubic(x1, y1, x2, y2, x, y) -> PathCommand:
    return PathCommand("C", (x1, y1, x2, y2, x, y))


def quad(x1, y1, x, y) -> PathCommand:
    return PathCommand("Q", (x1, y1, x, y))


def arc(rx, ry, xrot, large, sweep, x, y) -> PathCommand:
    return PathCommand("A", (rx, ry, xrot, float(large), float(sweep), x, y))


def close() -> PathCommand:
    return PathCommand("Z")


class Rgba(NamedTuple):
    """8-bit RGB with a [0, 1] alpha."""

    r: int
    g: int
    b: int
    a: float = 1.0


@dataclass(frozen=True)
class PathStyle:
    """Solid paint for one path. stroke_width must be > 0 when stroke is set."""

    fill: Rgba | None = Rgba(0, 0, 0, 1.0)
    fill_rule: str = "nonzero"
    stroke: Rgba | None = None
    stroke_width: float = 0.0

    def __post_init__(self):
        if self.fill_rule not in ("nonzero", "evenodd"):
            raise ValueError(f"bad fill rule: {self.fill_rule!r}")
        if self.stroke is not None and not self.stroke_width > 0:
            raise ValueError("stroke present but stroke_width is not positive")
        for paint in (self.fill, self.stroke):
            if paint is not None and not 0.0 <= paint.a <= 1.0:
                raise ValueError("alpha outside [0, 1]")


@dataclass(frozen=True)
class SvgPath:
    """One styled path: commands start with M and every Z is followed by M."""

    commands: tuple[PathCommand, ...]
    style: PathStyle = PathStyle()

    def __post_init__(self):
        if not self.commands or self.commands[0].letter != "M":
            raise ValueError("path must start with a moveto")
        for prev, cur in zip(self.commands, self.commands[1:]):
            if prev.letter == "Z" and cur.letter != "M":
                raise ValueError("command after close-path must be a moveto")


@dataclass(frozen=True)
class SvgDocument:
    """A viewbox plus styled paths in document order."""

    viewbox: tuple[float, float, float, float]
    paths: tuple[SvgPath, ...] = ()

    def __post_init__(self):
        _, _, w, h = self.viewbox
        if not (w > 0 and h > 0):
            raise ValueError("viewbox width and height must be positive")


# ---------------------------------------------------------------------------
# Path-data parsing
# ---------------------------------------------------------------------------


def parse_path_data(text: str) -> list[RawCommand]:
    """Parse a path ``d`` attribute into raw commands.

    Accepts the full grammar: relative letters, H/V/S/T shorthands, implicit
    repetition (extra argument groups stay attached to their command), and
    comma/whitespace separators. Errors carry the byte offset of the failure.
    """
    commands: list[RawCommand] = []
    i, n = 0, len(text)

    def skip_separators(pos: int, allow_comma: bool) -> int:
        seen_comma = False
        while pos < n:
            ch = text[pos]
            if ch in _WSP:
                pos += 1
            elif ch == "," and allow_comma and not seen_comma:
                seen_comma = True
                pos += 1
            else:
                break
        return pos

    def read_number(pos: int) -> tuple[float, int]:
        m = _NUMBER_RE.match(text, pos)
        if not m:
            raise MissingCoordinate("expected a coordinate", pos)
        value = float(m.group())
        if not math.isfinite(value):
            raise NonFiniteNumber(f"non-finite number {m.group()!r}", pos)
        return value, m.end()

    def read_flag(pos: int) -> tuple[float, int]:
        # Arc flags are single '0'/'1' characters, which also admits the
        # compact run-together form ("...0 01150 50").
        if pos >= n or text[pos] not in "01":
            raise BadArcFlag("arc flag must be 0 or 1", pos)
        return float(text[pos]), pos + 1

    def starts_number(pos: int) -> bool:
        return pos < n and (text[pos].isdigit() or text[pos] in "+-.")

    while True:
        i = skip_separators(i, allow_comma=False)
        if i >= n:
            break
        ch = text[i]
        if ch not in COMMAND_LETTERS:
            raise UnknownLetter(f"expected a command letter, found {ch!r}", i)
        letter = ch
        i += 1
        arity = ARITY[letter.upper()]
        if arity == 0:
            commands.append(RawCommand(letter))
            continue
        args: list[float] = []
        while True:
            for slot in range(arity):
                i = skip_separators(i, allow_comma=bool(args) or slot > 0)
                if letter in "Aa" and slot in (3, 4):
                    value, i = read_flag(i)
                else:
                    value, i = read_number(i)
                args.append(value)
            probe = skip_separators(i, allow_comma=True)
            if not starts_number(probe):
                break
        commands.append(RawCommand(letter, tuple(args)))
    return commands


def _groups(args: Sequence[float], arity: int) -> Iterable[tuple[float, ...]]:
    if arity == 0:
        yield ()
        return
    for k in range(0, len(args), arity):
        yield tuple(args[k : k + arity])


def lower_to_absolute(raw: Sequence[RawCommand]) -> list[PathCommand]:
    """Lower raw commands to the absolute restricted alphabet.

    Relative commands are resolved against the running current point, H/V
    become L, S/T become C/Q with the standard reflected first control,
    implicit repetitions are expanded, and any drawing command directly after
    a Z gets an explicit moveto back to the subpath start (which is where
    drawing resumes per path semantics).
    """
    if not raw or raw[0].letter not in ("M", "m"):
        raise StartsWithoutMove("path data must start with a moveto")

    out: list[PathCommand] = []
    cx = cy = 0.0  # current point
    sx = sy = 0.0  # subpath start
    prev_cubic_ctrl: tuple[float, float] | None = None
    prev_quad_ctrl: tuple[float, float] | None = None
    after_close = False

    for cmd in raw:
        rel = cmd.letter.islower()
        upper = cmd.letter.upper()
        for gi, g in enumerate(_groups(cmd.args, ARITY[upper])):
            op = upper
            if op == "M" and gi > 0:
                op = "L"  # trailing moveto pairs are implicit linetos

            if after_close and op != "M":
                out.append(move(sx, sy))
                cx, cy = sx, sy
            if after_close and op == "Z":
                continue  # drop a repeated close with no drawing in between
            after_close = False

            new_cubic = new_quad = None
            if op == "M":
                x, y = (cx + g[0], cy + g[1]) if rel else (g[0], g[1])
                out.append(move(x, y))
                cx, cy, sx, sy = x, y, x, y
            elif op == "L":
                x, y = (cx + g[0], cy + g[1]) if rel else (g[0], g[1])
                out.append(line(x, y))
                cx, cy = x, y
            elif op == "H":
                x = cx + g[0] if rel else g[0]
                out.append(line(x, cy))
                cx = x
            elif op == "V":
                y = cy + g[0] if rel else g[0]
                out.append(line(cx, y))
                cy = y
            elif op == "C":
                pts = _resolve_pairs(g, cx, cy, rel)
                out.append(cubic(*pts))
                new_cubic = (pts[2], pts[3])
                cx, cy = pts[4], pts[5]
            elif op == "S":
                pts = _resolve_pairs(g, cx, cy, rel)
                if prev_cubic_ctrl is not None:
                    c1 = (2 * cx - prev_cubic_ctrl[0], 2 * cy - prev_cubic_ctrl[1])
                else:
                    c1 = (cx, cy)
                out.append(cubic(c1[0], c1[1], pts[0], pts[1], pts[2], pts[3]))
                new_cubic = (pts[0], pts[1])
                cx, cy = pts[2], pts[3]
            elif op == "Q":
                pts = _resolve_pairs(g, cx, cy, rel)
                out.append(quad(*pts))
                new_quad = (pts[0], pts[1])
                cx, cy = pts[2], pts[3]
            elif op == "T":
                pts = _resolve_pairs(g, cx, cy, rel)
                if prev_quad_ctrl is not None:
                    q1 = (2 * cx - prev_quad_ctrl[0], 2 * cy - prev_quad_ctrl[1])
                else:
                    q1 = (cx, cy)
                out.append(quad(q1[0], q1[1], pts[0], pts[1]))
                new_quad = q1
                cx, cy = pts[0], pts[1]
            elif op == "A":
                rx, ry, rot, large, sweep, x, y = g
                if rel:
                    x, y = cx + x, cy + y
                out.append(arc(abs(rx), abs(ry), rot, large, sweep, x, y))
                cx, cy = x, y
            elif op == "Z":
                out.append(close())
                cx, cy = sx, sy
                after_close = True
            prev_cubic_ctrl = new_cubic
            prev_quad_ctrl = new_quad
    return out


def _resolve_pairs(
    g: Sequence[float], cx: float, cy: float, rel: bool
) -> tuple[float, ...]:
    if not rel:
        return tuple(g)
    return tuple(v + (cx if k % 2 == 0 else cy) for k, v in enumerate(g))


# ---------------------------------------------------------------------------
# Basic shapes
# ---------------------------------------------------------------------------


def shape_to_path(kind: str, attrs: Mapping[str, float | Sequence[float]]) -> list[RawCommand]:
    """Convert a basic shape to raw path commands.

    Circles and ellipses become four quarter arcs, rects become line edges
    with the fourth edge supplied by the close, polygons close and polylines
    do not. Rounded rects are rejected.
    """
    if kind == "rect":
        x = float(attrs.get("x", 0.0))
        y = float(attrs.get("y", 0.0))
        w = float(attrs["width"])
        h = float(attrs["height"])
        if w < 0 or h < 0:
            raise NegativeDimension(f"rect with width={w} height={h}")
        if float(attrs.get("rx", 0.0)) or float(attrs.get("ry", 0.0)):
            raise RoundedRectUnsupported("rect with rounded corners")
        return [
            RawCommand("M", (x, y)),
            RawCommand("L", (x + w, y)),
            RawCommand("L", (x + w, y + h)),
            RawCommand("L", (x, y + h)),
            RawCommand("Z"),
        ]
    if kind in ("circle", "ellipse"):
        cx = float(attrs.get("cx", 0.0))
        cy = float(attrs.get("cy", 0.0))
        if kind == "circle":
            rx = ry = float(attrs["r"])
        else:
            rx = float(attrs["rx"])
            ry = float(attrs["ry"])
        if rx < 0 or ry < 0:
            raise NegativeDimension(f"{kind} with radius ({rx}, {ry})")
        quarters = [(cx, cy + ry), (cx - rx, cy), (cx, cy - ry), (cx + rx, cy)]
        cmds = [RawCommand("M", (cx + rx, cy))]
        for qx, qy in quarters:
            cmds.append(RawCommand("A", (rx, ry, 0.0, 0.0, 1.0, qx, qy)))
        cmds.append(RawCommand("Z"))
        return cmds
    if kind == "line":
        return [
            RawCommand("M", (float(attrs["x1"]), float(attrs["y1"]))),
            RawCommand("L", (float(attrs["x2"]), float(attrs["y2"]))),
        ]
    if kind in ("polygon", "polyline"):
        points = attrs["points"]
        pairs = [(float(points[k]), float(points[k + 1])) for k in range(0, len(points) - 1, 2)]
        if not pairs:
            raise MalformedMarkup(f"{kind} without points")
        cmds = [RawCommand("M", pairs[0])]
        cmds.extend(RawCommand("L", p) for p in pairs[1:])
        if kind == "polygon":
            cmds.append(RawCommand("Z"))
        return cmds
    raise UnsupportedConstruct(f"not a basic shape: {kind}")


# ---------------------------------------------------------------------------
# Color parsing
# ---------------------------------------------------------------------------

# The standard SVG color keywords (sufficient for icon corpora).
NAMED_COLORS: dict[str, tuple[int, int, int]] = {
    "aliceblue": (240, 248, 255), "antiquewhite": (250, 235, 215), "aqua": (0, 255, 255),
    "aquamarine": (127, 255, 212), "azure": (240, 255, 255), "beige": (245, 245, 220),
    "bisque": (255, 228, 196), "black": (0, 0, 0), "blanchedalmond": (255, 235, 205),
    "blue": (0, 0, 255), "blueviolet": (138, 43, 226), "brown": (165, 42, 42),
    "burlywood": (222, 184, 135), "cadetblue": (95, 158, 160), "chartreuse": (127, 255, 0),
    "chocolate": (210, 105, 30), "coral": (255, 127, 80), "cornflowerblue": (100, 149, 237),
    "cornsilk": (255, 248, 220), "crimson": (220, 20, 60), "cyan": (0, 255, 255),
    "darkblue": (0, 0, 139), "darkcyan": (0, 139, 139), "darkgoldenrod": (184, 134, 11),
    "darkgray": (169, 169, 169), "darkgreen": (0, 100, 0), "darkgrey": (169, 169, 169),
    "darkkhaki": (189, 183, 107), "darkmagenta": (139, 0, 139), "darkolivegreen": (85, 107, 47),
    "darkorange": (255, 140, 0), "darkorchid": (153, 50, 204), "darkred": (139, 0, 0),
    "darksalmon": (233, 150, 122), "darkseagreen": (143, 188, 143), "darkslateblue": (72, 61, 139),
    "darkslategray": (47, 79, 79), "darkslategrey": (47, 79, 79), "darkturquoise": (0, 206, 209),
    "darkviolet": (148, 0, 211), "deeppink": (255, 20, 147), "deepskyblue": (0, 191, 255),
    "dimgray": (105, 105, 105), "dimgrey": (105, 105, 105), "dodgerblue": (30, 144, 255),
    "firebrick": (178, 34, 34), "floralwhite": (255, 250, 240), "forestgreen": (34, 139, 34),
    "fuchsia": (255, 0, 255), "gainsboro": (220, 220, 220), "ghostwhite": (248, 248, 255),
    "gold": (255, 215, 0), "goldenrod": (218, 165, 32), "gray": (128, 128, 128),
    "green": (0, 128, 0), "greenyellow": (173, 255, 47), "grey": (128, 128, 128),
    "honeydew": (240, 255, 240), "hotpink": (255, 105, 180), "indianred": (205, 92, 92),
    "indigo": (75, 0, 130), "ivory": (255, 255, 240), "khaki": (240, 230, 140),
    "lavender": (230, 230, 250), "lavenderblush": (255, 240, 245), "lawngreen": (124, 252, 0),
    "lemonchiffon": (255, 250, 205), "lightblue": (173, 216, 230), "lightcoral": (240, 128, 128),
    "lightcyan": (224, 255, 255), "lightgoldenrodyellow": (250, 250, 210),
    "lightgray": (211, 211, 211), "lightgreen": (144, 238, 144), "lightgrey": (211, 211, 211),
    "lightpink": (255, 182, 193), "lightsalmon": (255, 160, 122), "lightseagreen": (32, 178, 170),
    "lightskyblue": (135, 206, 250), "lightslategray": (119, 136, 153),
    "lightslategrey": (119, 136, 153), "lightsteelblue": (176, 196, 222),
    "lightyellow": (255, 255, 224), "lime": (0, 255, 0), "limegreen": (50, 205, 50),
    "linen": (250, 240, 230), "magenta": (255, 0, 255), "maroon": (128, 0, 0),
    "mediumaquamarine": (102, 205, 170), "mediumblue": (0, 0, 205),
    "mediumorchid": (186, 85, 211), "mediumpurple": (147, 112, 219),
    "mediumseagreen": (60, 179, 113), "mediumslateblue": (123, 104, 238),
    "mediumspringgreen": (0, 250, 154), "mediumturquoise": (72, 209, 204),
    "mediumvioletred": (199, 21, 133), "midnightblue": (25, 25, 112),
    "mintcream": (245, 255, 250), "mistyrose": (255, 228, 225), "moccasin": (255, 228, 181),
    "navajowhite": (255, 222, 173), "navy": (0, 0, 128), "oldlace": (253, 245, 230),
    "olive": (128, 128, 0), "olivedrab": (107, 142, 35), "orange": (255, 165, 0),
    "orangered": (255, 69, 0), "orchid": (218, 112, 214), "palegoldenrod": (238, 232, 170),
    "palegreen": (152, 251, 152), "paleturquoise": (175, 238, 238),
    "palevioletred": (219, 112, 147), "papayawhip": (255, 239, 213), "peachpuff": (255, 218, 185),
    "peru": (205, 133, 63), "pink": (255, 192, 203), "plum": (221, 160, 221),
    "powderblue": (176, 224, 230), "purple": (128, 0, 128), "red": (255, 0, 0),
    "rosybrown": (188, 143, 143), "royalblue": (65, 105, 225), "saddlebrown": (139, 69, 19),
    "salmon": (250, 128, 114), "sandybrown": (244, 164, 96), "seagreen": (46, 139, 87),
    "seashell": (255, 245, 238), "sienna": (160, 82, 45), "silver": (192, 192, 192),
    "skyblue": (135, 206, 235), "slateblue": (106, 90, 205), "slategray": (112, 128, 144),
    "slategrey": (112, 128, 144), "snow": (255, 250, 250), "springgreen": (0, 255, 127),
    "steelblue": (70, 130, 180), "tan": (210, 180, 140), "teal": (0, 128, 128),
    "thistle": (216, 191, 216), "tomato": (255, 99, 71), "turquoise": (64, 224, 208),
    "violet": (238, 130, 238), "wheat": (245, 222, 179), "white": (255, 255, 255),
    "whitesmoke": (245, 245, 245), "yellow": (255, 255, 0), "yellowgreen": (154, 205, 50),
}

_HEX_RE = re.compile(r"#([0-9a-fA-F]{3}|[0-9a-fA-F]{6})$")
_RGB_RE = re.compile(r"rgb\(\s*([^,\s]+)\s*,\s*([^,\s]+)\s*,\s*([^,)\s]+)\s*\)$")


def parse_color(text: str) -> tuple[int, int, int] | None:
    """Parse a solid paint value; returns None for 'none', raises on unknown."""
    s = text.strip().lower()
    if s in ("none", "transparent"):
        return None
    m = _HEX_RE.match(s)
    if m:
        digits = m.group(1)
        if len(digits) == 3:
            digits = "".join(d * 2 for d in digits)
        return tuple(int(digits[k : k + 2], 16) for k in (0, 2, 4))  # type: ignore[return-value]
    m = _RGB_RE.match(s)
    if m:
        channels = []
        for part in m.groups():
            if part.endswith("%"):
                channels.append(round(float(part[:-1]) * 255.0 / 100.0))
            else:
                channels.append(round(float(part)))
        return tuple(min(255, max(0, c)) for c in channels)  # type: ignore[return-value]
    if s in NAMED_COLORS:
        return NAMED_COLORS[s]
    raise UnsupportedConstruct(f"unsupported paint value: {text!r}")


# ---------------------------------------------------------------------------
# Document parsing
# ---------------------------------------------------------------------------

_SHAPE_GEOMETRY = {
    "path": {"d"},
    "rect": {"x", "y", "width", "height", "rx", "ry"},
    "circle": {"cx", "cy", "r"},
    "ellipse": {"cx", "cy", "rx", "ry"},
    "line": {"x1", "y1", "x2", "y2"},
    "polygon": {"points"},
    "polyline": {"points"},
}
_STYLE_ATTRS = {"fill", "fill-rule", "fill-opacity", "stroke", "stroke-width", "stroke-opacity"}
_ROOT_ATTRS = {"viewBox", "width", "height", "version", "xmlns"}
_GRADIENT_TAGS = {"linearGradient", "radialGradient"}


def _localname(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _parse_length(value: str) -> float | None:
    s = value.strip()
    if s.endswith("px"):
        s = s[:-2]
    try:
        v = float(s)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def parse_svg(
    text: str, strict: bool = False, warnings: list[str] | None = None
) -> SvgDocument:
    """Parse an SVG document string into the typed model.

    In strict mode any construct outside the dialect raises; in lenient mode
    unsupported elements/attributes are skipped (gradient fills fall back to
    the first stop color) and a note is appended to ``warnings`` if given.
    """

    def warn(message: str) -> None:
        if warnings is not None:
            warnings.append(message)

    try:
        root = ET.fromstring(text)
    except ET.ParseError as e:
        raise MalformedMarkup(f"not well-formed: {e}") from e
    if _localname(root.tag) != "svg":
        raise MalformedMarkup(f"root element is <{_localname(root.tag)}>, not <svg>")

    for attr in root.attrib:
        name = _localname(attr)
        if name not in _ROOT_ATTRS and not attr.startswith("{http://www.w3.org/2000/xmlns/"):
            if strict:
                raise UnsupportedConstruct(f"svg attribute {name!r}")
            warn(f"ignored svg attribute {name!r}")

    viewbox = _read_viewbox(root, strict, warn)
    gradients = _collect_gradient_stops(root)

    paths: list[SvgPath] = []
    for elem in root:
        name = _localname(elem.tag)
        if name == "defs":
            if strict and _contains_gradient(elem):
                raise GradientUnsupported("gradient definitions present")
            if strict:
                raise UnsupportedConstruct("<defs>")
            warn("skipped <defs>")
            continue
        if name in _GRADIENT_TAGS:
            if strict:
                raise GradientUnsupported(f"<{name}>")
            warn(f"skipped <{name}>")
            continue
        if name not in _SHAPE_GEOMETRY:
            if strict:
                raise UnsupportedConstruct(f"<{name}>")
            warn(f"skipped <{name}>")
            continue
        parsed = _parse_shape_element(elem, name, gradients, strict, warn)
        if parsed is not None:
            paths.append(parsed)

    return SvgDocument(viewbox, tuple(paths))


def _read_viewbox(root, strict, warn) -> tuple[float, float, float, float]:
    raw = root.get("viewBox")
    if raw is None:
        w = _parse_length(root.get("width", ""))
        h = _parse_length(root.get("height", ""))
        if not strict and w and h and w > 0 and h > 0:
            warn("no viewBox; derived one from width/height")
            return (0.0, 0.0, w, h)
        raise MissingViewBox("svg element has no viewBox")
    parts = raw.replace(",", " ").split()
    try:
        x, y, w, h = (float(p) for p in parts)
    except ValueError:
        raise MalformedMarkup(f"bad viewBox: {raw!r}") from None
    if not (w > 0 and h > 0 and all(math.isfinite(v) for v in (x, y, w, h))):
        raise MalformedMarkup(f"bad viewBox: {raw!r}")
    return (x, y, w, h)


def _contains_gradient(elem) -> bool:
    return any(_localname(child.tag) in _GRADIENT_TAGS for child in elem.iter())


def _collect_gradient_stops(root) -> dict[str, tuple[int, int, int] | None]:
    stops: dict[str, tuple[int, int, int] | None] = {}
    for elem in root.iter():
        if _localname(elem.tag) not in _GRADIENT_TAGS:
            continue
        gid = elem.get("id")
        if gid is None:
            continue
        first = None
        for child in elem:
            if _localname(child.tag) == "stop":
                color = child.get("stop-color", "#000000")
                try:
                    first = parse_color(color)
                except SvgError:
                    first = (0, 0, 0)
                break
        stops[gid] = first
    return stops


_URL_REF_RE = re.compile(r"url\(\s*#([^)\s]+)\s*\)$")


def _parse_shape_element(elem, name, gradients, strict, warn) -> SvgPath | None:
    allowed = _SHAPE_GEOMETRY[name] | _STYLE_ATTRS
    for attr in elem.attrib:
        if _localname(attr) not in allowed:
            if strict:
                raise UnsupportedConstruct(f"<{name}> attribute {_localname(attr)!r}")
            warn(f"ignored <{name}> attribute {_localname(attr)!r}")

    try:
        raw = _element_geometry(elem, name, strict, warn)
    except (NegativeDimension, RoundedRectUnsupported):
        if strict:
            raise
        warn(f"skipped invalid <{name}>")
        return None
    if raw is None:
        return None

    style = _parse_style(elem, gradients, strict, warn)
    commands = lower_to_absolute(raw)
    return SvgPath(tuple(commands), style)


def _element_geometry(elem, name, strict, warn) -> list[RawCommand] | None:
    if name == "path":
        d = elem.get("d", "")
        raw = parse_path_data(d)
        if not raw:
            if strict:
                raise MalformedMarkup("path with empty d attribute")
            warn("skipped path with empty d attribute")
            return None
        return raw
    attrs: dict[str, float | list[float]] = {}
    if name in ("polygon", "polyline"):
        tokens = elem.get("points", "").replace(",", " ").split()
        try:
            values = [float(t) for t in tokens]
        except ValueError:
            raise MalformedMarkup(f"bad points list on <{name}>") from None
        if len(values) < 4 or len(values) % 2 != 0:
            raise MalformedMarkup(f"bad points list on <{name}>")
        attrs["points"] = values
    else:
        for key in _SHAPE_GEOMETRY[name]:
            value = elem.get(key)
            if value is not None:
                try:
                    attrs[key] = float(value)
                except ValueError:
                    raise MalformedMarkup(f"bad <{name}> attribute {key}={value!r}") from None
        if not strict and (attrs.get("rx") or attrs.get("ry")) and name == "rect":
            warn("ignored rounded corners on <rect>")
            attrs.pop("rx", None)
            attrs.pop("ry", None)
    try:
        return shape_to_path(name, attrs)
    except KeyError as e:
        raise MalformedMarkup(f"<{name}> missing attribute {e}") from None


def _parse_paint(value, gradients, strict, warn, what):
    m = _URL_REF_RE.match(value.strip())
    if m:
        if strict:
            raise GradientUnsupported(f"{what} references a gradient")
        color = gradients.get(m.group(1))
        if color is None:
            warn(f"{what} references unknown paint server; using black")
            return (0, 0, 0)
        warn(f"{what} gradient replaced by its first stop color")
        return color
    try:
        return parse_color(value)
    except SvgError:
        if strict:
            raise
        warn(f"unsupported {what} value {value!r}; using black")
        return (0, 0, 0)


def _parse_opacity(value: str, strict, warn) -> float:
    try:
        a = float(value)
    except ValueError:
        if strict:
            raise MalformedMarkup(f"bad opacity {value!r}") from None
        warn(f"bad opacity {value!r}; using 1")
        return 1.0
    return min(1.0, max(0.0, a))


def _parse_style(elem, gradients, strict, warn) -> PathStyle:
    fill: Rgba | None = Rgba(0, 0, 0, 1.0)
    fill_value = elem.get("fill")
    fill_alpha = _parse_opacity(elem.get("fill-opacity", "1"), strict, warn)
    if fill_value is not None:
        rgb = _parse_paint(fill_value, gradients, strict, warn, "fill")
        fill = None if rgb is None else Rgba(*rgb, fill_alpha)
    elif fill_alpha != 1.0:
        fill = Rgba(0, 0, 0, fill_alpha)

    rule = elem.get("fill-rule", "nonzero")
    if rule not in ("nonzero", "evenodd"):
        if strict:
            raise UnsupportedConstruct(f"fill-rule {rule!r}")
        warn(f"unknown fill-rule {rule!r}; using nonzero")
        rule = "nonzero"

    stroke: Rgba | None = None
    stroke_width = 0.0
    stroke_value = elem.get("stroke")
    if stroke_value is not None:
        rgb = _parse_paint(stroke_value, gradients, strict, warn, "stroke")
        if rgb is not None:
            alpha = _parse_opacity(elem.get("stroke-opacity", "1"), strict, warn)
            try:
                width = float(elem.get("stroke-width", "1"))
            except ValueError:
                raise MalformedMarkup("bad stroke-width") from None
            if width > 0 and math.isfinite(width):
                stroke = Rgba(*rgb, alpha)
                stroke_width = width

    return PathStyle(fill=fill, fill_rule=rule, stroke=stroke, stroke_width=stroke_width)


# ---------------------------------------------------------------------------
# Canonical serialization
# ---------------------------------------------------------------------------


def format_number(v: float) -> str:
    """Canonical numeric text: integers bare, everything else at 2 decimals."""
    if v == int(v):
        return str(int(v))
    return f"{v:.2f}"


def _format_command(cmd: PathCommand) -> str:
    if cmd.letter == "Z":
        return "Z"
    if cmd.letter == "A":
        rx, ry, rot, large, sweep, x, y = cmd.args
        parts = [format_number(rx), format_number(ry), format_number(rot),
                 str(int(large)), str(int(sweep)), format_number(x), format_number(y)]
    else:
        parts = [format_number(a) for a in cmd.args]
    return " ".join([cmd.letter, *parts])


def _format_color(c: Rgba) -> str:
    return f"#{c.r:02x}{c.g:02x}{c.b:02x}"


def serialize_path_element(path: SvgPath) -> str:
    """Canonical ``<path .../>`` text for one path (used for exact-prefix checks)."""
    d = " ".join(_format_command(c) for c in path.commands)
    attrs = [f'd="{d}"']
    style = path.style
    attrs.append(f'fill="{_format_color(style.fill)}"' if style.fill else 'fill="none"')
    if style.fill_rule == "evenodd":
        attrs.append('fill-rule="evenodd"')
    if style.fill is not None and style.fill.a != 1.0:
        attrs.append(f'fill-opacity="{format_number(style.fill.a)}"')
    if style.stroke is not None:
        attrs.append(f'stroke="{_format_color(style.stroke)}"')
        attrs.append(f'stroke-width="{format_number(style.stroke_width)}"')
        if style.stroke.a != 1.0:
            attrs.append(f'stroke-opacity="{format_number(style.stroke.a)}"')
    return f'<path {" ".join(attrs)}/>'


def serialize_svg(doc: SvgDocument) -> str:
    """Serialize to the canonical text form; equal documents give equal bytes."""
    vb = " ".join(format_number(v) for v in doc.viewbox)
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{vb}">']
    lines.extend(f"  {serialize_path_element(p)}" for p in doc.paths)
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
