"""Shared generators and fixtures: seeded random documents in canonical form,
plus a scriptable local HTTP backend."""

from __future__ import annotations

import json
import random
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from svgpipe.svg_core import (
    PathCommand,
    PathStyle,
    Rgba,
    SvgDocument,
    SvgPath,
    arc,
    close,
    cubic,
    line,
    move,
    quad,
)

PALETTE = [
    (0, 0, 0),
    (255, 0, 0),
    (0, 128, 0),
    (0, 0, 255),
    (200, 120, 40),
    (90, 40, 160),
]

ALPHAS = [1.0, 0.75, 0.5, 0.25]


def canonical_value(rng: random.Random, lo: float = -20.0, hi: float = 220.0) -> float:
    """A float exactly representable in the canonical int-or-2-decimals text."""
    if rng.random() < 0.6:
        return float(rng.randint(int(lo), int(hi)))
    return rng.randint(int(lo * 100), int(hi * 100)) / 100.0


def random_style(rng: random.Random) -> PathStyle:
    fill = None
    if rng.random() < 0.9:
        fill = Rgba(*rng.choice(PALETTE), rng.choice(ALPHAS))
    stroke = None
    width = 0.0
    if fill is None or rng.random() < 0.3:
        stroke = Rgba(*rng.choice(PALETTE), rng.choice(ALPHAS))
        width = rng.choice([1.0, 2.0, 3.5])
    return PathStyle(
        fill=fill,
        fill_rule=rng.choice(["nonzero", "evenodd"]),
        stroke=stroke,
        stroke_width=width,
    )


def random_commands(rng: random.Random, n_segments: int) -> list[PathCommand]:
    def v() -> float:
        return canonical_value(rng)

    cmds: list[PathCommand] = [move(v(), v())]
    for _ in range(n_segments):
        kind = rng.choice(["L", "L", "C", "Q", "A"])
        if kind == "L":
            cmds.append(line(v(), v()))
        elif kind == "C":
            cmds.append(cubic(v(), v(), v(), v(), v(), v()))
        elif kind == "Q":
            cmds.append(quad(v(), v(), v(), v()))
        else:
            rx = float(rng.randint(2, 80))
            ry = float(rng.randint(2, 80))
            cmds.append(
                arc(rx, ry, float(rng.randint(0, 359)), rng.randint(0, 1),
                    rng.randint(0, 1), v(), v())
            )
    if rng.random() < 0.7:
        cmds.append(close())
    return cmds


def random_document(rng: random.Random, max_paths: int = 4) -> SvgDocument:
    """Document with canonical-representable values and a canonical viewbox
    shape (positive 2-decimal extents, arbitrary origin)."""
    n_paths = rng.randint(1, max_paths)
    paths = []
    for _ in range(n_paths):
        segments = rng.randint(1, 5)
        commands: list[PathCommand] = []
        for _ in range(rng.randint(1, 2)):  # sometimes multiple subpaths
            commands.extend(random_commands(rng, segments))
        paths.append(SvgPath(tuple(commands), random_style(rng)))
    origin_x = canonical_value(rng, -50, 50)
    origin_y = canonical_value(rng, -50, 50)
    w = canonical_value(rng, 10, 400)
    h = canonical_value(rng, 10, 400)
    return SvgDocument((origin_x, origin_y, max(w, 1.0), max(h, 1.0)), tuple(paths))


class _ScriptedHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length) or b"{}")
        self.server.requests.append((self.path, body))
        status, payload, delay = self.server.script(
            self.path, body, len(self.server.requests)
        )
        if delay:
            time.sleep(delay)
        data = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def http_backend():
    """(server, base_url); set server.script to control responses."""
    server = ThreadingHTTPServer(("127.0.0.1", 0), _ScriptedHandler)
    server.requests = []
    server.script = lambda path, body, n: (200, {}, 0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server, f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
