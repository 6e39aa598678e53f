"""Read-only HTTP service over a slide-bundle directory: metadata, original
and importance tiles, server-side composited renders, and session-event
ingestion. Slide data is immutable while served; the only mutable state is
the append-only session logs, serialized per file."""

from __future__ import annotations

import logging
import os
import re
import threading
from collections import defaultdict

from fastapi import FastAPI, Query, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import analytics, blend, storage
from .pyramid import BoundsError

log = logging.getLogger("scalestain.server")

MAX_RENDER_DIM = 4096
_SESSION_RE = re.compile(r"^[A-Za-z0-9._-]{1,128}$")

TILE_HEADERS = {"Cache-Control": "public, max-age=31536000, immutable"}


def _error(status, message, **extra):
    return JSONResponse({"error": message, **extra}, status_code=status)


def create_app(root):
    reg = storage.SlideRegistry.scan(root, log=log)
    app = FastAPI(title="scalestain tile server")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )
    app.state.registry = reg
    app.state.root = root
    log_locks = defaultdict(threading.Lock)

    def bundle_or_none(slide_id):
        return reg.slides.get(slide_id)

    @app.get("/api/slides")
    def list_slides():
        return [
            {
                "id": b.id,
                "width": b.meta["width"],
                "height": b.meta["height"],
                "levels": b.meta["levels"],
            }
            for _, b in sorted(reg.slides.items())
        ]

    @app.get("/api/slides/{slide_id}")
    def slide_meta(slide_id: str):
        b = bundle_or_none(slide_id)
        if b is None:
            return _error(404, f"unknown slide {slide_id!r}")
        return b.meta

    @app.get("/api/slides/{slide_id}/tiles/original/{level}/{x}/{y}")
    def original_tile(slide_id: str, level: int, x: int, y: int):
        b = bundle_or_none(slide_id)
        if b is None:
            return _error(404, f"unknown slide {slide_id!r}")
        _, _, cols, rows = b.original.level_geometry(level) if 0 <= level < b.original.levels else (0, 0, 0, 0)
        if not (0 <= level < b.original.levels and 0 <= x < cols and 0 <= y < rows):
            return _error(404, f"tile {level}/{x}/{y} out of bounds")
        try:
            data = b.tile_bytes("original", level, x, y)
        except OSError:
            return _error(500, f"tile {level}/{x}/{y} unreadable", level=level, col=x, row=y)
        return Response(data, media_type="image/png", headers=TILE_HEADERS)

    @app.get("/api/slides/{slide_id}/tiles/importance/{k}/{level}/{x}/{y}")
    def importance_tile(slide_id: str, k: int, level: int, x: int, y: int):
        b = bundle_or_none(slide_id)
        if b is None:
            return _error(404, f"unknown slide {slide_id!r}")
        if k not in b.importance:
            return _error(400, f"unknown sensitivity {k}; have {b.start_levels}")
        pyr = b.importance[k]
        if 0 <= level < b.original.levels and level in pyr.persisted:
            _, _, cols, rows = b.original.level_geometry(level)
            if not (0 <= x < cols and 0 <= y < rows):
                return _error(404, f"tile {level}/{x}/{y} out of bounds")
            data = b.tile_bytes("importance", level, x, y, k=k)
            return Response(data, media_type="image/png", headers=TILE_HEADERS)
        try:
            tile, interpolated = blend.importance_lookup(b, k, level, x, y)
        except BoundsError:
            return _error(404, f"tile {level}/{x}/{y} out of bounds")
        headers = dict(TILE_HEADERS)
        if interpolated:
            headers["X-Interpolated"] = "true"
        return Response(
            storage.encode_png(tile), media_type="image/png", headers=headers
        )

    @app.get("/api/slides/{slide_id}/render")
    def render(slide_id: str, level: float, x: int, y: int, w: int, h: int,
               blend_: float = Query(0.0, alias="blend"), sens: int = None):
        b = bundle_or_none(slide_id)
        if b is None:
            return _error(404, f"unknown slide {slide_id!r}")
        bad = []
        if w < 1 or w > MAX_RENDER_DIM:
            bad.append("w")
        if h < 1 or h > MAX_RENDER_DIM:
            bad.append("h")
        if bad:
            return _error(400, f"render dims capped at {MAX_RENDER_DIM}", fields=bad)
        if sens is None:
            sens = b.start_levels[0]
        params = blend.ViewParams(
            display_level=level, viewport=(x, y, w, h), blend=blend_,
            sensitivity=sens, fade_range=b.fade_range,
        )
        try:
            params.validate(b)
        except blend.ParameterError as e:
            return _error(400, str(e), fields=_offending_fields(str(e)))
        img = blend.render_region(b, params)
        return Response(storage.encode_png(img), media_type="image/png")

    @app.post("/api/slides/{slide_id}/events")
    async def post_events(slide_id: str, request: Request, session: str = "default"):
        b = bundle_or_none(slide_id)
        if b is None:
            return _error(404, f"unknown slide {slide_id!r}")
        if not _SESSION_RE.match(session):
            return _error(400, "invalid session id")
        body = (await request.body()).decode("utf-8", errors="replace")
        lines = [ln for ln in body.split("\n") if ln.strip()]
        events, errors = analytics.parse_log(lines)
        if errors or not events:
            return _error(400, "malformed event lines", lines=[n for n, _ in errors])
        path = os.path.join(root, "logs", slide_id, f"{session}.jsonl")
        os.makedirs(os.path.dirname(path), exist_ok=True)
        payload = "".join(ln.rstrip() + "\n" for ln in lines)
        with log_locks[path]:
            with open(path, "a", encoding="utf-8") as f:
                f.write(payload)
                f.flush()
                os.fsync(f.fileno())
        return Response(status_code=204)

    return app


def _offending_fields(message):
    names = []
    for field in ("blend", "display level", "sensitivity", "fade_range", "viewport"):
        if field in message:
            names.append(field.replace(" ", "_"))
    return names


def serve(root, port=8080, host="127.0.0.1"):
    import uvicorn

    uvicorn.run(create_app(root), host=host, port=port)
