"""HTTP recognition service.

Thin JSON layer over the recognizer: no state beyond the immutable
bundle table handed to create_app, so concurrent requests are safe and
responses for a fixed bundle and input are deterministic (timings jitter,
text and scores do not).
"""

from __future__ import annotations

import json

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from ._backend import active_backend
from .bezier import encode_stroke_segments, scale_time
from .ink import EmptyInk, ZeroHeightArea, ink_from_json, normalize_ink, surrogate_writing_area
from .recognizer import RecognizerBundle, recognize

SCHEMA_VERSION = 1


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={
            "version": SCHEMA_VERSION,
            "error": {"code": code, "message": message},
        },
    )


def _describe(name: str, bundle: RecognizerBundle) -> dict:
    spec = bundle.model.spec
    return {
        "name": name,
        "input_mode": bundle.input_mode,
        "layers": spec.layers,
        "nodes": spec.nodes_per_layer,
        "input_dim": spec.input_dim,
        "num_chars": len(bundle.model.chars),
        "features": {
            "char_lm": bundle.features.char_lm is not None,
            "word_lm": bundle.features.word_lm is not None,
            "char_classes": bundle.features.char_classes is not None,
        },
        "weights": bundle.weights.as_dict(),
        "beam_width": bundle.weights.beam_width,
    }


async def _json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ValueError(f"request body is not valid JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise ValueError("request body must be a JSON object")
    return body


def _parse_ink(body: dict):
    if body.get("strokes") == []:
        raise EmptyInk("ink contains no strokes")
    return ink_from_json(body)


def create_app(bundles, *, default: str | None = None, allow_origins=("*",)) -> FastAPI:
    """Build the service around one or more named recognizer bundles.

    A bare RecognizerBundle is accepted and exposed under the name
    "default". The first name is the default model unless told otherwise.
    """
    if isinstance(bundles, RecognizerBundle):
        bundles = {"default": bundles}
    if not bundles:
        raise ValueError("the service needs at least one bundle")
    names = list(bundles)
    if default is None:
        default = names[0]
    if default not in bundles:
        raise ValueError(f"default model {default!r} is not in the bundle table")

    app = FastAPI(title="inkrec", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(allow_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.bundles = dict(bundles)
    app.state.default_model = default

    @app.get("/v1/health")
    def health():
        return {
            "version": SCHEMA_VERSION,
            "status": "ok",
            "backend": active_backend(),
            "default_model": default,
            "models": names,
        }

    @app.get("/v1/models")
    def models():
        return {
            "version": SCHEMA_VERSION,
            "models": [_describe(n, b) for n, b in app.state.bundles.items()],
        }

    @app.post("/v1/recognize")
    async def recognize_endpoint(request: Request):
        try:
            body = await _json_body(request)
        except ValueError as exc:
            return _error(400, "invalid_json", str(exc))

        name = body.get("model", default)
        bundle = app.state.bundles.get(name)
        if bundle is None:
            return _error(404, "unknown_model", f"no model named {name!r}")

        n_best = body.get("n_best", 1)
        if not isinstance(n_best, int) or isinstance(n_best, bool) or not 1 <= n_best <= 100:
            return _error(400, "bad_request", "n_best must be an integer in [1, 100]")

        try:
            ink = _parse_ink(body)
            result = recognize(bundle, ink, n_best)
        except EmptyInk as exc:
            return _error(400, "empty_ink", str(exc))
        except ZeroHeightArea as exc:
            return _error(400, "zero_height_area", str(exc))
        except ValueError as exc:
            return _error(400, "invalid_ink", str(exc))

        return {
            "version": SCHEMA_VERSION,
            "model": name,
            "text": result.text,
            "n_best": [
                {"text": t, "score": s, "network_score": ns}
                for t, s, ns in result.n_best
            ],
            "timings": result.timings,
        }

    @app.post("/v1/encode")
    async def encode_endpoint(request: Request):
        try:
            body = await _json_body(request)
        except ValueError as exc:
            return _error(400, "invalid_json", str(exc))
        try:
            ink = _parse_ink(body)
            # fit in the normalized frame (the tolerance lives there), then
            # map control points back so the overlay lands on the user's
            # strokes in their own coordinates
            area = ink.writing_area
            if area is None:
                area = surrogate_writing_area(ink)
            x0 = float(ink.strokes[0].xyt[0, 0])
            scaled = scale_time(normalize_ink(ink))
        except EmptyInk as exc:
            return _error(400, "empty_ink", str(exc))
        except ZeroHeightArea as exc:
            return _error(400, "zero_height_area", str(exc))
        except ValueError as exc:
            return _error(400, "invalid_ink", str(exc))

        out_strokes = []
        for stroke in scaled.strokes:
            segments = []
            for seg in encode_stroke_segments(stroke):
                cx, cy = seg.curve.control_points()
                segments.append(
                    {
                        "control_points": [
                            [float(px * area.h + x0), float(py * area.h + area.y)]
                            for px, py in zip(cx, cy)
                        ]
                    }
                )
            out_strokes.append({"pen_down": stroke.pen_down, "segments": segments})
        return {"version": SCHEMA_VERSION, "strokes": out_strokes}

    return app
