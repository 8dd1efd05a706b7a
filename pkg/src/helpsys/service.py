"""HTTP facade over the query pipeline.

Endpoints: POST /v1/query, GET /v1/health, GET /v1/skills. The model and
index load once; every request handler reads them immutably, so concurrent
requests are safe and responses depend only on the request body.

Request bodies are parsed by hand rather than by a schema layer: the wire
contract wants 413 for oversized payloads and 400 with an error JSON for
anything malformed, before any model code runs.
"""

from __future__ import annotations

import contextlib
import json

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import __version__, datagen, harness

__all__ = ["create_app", "MAX_BODY_BYTES"]

MAX_BODY_BYTES = 8 * 1024


def create_app(
    model_path: str | None = None,
    index_path: str | None = None,
    pipeline: harness.QueryPipeline | None = None,
    cors_origin: str = "*",
) -> FastAPI:
    """Build the app; artifacts load at startup unless a pipeline is injected.

    With neither a pipeline nor paths, the app serves 503s: that is the
    not-yet-loaded state, kept reachable for tests.
    """

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        if app.state.pipeline is None and model_path and index_path:
            app.state.pipeline = harness.load_pipeline(model_path, index_path)
        yield

    app = FastAPI(lifespan=lifespan)
    app.state.pipeline = pipeline
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[cors_origin],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def error(status: int, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"error": message})

    @app.post("/v1/query")
    async def query(request: Request):
        pipe = app.state.pipeline
        if pipe is None:
            return error(503, "model and index not loaded")
        body = await request.body()
        if len(body) > MAX_BODY_BYTES:
            return error(413, "request body exceeds 8 KiB")
        try:
            payload = json.loads(body)
        except (json.JSONDecodeError, UnicodeDecodeError):
            return error(400, "body must be valid JSON")
        if not isinstance(payload, dict):
            return error(400, "body must be a JSON object")
        text = payload.get("text")
        if not isinstance(text, str) or not text.strip():
            return error(400, "field 'text' must be a non-empty string")
        threshold = payload.get("threshold", 0.75)
        if isinstance(threshold, bool) or not isinstance(threshold, (int, float)):
            return error(400, "field 'threshold' must be a number")
        if not -1.0 <= float(threshold) <= 1.0:
            return error(400, "field 'threshold' must lie in [-1, 1]")
        k = payload.get("k", 1)
        if isinstance(k, bool) or not isinstance(k, int) or k < 1:
            return error(400, "field 'k' must be an integer >= 1")
        unknown = set(payload) - {"text", "threshold", "k"}
        if unknown:
            return error(400, f"unknown fields: {', '.join(sorted(unknown))}")
        try:
            result = harness.timed_answer_query(
                pipe, text, threshold=float(threshold), k=int(k)
            )
        except Exception:
            return error(500, "internal error")
        return JSONResponse(content=result)

    @app.get("/v1/health")
    async def health():
        pipe = app.state.pipeline
        if pipe is None:
            return error(503, "model and index not loaded")
        return JSONResponse(
            content={
                "model_kind": pipe.model.kind.value,
                "index_size": len(pipe.index),
                "version": __version__,
            }
        )

    @app.get("/v1/skills")
    async def skills():
        pipe = app.state.pipeline
        if pipe is None:
            return error(503, "model and index not loaded")
        entries = [
            {
                "skill": skill,
                "actions": actions,
                "sample_query": datagen.sample_help_query(skill),
            }
            for skill, actions in pipe.table.skills().items()
        ]
        return JSONResponse(content=entries)

    return app
