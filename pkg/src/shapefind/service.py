"""REST service over a loaded index: search, metadata, files, labels.

The bundle is loaded once and never mutated, so every endpoint is a pure
read and identical requests return identical bodies.  Sketch ranking is CPU
heavy; those requests run on a bounded worker pool with a server-side
timeout instead of an unbounded thread per request.

Endpoints: POST /search/text, POST /search/sketch, GET /models/{id},
GET /models/{id}/mesh, GET /models/{id}/thumbnail, POST /labels,
GET /healthz.  Non-2xx responses always carry {code, message, http_status}.
"""

from __future__ import annotations

import io
import os
from concurrent.futures import ThreadPoolExecutor, TimeoutError as FuturesTimeoutError
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from PIL import Image
from starlette.exceptions import HTTPException as StarletteHTTPException

from .catalog import _record_to_dict, ArtifactRecord, IndexBundle, load_bundle
from .labels import extract_labels, LabelError, sniff_image, StubLabelProvider
from .query_engine import (
    EngineConfig,
    parse_sketch_query,
    QueryError,
    search_sketch,
    search_text_endpoint,
    SearchResult,
    UnknownBaseError,
)

THUMBNAIL_SIZE = 256

_MESH_TYPES = {".stl": "model/stl", ".obj": "model/obj"}

# closed set of machine-readable error codes
ERROR_CODES = (
    "invalid_query",
    "invalid_image",
    "model_not_found",
    "not_found",
    "thumbnail_unavailable",
    "mesh_unavailable",
    "label_provider_error",
    "search_timeout",
    "internal_error",
)


class ApiException(Exception):
    def __init__(self, code: str, message: str, http_status: int):
        assert code in ERROR_CODES
        super().__init__(message)
        self.code = code
        self.message = message
        self.http_status = http_status


@dataclass
class ServiceConfig:
    cors_origins: tuple = ()
    label_provider: object = None
    engine: EngineConfig = field(default_factory=EngineConfig)
    search_timeout_s: float = 120.0
    max_concurrency: int | None = None
    corpus_dir: str | None = None


def result_item(result: SearchResult, bundle: IndexBundle) -> dict:
    """Wire shape of one ranked result, shared by the API and CLI."""
    record = bundle.record(result.artifact_id)
    if result.match is not None:
        score = {
            "overlap": result.match.overlap_voxels,
            "sketch_norm": result.match.sketch_norm,
            "model_norm": result.match.model_norm,
            "avg": result.match.avg,
        }
    else:
        score = {"text_score": result.text_score}
    item = {
        "id": result.artifact_id,
        "rank": result.rank,
        "score": score,
        "name": record.name if record else result.artifact_id,
        "thumbnail_url": f"/models/{result.artifact_id}/thumbnail",
    }
    if result.suggested_scale is not None:
        item["suggested_scale"] = result.suggested_scale
    return item


def voxel_silhouette_png(grid, size: int = THUMBNAIL_SIZE) -> bytes:
    """Orthographic silhouette of a voxel grid as a PNG, object dark on light."""
    mask = grid.occupancy.any(axis=2)
    # rows are image y; flip so grid axis 1 points up
    arr = np.where(mask.T[::-1], 60, 245).astype(np.uint8)
    img = Image.fromarray(arr, mode="L")
    scale = max(1, min(size // img.width, size // img.height))
    img = img.resize((img.width * scale, img.height * scale), Image.NEAREST)
    canvas = Image.new("L", (size, size), 245)
    canvas.paste(img, ((size - img.width) // 2, (size - img.height) // 2))
    buf = io.BytesIO()
    canvas.save(buf, format="PNG")
    return buf.getvalue()


def _require_record(bundle: IndexBundle, artifact_id: str) -> ArtifactRecord:
    record = bundle.record(artifact_id)
    if record is None:
        raise ApiException("model_not_found",
                           f"no model with id {artifact_id!r}", 404)
    return record


def create_app(bundle: IndexBundle, config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    provider = config.label_provider or StubLabelProvider()
    corpus_dir = Path(config.corpus_dir or bundle.build_info.corpus_dir)
    workers = config.max_concurrency or os.cpu_count() or 1
    pool = ThreadPoolExecutor(max_workers=workers,
                              thread_name_prefix="sketch-rank")

    app = FastAPI(title="shapefind", docs_url=None, redoc_url=None,
                  openapi_url=None)
    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(config.cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )

    def _envelope(code: str, message: str, status: int) -> JSONResponse:
        return JSONResponse(status_code=status, content={
            "code": code, "message": message, "http_status": status})

    @app.exception_handler(ApiException)
    async def _api_error(request: Request, exc: ApiException):
        return _envelope(exc.code, exc.message, exc.http_status)

    @app.exception_handler(QueryError)
    async def _query_error(request: Request, exc: QueryError):
        if isinstance(exc, UnknownBaseError):
            return _envelope("model_not_found", str(exc), 404)
        return _envelope("invalid_query", str(exc), 400)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return _envelope("invalid_query", str(exc), 400)

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request: Request, exc: StarletteHTTPException):
        code = "not_found" if exc.status_code == 404 else "internal_error"
        return _envelope(code, str(exc.detail), exc.status_code)

    @app.exception_handler(Exception)
    async def _unhandled(request: Request, exc: Exception):
        return _envelope("internal_error", f"{type(exc).__name__}: {exc}", 500)

    @app.get("/healthz")
    def healthz():
        info = bundle.build_info
        w = info.field_weights
        return {
            "status": "ok",
            "build_info": {
                "format_version": info.format_version,
                "created_at": info.created_at,
                "corpus_hash": info.corpus_hash,
                "corpus_dir": info.corpus_dir,
                "field_weights": {"name": w.name, "tags": w.tags,
                                  "description": w.description,
                                  "category": w.category},
            },
            "models": len(bundle.catalog),
        }

    @app.post("/search/text")
    def search_text(body: dict):
        term = body.get("term")
        if not isinstance(term, str):
            raise QueryError("body must carry a string 'term'")
        limit = body.get("limit", 24)
        offset = body.get("offset", 0)
        if not isinstance(limit, int) or not isinstance(offset, int):
            raise QueryError("limit and offset must be integers")
        results = search_text_endpoint(term, limit, offset, bundle)
        return {"results": [result_item(r, bundle) for r in results]}

    @app.post("/search/sketch")
    def search_by_sketch(body: dict):
        q = parse_sketch_query(body)
        future = pool.submit(search_sketch, q, bundle, config.engine)
        try:
            results = future.result(timeout=config.search_timeout_s)
        except FuturesTimeoutError:
            future.cancel()
            raise ApiException(
                "search_timeout",
                f"sketch search exceeded {config.search_timeout_s:.0f}s", 504)
        payload = {"results": [result_item(r, bundle) for r in results]}
        if results:
            payload["sketch_extents_mm"] = list(results[0].sketch_extents_mm)
        return payload

    @app.get("/models/{artifact_id}")
    def get_model(artifact_id: str):
        return _record_to_dict(_require_record(bundle, artifact_id))

    @app.get("/models/{artifact_id}/mesh")
    def get_mesh(artifact_id: str):
        record = _require_record(bundle, artifact_id)
        if not record.mesh_file:
            raise ApiException("mesh_unavailable",
                               f"{artifact_id} has no mesh file", 404)
        path = corpus_dir / record.mesh_file
        if not path.is_file():
            raise ApiException("mesh_unavailable",
                               f"mesh file missing for {artifact_id}", 404)
        media = _MESH_TYPES.get(path.suffix.lower(), "application/octet-stream")
        return Response(content=path.read_bytes(), media_type=media)

    @app.get("/models/{artifact_id}/thumbnail")
    def get_thumbnail(artifact_id: str):
        record = _require_record(bundle, artifact_id)
        if record.thumbnail_file:
            path = corpus_dir / record.thumbnail_file
            if path.is_file():
                return Response(content=path.read_bytes(), media_type="image/png")
        grid = bundle.voxels.get(artifact_id)
        if grid is None:
            raise ApiException("thumbnail_unavailable",
                               f"no thumbnail for {artifact_id}", 404)
        return Response(content=voxel_silhouette_png(grid), media_type="image/png")

    @app.post("/labels")
    async def post_labels(image: UploadFile):
        data = await image.read()
        try:
            sniff_image(data)
        except LabelError as exc:
            raise ApiException("invalid_image", str(exc), 400)
        try:
            guesses = extract_labels(data, provider)
        except LabelError as exc:
            raise ApiException("label_provider_error", str(exc), 502)
        return {"labels": [{"term": g.term, "confidence": g.confidence}
                           for g in guesses]}

    return app


def serve(index_dir, port: int = 8080, config: ServiceConfig | None = None,
          host: str = "127.0.0.1") -> None:
    """Load an index and run the service until terminated."""
    import uvicorn

    bundle = load_bundle(index_dir)
    app = create_app(bundle, config)
    uvicorn.run(app, host=host, port=port, log_level="info")
