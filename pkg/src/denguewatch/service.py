"""HTTP interface over the stores: read analytics, drive annotation.

Every response is wrapped in one envelope shape: ``status`` (ok|error),
``api_version``, and exactly one of ``data`` or ``error``. Read endpoints
are pure functions of the store files; mutating endpoints accept a client
``request_id`` and replay the recorded response on retry, so a retried vote
or review never applies twice.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from filelock import FileLock
from pydantic import BaseModel

from . import views
from .hitl import HitlError, HitlStore
from .serialize import canonical_json, load_json, read_jsonl

API_VERSION = "1"

log = logging.getLogger("denguewatch.service")

_ERROR_STATUS = {
    "VOTE_COUNT": 422,
    "ALREADY_LABELED": 409,
    "NOT_PENDING": 404,
    "OPPOSITE_CLASS": 409,
    "UNKNOWN_CANDIDATE": 404,
    "SESSION_TERMINATED": 409,
    "EMPTY_LABELS": 409,
    "READ_ONLY": 403,
    "BAD_REQUEST": 400,
}


@dataclass
class ApiConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    data_dir: str = "data"
    read_only: bool = False
    cors_origins: list[str] = field(default_factory=list)
    static_dir: str | None = None

    @classmethod
    def from_file(cls, path: Path | str) -> "ApiConfig":
        d = load_json(path)
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def ok_envelope(data) -> dict:
    return {"status": "ok", "api_version": API_VERSION, "data": data}


def error_envelope(code: str, message: str) -> dict:
    return {"status": "error", "api_version": API_VERSION, "error": {"code": code, "message": message}}


def _error_response(code: str, message: str) -> JSONResponse:
    return JSONResponse(error_envelope(code, message), status_code=_ERROR_STATUS.get(code, 400))


class RequestLog:
    """Persisted request_id -> response map backing idempotent retries."""

    def __init__(self, data_dir: Path | str):
        self.path = Path(data_dir) / "requests.jsonl"
        self._lock = FileLock(str(Path(data_dir) / ".requests.lock"))

    def lookup(self, request_id: str) -> tuple[int, dict] | None:
        if not self.path.exists():
            return None
        for _, row in read_jsonl(self.path):
            if row["request_id"] == request_id:
                return row["status_code"], row["envelope"]
        return None

    def record(self, request_id: str, status_code: int, envelope: dict) -> None:
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(
                    canonical_json(
                        {"request_id": request_id, "status_code": status_code, "envelope": envelope}
                    )
                    + "\n"
                )


class VoteBody(BaseModel):
    doc_id: str
    votes: list[str]
    request_id: str | None = None


class ReviewBody(BaseModel):
    accept: dict[str, list[str]]
    request_id: str | None = None


def validate_stores(data_dir: Path) -> None:
    """Refuse to serve over corrupt stores; the raised error names the file."""
    for name in ("corpus.jsonl", "tokens.jsonl", "labels.jsonl", "lexicon.jsonl", "cases.jsonl"):
        p = data_dir / name
        if p.exists():
            for _ in read_jsonl(p):
                pass
    state = data_dir / "hitl_state.json"
    if state.exists():
        load_json(state)


def create_app(config: ApiConfig) -> FastAPI:
    data_dir = Path(config.data_dir)
    if not data_dir.exists():
        raise RuntimeError(f"data directory {data_dir} does not exist")
    validate_stores(data_dir)

    app = FastAPI(title="denguewatch", version=API_VERSION)
    request_log = RequestLog(data_dir)

    if config.cors_origins:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=config.cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.middleware("http")
    async def log_requests(request: Request, call_next):
        start = time.monotonic()
        response = await call_next(request)
        log.info(
            json.dumps(
                {
                    "method": request.method,
                    "path": request.url.path,
                    "query": str(request.url.query),
                    "status": response.status_code,
                    "ms": round((time.monotonic() - start) * 1000, 2),
                }
            )
        )
        return response

    def guarded(fn, *args, **kwargs) -> JSONResponse:
        try:
            return JSONResponse(ok_envelope(fn(*args, **kwargs)))
        except (ValueError, FileNotFoundError) as exc:
            code = getattr(exc, "code", "BAD_REQUEST")
            return _error_response(code, str(exc))

    # -- read endpoints -----------------------------------------------------

    @app.get("/api/health")
    def health():
        return JSONResponse(ok_envelope({"healthy": True}))

    @app.get("/api/stats")
    def stats(year: int):
        return guarded(views.stats_payload, data_dir, year)

    @app.get("/api/aggregate")
    def aggregate(
        level: str,
        region: str | None = None,
        start: str | None = None,
        end: str | None = None,
        limit: int = 50,
        offset: int = 0,
    ):
        return guarded(
            views.aggregate_payload, data_dir, level, region, start, end, limit, offset
        )

    @app.get("/api/correlation")
    def correlation(region: str | None = None, lag: int = 0, series: str = "all"):
        return guarded(views.correlation_payload, data_dir, region, lag, series)

    @app.get("/api/gaps")
    def gaps(start: str, end: str, threshold: float | None = None):
        if threshold is None:
            return guarded(views.gaps_payload, data_dir, start, end)
        return guarded(views.gaps_payload, data_dir, start, end, threshold)

    @app.get("/api/citycorp")
    def citycorp(start: str | None = None, end: str | None = None):
        return guarded(views.citycorp_payload, data_dir, start, end)

    @app.get("/api/lexicon")
    def lexicon(version: int | None = None):
        return guarded(views.lexicon_payload, data_dir, version)

    @app.get("/api/annotation/queue")
    def queue(limit: int = 50, offset: int = 0):
        return guarded(views.queue_payload, data_dir, limit, offset)

    # -- mutating endpoints ---------------------------------------------------

    def mutate(request_id: str | None, fn) -> JSONResponse:
        if config.read_only:
            return _error_response("READ_ONLY", "service is in read-only mode")
        if request_id is not None:
            replay = request_log.lookup(request_id)
            if replay is not None:
                status_code, envelope = replay
                return JSONResponse(envelope, status_code=status_code)
        try:
            envelope, status_code = ok_envelope(fn()), 200
        except HitlError as exc:
            envelope = error_envelope(exc.code, str(exc))
            status_code = _ERROR_STATUS.get(exc.code, 400)
        except ValueError as exc:
            envelope = error_envelope("BAD_REQUEST", str(exc))
            status_code = 400
        if request_id is not None:
            request_log.record(request_id, status_code, envelope)
        return JSONResponse(envelope, status_code=status_code)

    @app.post("/api/annotation/vote")
    def vote(body: VoteBody):
        def apply():
            store = HitlStore(data_dir)
            return store.record_votes(body.doc_id, body.votes).as_dict()

        return mutate(body.request_id, apply)

    @app.post("/api/lexicon/review")
    def review(body: ReviewBody):
        def apply():
            store = HitlStore(data_dir)
            lex = store.review_candidates(body.accept)
            out = lex.as_dict()
            out["terminated"] = store.terminated()
            return out

        return mutate(body.request_id, apply)

    if config.static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app


def serve(config: ApiConfig) -> None:
    import uvicorn

    app = create_app(config)
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    except OSError as exc:
        raise SystemExit(f"cannot bind {config.host}:{config.port}: {exc}") from exc
