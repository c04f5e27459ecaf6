"""HTTP session service.

Exposes consultations over a small JSON API: create a session with an opening
statement, answer follow-up questions until a diagnosis, and fetch the full
transparency trace at any point.  Sessions live in an in-process map with
per-session mutual exclusion; finished consultations are written through to
transcript files so a restarted service can still serve their traces.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import kb as kb_mod
from . import transcript
from .engine import Engine, SessionConfig, build_trace
from .errors import BackendError, EngineStateError, PatienceError

# Per-session settings clients may override when creating a session; the KB
# and backend wiring stay fixed server-side.
OVERRIDABLE = frozenset(
    {
        "k",
        "l_max",
        "max_turns",
        "stop_entropy",
        "stop_top1",
        "selection_mode",
        "top_n_symptoms",
        "remap_every_turn",
        "humanize",
        "row_normalize",
        "uninformative_stop",
        "policy",
        "policy_seed",
    }
)


@dataclass(frozen=True)
class ServiceConfig:
    """Server-side wiring for the session service."""

    session: SessionConfig
    transcript_dir: str = "transcripts"
    ttl_seconds: float = 3600.0  # idle active sessions expire; 410 thereafter
    cors_origins: tuple[str, ...] = ("*",)
    ui_dist: str = "frontend/dist"  # mounted at /ui/ when the directory exists
    clock: Callable[[], float] = time.monotonic


@dataclass
class _Session:
    session_id: str
    engine: Engine
    state: object
    updated_at: float
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    """In-memory session map with lazy idle expiry and tombstones."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.sessions: dict[str, _Session] = {}
        self.expired: set[str] = set()
        self._lock = threading.Lock()
        self._kb = None

    def kb(self):
        if self._kb is None:
            self._kb = kb_mod.ingest(self.config.session.kb_path)
        return self._kb

    def add(self, engine: Engine, state) -> _Session:
        session = _Session(
            session_id=uuid.uuid4().hex,
            engine=engine,
            state=state,
            updated_at=self.config.clock(),
        )
        with self._lock:
            self.sessions[session.session_id] = session
        return session

    def resolve(self, session_id: str) -> _Session | None:
        """Return the live session, expiring it first if it idled out."""
        with self._lock:
            session = self.sessions.get(session_id)
            if session is None:
                return None
            idle = self.config.clock() - session.updated_at
            if session.state.status == "active" and idle > self.config.ttl_seconds:
                del self.sessions[session_id]
                self.expired.add(session_id)
                return None
            return session

    def touch(self, session: _Session) -> None:
        session.updated_at = self.config.clock()

    def transcript_path(self, session_id: str) -> Path:
        return Path(self.config.transcript_dir) / f"{session_id}.json"


def _error(status: int, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": detail})


def _distribution_payload(trace: dict) -> dict:
    prediction = trace["predictions"][-1]
    return {
        "distribution": prediction["distribution"],
        "entropy": prediction["entropy"],
    }


def _question_payload(state) -> dict | None:
    question = state.pending_question
    if question is None:
        return None
    return {
        "id": question.id,
        "text": state.pending_asked_text or question.text,
        "rationale": question.rationale,
    }


def _session_payload(session: _Session) -> dict:
    state = session.state
    trace = build_trace(state)
    payload = {
        "session_id": session.session_id,
        "status": state.status,
        "iteration": state.iteration,
        "question": _question_payload(state),
        "diagnosis": trace.get("diagnosis"),
        "selection": trace["selections"][-1] if trace["selections"] else None,
    }
    payload.update(_distribution_payload(trace))
    return payload


class CreateSessionBody(BaseModel):
    opening_statement: str
    config: dict | None = None


class AnswerBody(BaseModel):
    response: str


def create_app(config: ServiceConfig) -> FastAPI:
    config.session.validate()
    app = FastAPI(title="consultation service", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(config.cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(config)
    app.state.store = store

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return _error(400, "malformed request body")

    @app.get("/healthz")
    def healthz():
        return PlainTextResponse("ok")

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        if not body.opening_statement.strip():
            return _error(400, "opening_statement must be non-empty")
        overrides = body.config or {}
        unknown = set(overrides) - OVERRIDABLE
        if unknown:
            return _error(400, f"unknown config overrides: {sorted(unknown)}")
        session_config = replace(config.session, **overrides)
        try:
            session_config.validate()
        except (PatienceError, TypeError) as exc:
            return _error(400, f"invalid config override: {exc}")
        try:
            engine = Engine(session_config, kb=store.kb())
            state, _ = engine.start_session(body.opening_statement)
        except BackendError as exc:
            return _error(502, f"backend failure: {exc}")
        except PatienceError as exc:
            return _error(502, f"cannot start session: {exc}")
        session = store.add(engine, state)
        return JSONResponse(status_code=201, content=_session_payload(session))

    @app.post("/sessions/{session_id}/answer")
    def answer(session_id: str, body: AnswerBody):
        session = store.resolve(session_id)
        if session is None:
            if session_id in store.expired:
                return _error(410, "session expired")
            return _error(404, "unknown session")
        if not body.response.strip():
            return _error(400, "response must be non-empty")
        if not session.lock.acquire(blocking=False):
            return _error(409, "another answer for this session is in flight")
        try:
            if session.state.status != "active":
                return _error(409, "session already completed")
            try:
                state, _, diagnosis = session.engine.step(
                    session.state, body.response
                )
            except BackendError as exc:
                return _error(502, f"backend failure: {exc}")
            except EngineStateError as exc:
                return _error(409, str(exc))
            session.state = state
            store.touch(session)
            if diagnosis is not None:
                transcript.save(state, store.transcript_path(session_id))
            return JSONResponse(content=_session_payload(session))
        finally:
            session.lock.release()

    @app.get("/sessions/{session_id}/trace")
    def trace(session_id: str):
        session = store.resolve(session_id)
        if session is not None:
            return JSONResponse(content=build_trace(session.state))
        path = store.transcript_path(session_id)
        if path.is_file():
            return JSONResponse(content=transcript.load(path))
        if session_id in store.expired:
            return _error(410, "session expired")
        return _error(404, "unknown session")

    ui_dir = Path(config.ui_dist)
    if ui_dir.is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
