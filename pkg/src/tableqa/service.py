"""HTTP front door.

Thin FastAPI wrapper over one ``Application``. Sessions, questions, and a
debug view per answered question; all scoring happens server-side and the
response payload carries the finished vector plus its evidence.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .auth import MinimalUserProfile, TableGrant
from .config import AppConfig
from .errors import (
    DeadlineExceeded,
    EmptyInput,
    MalformedOutput,
    ProviderUnavailable,
    UnknownSession,
    UnknownUser,
)
from .pipeline import Application, TraceRecord


class GrantBody(BaseModel):
    table: str
    constraint: str | None = None


class ProfileBody(BaseModel):
    user_id: str
    role: str = "member"
    grants: list[GrantBody] = Field(default_factory=list)


class SessionRequest(BaseModel):
    user_id: str | None = None
    profile: ProfileBody | None = None


class QueryRequest(BaseModel):
    query: str


def trace_payload(trace: TraceRecord) -> dict:
    payload = trace.canonical()
    payload["stage_timings"] = dict(trace.stage_timings)
    return payload


def create_app(
    config: AppConfig | None = None, application: Application | None = None
) -> FastAPI:
    application = application or Application(config)
    app = FastAPI(title="tableqa", docs_url=None, redoc_url=None)
    # browser clients are served from their own origin during development
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET", "POST", "DELETE"],
        allow_headers=["content-type"],
    )
    app.state.application = application
    traces: dict[tuple[str, int], TraceRecord] = {}

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "tables": list(application.store.list_tables())}

    @app.post("/sessions")
    def open_session(body: SessionRequest) -> dict:
        if (body.user_id is None) == (body.profile is None):
            raise HTTPException(422, "pass exactly one of user_id or profile")
        try:
            if body.profile is not None:
                profile = MinimalUserProfile(
                    user_id=body.profile.user_id,
                    role=body.profile.role,
                    grants=tuple(
                        TableGrant(g.table, g.constraint) for g in body.profile.grants
                    ),
                )
                session = application.open_session(profile=profile)
            else:
                session = application.open_session(user_id=body.user_id)
        except UnknownUser as exc:
            raise HTTPException(404, str(exc)) from exc
        return {
            "session_id": session.session_id,
            "user_id": session.profile.user_id,
            "role": session.profile.role,
            "tables": list(session.profile.tables()),
        }

    @app.delete("/sessions/{session_id}")
    def close_session(session_id: str) -> dict:
        try:
            session = application.close_session(session_id)
        except UnknownSession as exc:
            raise HTTPException(404, str(exc)) from exc
        dropped = [key for key in traces if key[0] == session_id]
        for key in dropped:
            del traces[key]
        return {"closed": True, "queries_asked": session.queries_asked}

    @app.post("/sessions/{session_id}/query")
    def ask(session_id: str, body: QueryRequest) -> dict:
        try:
            trace = application.ask(session_id, body.query)
        except UnknownSession as exc:
            raise HTTPException(404, str(exc)) from exc
        except EmptyInput as exc:
            raise HTTPException(422, str(exc)) from exc
        except (DeadlineExceeded, ProviderUnavailable, MalformedOutput) as exc:
            raise HTTPException(503, str(exc)) from exc
        traces[(session_id, trace.query_index)] = trace
        return trace_payload(trace)

    @app.get("/sessions/{session_id}/trace/{query_index}/debug")
    def debug(session_id: str, query_index: int) -> dict:
        trace = traces.get((session_id, query_index))
        if trace is None:
            raise HTTPException(404, f"no trace {query_index} in session {session_id!r}")
        records = application.gateway.records(f"{session_id}:{query_index}")
        staged = None
        if trace.staged_ref:
            result = application.store.read_stage(trace.staged_ref)
            staged = {"columns": list(result.columns), "rows": [list(r) for r in result.rows]}
        payload = trace_payload(trace)
        payload["prompts"] = [
            {
                "call": r.call_index_in_query,
                "role": r.role,
                "fingerprint": r.prompt_fingerprint,
                "body": r.prompt_body,
                "output": r.output,
            }
            for r in records
        ]
        payload["staged"] = staged
        return payload

    return app
