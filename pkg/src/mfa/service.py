"""HTTP API over automata and sessions, with a live server-sent event stream.

Definitions are parsed and validated on upload into an in-memory registry
(re-uploads get a fresh version id, nothing is overwritten). Each session
is driven strictly sequentially: one message at a time, guarded by a
per-session lock. Event streams replay the transcript from seq 0 (or a
requested resume point) and then tail live events until the session ends.
"""

from __future__ import annotations

import itertools
import random
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse, StreamingResponse
from pydantic import BaseModel

from mfa import dsl, runner
from mfa.core import Automaton, validate
from mfa.runner import Event, EventKind, Session, SessionStatus, event_to_json, transcript_to_jsonl

STREAM_POLL_SECONDS = 0.1


@dataclass
class AutomatonRecord:
    automaton_id: str
    automaton: Automaton
    text: str
    report: dict


@dataclass
class SessionRecord:
    session: Session
    automaton_id: str
    lock: threading.Lock = field(default_factory=threading.Lock)
    changed: threading.Condition = field(default_factory=threading.Condition)

    def notify(self) -> None:
        with self.changed:
            self.changed.notify_all()


class Registry:
    """In-memory store of uploaded automata and live sessions."""

    def __init__(self):
        self.automata: dict[str, AutomatonRecord] = {}
        self.sessions: dict[str, SessionRecord] = {}
        self._counter = itertools.count(1)
        self._lock = threading.Lock()

    def next_id(self, name: str) -> str:
        with self._lock:
            return f"{name}-v{next(self._counter)}"


class SessionBody(BaseModel):
    automaton_id: str
    seed: int | None = None


class MessageBody(BaseModel):
    text: str


def _report_dict(report) -> dict:
    return {
        "errors": [{"code": i.code, "location": i.location, "message": i.message} for i in report.errors],
        "warnings": [{"code": i.code, "location": i.location, "message": i.message} for i in report.warnings],
    }


def _handle_dict(record: SessionRecord, session_id: str) -> dict:
    session = record.session
    return {
        "session_id": session_id,
        "automaton": session.automaton.name,
        "automaton_id": record.automaton_id,
        "status": session.status.value,
        "current": session.current,
        "awaiting_user": session.awaiting_user,
        "seed": session.seed,
    }


def graph_dict(automaton: Automaton) -> dict:
    """Nodes, edges, priorities and attachments as the UI consumes them."""
    attachments = []
    for node in automaton.states.values():
        for decl in node.attachments:
            attachments.append({"owner": node.id, "archive": decl.archive, "mode": decl.mode.value})
    for defn in automaton.trigger_defs.values():
        for decl in defn.attachments:
            attachments.append({"owner": defn.id, "archive": decl.archive, "mode": decl.mode.value})
    return {
        "name": automaton.name,
        "initial": automaton.initial,
        "nodes": [
            {
                "id": node.id,
                "kind": node.kind.value,
                "final": node.is_final,
                "display": node.display.value if not node.is_user else None,
            }
            for node in automaton.states.values()
        ],
        "edges": [
            {
                "id": edge.id,
                "from": edge.src,
                "to": edge.dst,
                "triggers": list(edge.triggers),
                "priority": automaton.effective_priority(edge),
            }
            for edge in automaton.edges
        ],
        "archives": list(automaton.archives),
        "attachments": attachments,
    }


def create_app(
    *,
    token: str | None = None,
    sink_root: Path | str | None = None,
    cors_origins: tuple[str, ...] = ("*",),
    defs_dir: Path | str | None = None,
) -> FastAPI:
    """Build the service; ``defs_dir`` preloads every ``*.mfa`` file in it."""
    app = FastAPI(title="mfa-engine")
    registry = Registry()
    app.state.registry = registry
    app.add_middleware(
        CORSMiddleware, allow_origins=list(cors_origins), allow_methods=["*"], allow_headers=["*"]
    )

    def require_token(request: Request) -> None:
        if token is None:
            return
        supplied = request.headers.get("authorization", "")
        if supplied != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    guarded = [Depends(require_token)]

    def register_text(text: str, path: str | None = None) -> tuple[AutomatonRecord | None, dict]:
        try:
            automaton = dsl.parse(text, path=path)
        except dsl.ParseFailure as failure:
            errors = [
                {"code": "PARSE", "line": e.line, "column": e.column, "expected": e.expected, "found": e.found}
                for e in failure.errors
            ]
            return None, {"errors": errors, "warnings": []}
        report = validate(automaton)
        report_json = _report_dict(report)
        if not report.ok:
            return None, report_json
        automaton_id = registry.next_id(automaton.name)
        record = AutomatonRecord(automaton_id=automaton_id, automaton=automaton, text=text, report=report_json)
        registry.automata[automaton_id] = record
        return record, report_json

    if defs_dir is not None:
        for path in sorted(Path(defs_dir).glob("*.mfa")):
            record, report = register_text(path.read_text(encoding="utf-8"), path=str(path))
            if record is None:
                raise ValueError(f"preloaded definition {path} is invalid: {report}")

    def get_automaton(automaton_id: str) -> AutomatonRecord:
        record = registry.automata.get(automaton_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"no automaton {automaton_id!r}")
        return record

    def get_session(session_id: str) -> SessionRecord:
        record = registry.sessions.get(session_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id!r}")
        return record

    @app.post("/automata", status_code=201, dependencies=guarded)
    async def upload_automaton(request: Request):
        text = (await request.body()).decode("utf-8")
        record, report = register_text(text)
        if record is None:
            raise HTTPException(status_code=422, detail=report)
        return {"automaton_id": record.automaton_id, "name": record.automaton.name, "report": report}

    @app.get("/automata", dependencies=guarded)
    def list_automata():
        return [
            {"automaton_id": r.automaton_id, "name": r.automaton.name} for r in registry.automata.values()
        ]

    @app.get("/automata/{automaton_id}/graph", dependencies=guarded)
    def automaton_graph(automaton_id: str):
        return graph_dict(get_automaton(automaton_id).automaton)

    @app.post("/sessions", status_code=201, dependencies=guarded)
    def create_session(body: SessionBody):
        record = get_automaton(body.automaton_id)
        seed = body.seed if body.seed is not None else random.getrandbits(63)
        session = runner.start(record.automaton, seed, sink_root=sink_root)
        session_record = SessionRecord(session=session, automaton_id=record.automaton_id)
        registry.sessions[session.id] = session_record
        # A machine-initial automaton runs its opening machine turns now.
        if session.status is SessionStatus.RUNNING:
            runner.step(session)
            session_record.notify()
        return _handle_dict(session_record, session.id)

    @app.get("/sessions/{session_id}", dependencies=guarded)
    def session_handle(session_id: str):
        return _handle_dict(get_session(session_id), session_id)

    @app.post("/sessions/{session_id}/message", dependencies=guarded)
    def post_message(session_id: str, body: MessageBody):
        record = get_session(session_id)
        session = record.session
        if session.status in (SessionStatus.ENDED, SessionStatus.ERROR):
            raise HTTPException(status_code=410, detail=f"session {session.status.value}")
        if not record.lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="a message is already being processed")
        try:
            if not session.awaiting_user:
                raise HTTPException(status_code=409, detail="session is not awaiting user input")
            events = runner.step(session, body.text)
        finally:
            record.lock.release()
            record.notify()
        displayed = [e.payload for e in events if e.kind is EventKind.DISPLAY]
        return {"displayed": displayed, "handle": _handle_dict(record, session_id)}

    @app.get("/sessions/{session_id}/transcript", dependencies=guarded)
    def session_transcript(session_id: str):
        record = get_session(session_id)
        return PlainTextResponse(transcript_to_jsonl(record.session.transcript))

    @app.get("/sessions/{session_id}/events", dependencies=guarded)
    def session_events(session_id: str, request: Request, after: int = -1):
        record = get_session(session_id)
        resume = request.headers.get("last-event-id")
        if resume is not None:
            try:
                after = max(after, int(resume))
            except ValueError:
                pass
        return StreamingResponse(_event_stream(record, after), media_type="text/event-stream")

    return app


def _sse(event: Event) -> str:
    return f"id: {event.seq}\ndata: {event_to_json(event)}\n\n"


def _event_stream(record: SessionRecord, after: int) -> Iterator[str]:
    """Replay events with seq > after, then tail live ones until the session
    ends; seqs are gapless and strictly ordered."""
    session = record.session
    index = after + 1
    while True:
        transcript = session.transcript
        while index < len(transcript):
            yield _sse(transcript[index])
            index += 1
        if session.status in (SessionStatus.ENDED, SessionStatus.ERROR):
            return
        with record.changed:
            record.changed.wait(STREAM_POLL_SECONDS)
