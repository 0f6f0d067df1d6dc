"""Session execution: drives a validated automaton through a dialogue.

One user turn advances the machine through successive states until the next
user node is reached or the session terminates: each machine state maps the
current message to a response, archives the exchange through its attachment
(when it has one), optionally displays the response, and hands the response
onward as the message the outgoing triggers see. Everything observable is
recorded as an ordered event transcript, which replays byte-for-byte for a
fixed (definition, seed, script).
"""

from __future__ import annotations

import json
import random
import uuid
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from mfa.backends import add_pair_if_attached, build_backend
from mfa.core import Automaton, DisplayPolicy, StateNode, choose_transition
from mfa.errors import (
    ClassifierParseError,
    InputNotExpectedError,
    InputRequiredError,
    MfaError,
    NotFinalError,
    ScriptUnderrunError,
    SessionOverError,
    UnvalidatedError,
)
from mfa.history import HistoryHub
from mfa.triggers import build_trigger

QUIT_COMMAND = "/quit"
DEFAULT_STEP_BUDGET = 64


class SessionStatus(str, Enum):
    AWAITING_USER = "awaiting_user"
    RUNNING = "running"
    ENDED = "ended"
    ERROR = "error"


class EventKind(str, Enum):
    USER_INPUT = "user_input"
    STATE_OUTPUT = "state_output"
    TRIGGER_EVAL = "trigger_eval"
    TRANSITION = "transition"
    DISPLAY = "display"
    TERMINATED = "terminated"
    WARNING = "warning"


@dataclass(frozen=True)
class Event:
    """One observable step of a dialogue; seq is strictly increasing."""

    seq: int
    kind: EventKind
    state: str | None
    payload: Any


def event_to_dict(event: Event) -> dict:
    return {"seq": event.seq, "kind": event.kind.value, "state": event.state, "payload": event.payload}


def event_to_json(event: Event) -> str:
    return json.dumps(event_to_dict(event), sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def transcript_to_jsonl(events: Iterable[Event]) -> str:
    """Canonical line-delimited transcript; shared by the CLI and the service."""
    return "".join(event_to_json(e) + "\n" for e in events)


def displayed_messages(events: Iterable[Event]) -> list[str]:
    return [e.payload for e in events if e.kind is EventKind.DISPLAY]


def visited_states(events: Iterable[Event]) -> list[str]:
    """States at which a message was exchanged, in order."""
    return [e.state for e in events if e.kind in (EventKind.USER_INPUT, EventKind.STATE_OUTPUT)]


# Factory signatures let tests inject table-driven backends and triggers.
BackendFactory = Callable[[Automaton, StateNode, "Session"], Any]
TriggerFactory = Callable[[Automaton, str, "Session"], Any]


def default_backend_factory(automaton: Automaton, node: StateNode, session: "Session") -> Any:
    config = automaton.backend_defs[node.backend_ref]
    return build_backend(
        config,
        attachment=session.hub.attachments.get(node.id),
        session_id=session.id,
        sink_root=session.sink_root,
        http_session=session.http_session,
    )


def default_trigger_factory(automaton: Automaton, trigger_id: str, session: "Session") -> Any:
    return build_trigger(
        automaton.trigger_defs[trigger_id],
        attachment=session.hub.attachments.get(trigger_id),
        http_session=session.http_session,
    )


@dataclass
class Session:
    """Live execution state of one dialogue."""

    id: str
    automaton: Automaton
    current: str
    last_message: str
    seed: int
    rng: random.Random
    status: SessionStatus
    transcript: list[Event] = field(default_factory=list)
    step_budget: int = DEFAULT_STEP_BUDGET
    sink_root: Path | None = None
    http_session: Any = None
    hub: HistoryHub = field(default_factory=HistoryHub)
    backends: dict[str, Any] = field(default_factory=dict)
    triggers: dict[str, Any] = field(default_factory=dict)

    @property
    def awaiting_user(self) -> bool:
        return self.status is SessionStatus.AWAITING_USER

    @property
    def active(self) -> bool:
        return self.status in (SessionStatus.AWAITING_USER, SessionStatus.RUNNING)

    def emit(self, kind: EventKind, state: str | None, payload: Any) -> Event:
        event = Event(seq=len(self.transcript), kind=kind, state=state, payload=payload)
        self.transcript.append(event)
        return event


def start(
    automaton: Automaton,
    seed: int = 0,
    *,
    step_budget: int = DEFAULT_STEP_BUDGET,
    sink_root: Path | str | None = None,
    http_session: Any = None,
    backend_factory: BackendFactory = default_backend_factory,
    trigger_factory: TriggerFactory = default_trigger_factory,
) -> Session:
    """Create a session positioned at the initial state.

    The session owns fresh archives, backends and trigger instances, so
    concurrent sessions share nothing but the immutable automaton. Machine
    turns of a machine-initial automaton run on the first ``step`` call.
    """
    if not automaton.validated:
        raise UnvalidatedError("start requires a validated automaton (run validate first)")
    initial = automaton.states[automaton.initial]
    session = Session(
        id=uuid.uuid4().hex,
        automaton=automaton,
        current=initial.id,
        last_message="",
        seed=seed,
        rng=random.Random(seed),
        status=SessionStatus.AWAITING_USER if initial.is_user else SessionStatus.RUNNING,
        step_budget=step_budget,
        sink_root=Path(sink_root) if sink_root is not None else None,
        http_session=http_session,
    )
    for archive_id in automaton.archives:
        session.hub.create_archive(archive_id)
    for node in automaton.states.values():
        for decl in node.attachments:
            session.hub.attach(node.id, decl.archive, decl.mode)
    for defn in automaton.trigger_defs.values():
        for decl in defn.attachments:
            session.hub.attach(defn.id, decl.archive, decl.mode, trigger=True)
    for node in automaton.states.values():
        if not node.is_user:
            session.backends[node.id] = backend_factory(automaton, node, session)
    for trigger_id in automaton.trigger_defs:
        session.triggers[trigger_id] = trigger_factory(automaton, trigger_id, session)
    return session


def _trigger_eval(session: Session) -> Callable[[str, str, str], int]:
    def evaluate(trigger_id: str, state: str, message: str) -> int:
        trigger = session.triggers[trigger_id]
        try:
            return trigger.fire(state, message)
        except ClassifierParseError as exc:
            # Unparseable classifier answers demote the edge instead of
            # aborting the dialogue; lower-priority edges take over.
            session.emit(EventKind.WARNING, state, {"code": exc.code, "message": str(exc)})
            return 0

    return evaluate


def _terminate(session: Session, reason: str, *, error: bool = False) -> None:
    session.status = SessionStatus.ERROR if error else SessionStatus.ENDED
    session.emit(EventKind.TERMINATED, session.current, {"reason": reason, "status": session.status.value})


def _advance(session: Session, message: str) -> bool:
    """Evaluate outgoing edges of the current state and move along the best
    firing one. Returns False when the session terminated instead."""
    automaton = session.automaton
    edge, evaluations = choose_transition(automaton, session.current, message, _trigger_eval(session), session.rng)
    for ev in evaluations:
        session.emit(
            EventKind.TRIGGER_EVAL,
            session.current,
            {
                "edge": ev.edge.id,
                "to": ev.edge.dst,
                "priority": ev.priority,
                "results": [[trigger_id, bit] for trigger_id, bit in ev.trigger_bits],
                "value": ev.value,
            },
        )
    node = automaton.states[session.current]
    if not node.is_user and _should_display(node, edge, automaton):
        session.emit(EventKind.DISPLAY, node.id, session.last_message)
    if edge is None:
        if node.is_final:
            _terminate(session, "no candidate at final state")
        else:
            _terminate(session, "DEAD_END: no trigger fired at non-final state", error=True)
        return False
    session.emit(EventKind.TRANSITION, edge.dst, {"from": edge.src, "to": edge.dst, "edge": edge.id})
    session.current = edge.dst
    return True


def _should_display(node: StateNode, edge, automaton: Automaton) -> bool:
    if node.display is DisplayPolicy.ALWAYS:
        return True
    if node.display is DisplayPolicy.AUTO:
        return edge is not None and automaton.states[edge.dst].is_user
    return False


def step(session: Session, user_input: str | None = None) -> list[Event]:
    """Advance the dialogue by one user turn (or resume pending machine turns).

    Runs machine states until the next user node, termination or the machine
    step budget; returns the events appended by this call. Dialogue-level
    failures (dead ends, exhausted budgets, backend errors) are recorded on
    the transcript with status ``error`` rather than raised.
    """
    first_new = len(session.transcript)
    if not session.active:
        raise SessionOverError(f"session already {session.status.value}")
    if session.awaiting_user:
        if user_input is None:
            raise InputRequiredError("session awaits user input")
        if user_input.strip() == QUIT_COMMAND:
            end(session, "quit")
            return session.transcript[first_new:]
        session.emit(EventKind.USER_INPUT, session.current, user_input)
        session.last_message = user_input
        session.status = SessionStatus.RUNNING
        if not _advance(session, user_input):
            return session.transcript[first_new:]
        if session.automaton.states[session.current].is_user:
            session.status = SessionStatus.AWAITING_USER
            return session.transcript[first_new:]
    elif user_input is not None:
        raise InputNotExpectedError("machine turns pending; no user input expected")

    machine_steps = 0
    while session.status is SessionStatus.RUNNING:
        node = session.automaton.states[session.current]
        if machine_steps >= session.step_budget:
            _terminate(session, f"STEP_BUDGET: more than {session.step_budget} machine states in one turn", error=True)
            break
        machine_steps += 1
        backend = session.backends[node.id]
        try:
            response = backend.predict(session.last_message)
        except MfaError as exc:
            session.emit(EventKind.WARNING, node.id, {"code": exc.code, "message": str(exc)})
            _terminate(session, f"{exc.code}: backend failure at {node.id}", error=True)
            break
        session.emit(EventKind.STATE_OUTPUT, node.id, response)
        add_pair_if_attached(backend, session.last_message, response)
        session.last_message = response
        if not _advance(session, response):
            break
        if session.automaton.states[session.current].is_user:
            session.status = SessionStatus.AWAITING_USER
    return session.transcript[first_new:]


def end(session: Session, reason: str) -> None:
    """Conclude the session normally; only final states may end a dialogue."""
    if not session.active:
        raise SessionOverError(f"session already {session.status.value}")
    if not session.automaton.states[session.current].is_final:
        raise NotFinalError(f"cannot end at non-final state {session.current!r}")
    _terminate(session, reason)


def run_scripted(
    automaton: Automaton,
    user_script: Sequence[str],
    seed: int = 0,
    **start_options,
) -> list[Event]:
    """Drive a session with scripted user inputs and return the transcript.

    When the script is exhausted at an awaiting-user point the session ends
    there (user nodes are final, so walking away is always legal); a
    non-final awaiting state would raise SCRIPT_UNDERRUN, which cannot occur
    for validated automata.
    """
    session = start(automaton, seed, **start_options)
    inputs = iter(user_script)
    while session.active:
        if session.awaiting_user:
            user_input = next(inputs, None)
            if user_input is None:
                if not automaton.states[session.current].is_final:
                    raise ScriptUnderrunError(f"script exhausted while awaiting input at {session.current!r}")
                end(session, "script exhausted")
                break
            step(session, user_input)
        else:
            step(session)
    return session.transcript
