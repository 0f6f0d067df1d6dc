"""Shared test utilities: generators, independent oracles, loopback server."""

from __future__ import annotations

import random
import socket
import threading
import time

from mfa.backends import BackendKind, DialerConfig
from mfa.core import Automaton, DisplayPolicy, StateKind, StateNode, TriggerEdge, validate
from mfa.history import AccessMode, AttachmentDecl
from mfa.triggers import TriggerDef, TriggerKind

VOCAB = ["alpha", "bravo", "carol", "delta", "echo", "fox"]


# --- random automata with table-driven behavior (for runner equivalence) ---


class TableBackend:
    """Deterministic state function: message -> output word, via a table."""

    def __init__(self, table: dict[str, str], default: str):
        self.table = table
        self.default = default
        self.attachment = None

    def predict(self, message: str) -> str:
        return self.table.get(message, self.default)


class TableTrigger:
    """Deterministic trigger: (trigger, message) -> bit, via a table."""

    def __init__(self, trigger_id: str, bits: dict[tuple[str, str], int]):
        self.id = trigger_id
        self.bits = bits

    def fire(self, state: str, message: str) -> int:
        return self.bits[(self.id, message)]


def generate_table_automaton(seed: int):
    """Random valid automaton plus behavior tables and a user script.

    Returns (automaton, bits, outputs, script). Machine outputs and user
    inputs stay within VOCAB so the bit table is total.
    """
    rng = random.Random(seed)
    n_states = rng.randint(2, 6)
    state_ids = [f"s{i}" for i in range(n_states)]
    automaton = Automaton(name=f"gen{seed}")

    n_triggers = rng.randint(1, 3)
    trigger_ids = [f"t{i}" for i in range(n_triggers)]
    for trigger_id in trigger_ids:
        automaton.trigger_defs[trigger_id] = TriggerDef(
            id=trigger_id, kind=TriggerKind.ALWAYS, default_priority=rng.randint(1, n_states)
        )

    outputs: dict[str, dict[str, str]] = {}
    for state_id in state_ids:
        if rng.random() < 0.45:
            automaton.states[state_id] = StateNode(state_id, StateKind.USER, is_final=True)
        else:
            kind = StateKind.DIALER if rng.random() < 0.8 else StateKind.WRITER
            automaton.states[state_id] = StateNode(
                state_id,
                kind,
                is_final=rng.random() < 0.2,
                display=rng.choice(list(DisplayPolicy)),
                backend_ref=state_id,
            )
            automaton.backend_defs[state_id] = DialerConfig(
                BackendKind.TEMPLATE, params={"pattern": "x{msg}"}
            )
            outputs[state_id] = {word: rng.choice(VOCAB) for word in VOCAB}
            outputs[state_id]["__default__"] = rng.choice(VOCAB)

    for src in state_ids:
        for dst in state_ids:
            if rng.random() < 0.35:
                triggers = tuple(
                    rng.sample(trigger_ids, rng.randint(0, min(2, n_triggers)))
                )
                priority = rng.randint(1, n_states) if rng.random() < 0.7 else None
                automaton.edges.append(
                    TriggerEdge(f"{src}->{dst}", src, dst, triggers=triggers, priority=priority)
                )
    for state_id in state_ids:
        node = automaton.states[state_id]
        if not node.is_final and not automaton.out_edges(state_id):
            automaton.edges.append(
                TriggerEdge(f"{state_id}->fix", state_id, rng.choice(state_ids), triggers=(), priority=1)
            )
    automaton.initial = rng.choice(state_ids)

    report = validate(automaton)
    assert report.ok, report.errors

    bits = {
        (trigger_id, word): rng.randint(0, 1) for trigger_id in trigger_ids for word in VOCAB
    }
    script = [rng.choice(VOCAB) for _ in range(rng.randint(2, 6))]
    return automaton, bits, outputs, script


def table_factories(bits, outputs):
    """Runner factory hooks that install the table-driven behavior."""

    def backend_factory(automaton, node, session):
        table = outputs[node.id]
        return TableBackend(table, table["__default__"])

    def trigger_factory(automaton, trigger_id, session):
        return TableTrigger(trigger_id, bits)

    return backend_factory, trigger_factory


def reference_dialogue(automaton, bits, outputs, script, seed, budget=64):
    """Independent, literal transcription of the dialogue exploration loop.

    Kept deliberately separate from the runner: walks states directly,
    recomputing edge values as min(priority * fired, priority) and breaking
    ties with the same uniform-choice discipline (one rng draw per tie).
    Returns the visited-state sequence.
    """
    rng = random.Random(seed)
    current = automaton.initial
    message = ""
    script_index = 0
    machine_steps = 0
    visits: list[str] = []
    while True:
        node = automaton.states[current]
        if node.is_user:
            if script_index >= len(script):
                break
            message = script[script_index]
            script_index += 1
            machine_steps = 0
            visits.append(current)
        else:
            if machine_steps >= budget:
                break
            machine_steps += 1
            table = outputs[current]
            message = table.get(message, table["__default__"])
            visits.append(current)
        candidates = []
        for edge in automaton.edges:
            if edge.src != current:
                continue
            if edge.priority is not None:
                priority = edge.priority
            elif edge.triggers:
                priority = automaton.trigger_defs[edge.triggers[0]].default_priority
            else:
                priority = 1
            fired = 1
            for trigger_id in edge.triggers:
                if bits[(trigger_id, message)] == 0:
                    fired = 0
                    break
            value = min(priority * fired, priority)
            if value > 0:
                candidates.append((value, edge))
        if not candidates:
            break
        best = max(value for value, _ in candidates)
        ties = [edge for value, edge in candidates if value == best]
        chosen = ties[0] if len(ties) == 1 else rng.choice(ties)
        current = chosen.dst
    return visits


# --- exhaustive workload oracle ---


def brute_force_workload(automaton):
    """Longest machine chain between user turns by exhaustive path walking.

    Returns None when some machine-only walk can revisit a machine state
    (unbounded), otherwise the maximum chain length. Independent of the
    estimator's DP.
    """
    states = automaton.states
    entries = []
    for node in states.values():
        if node.is_user:
            for edge in automaton.out_edges(node.id):
                if not states[edge.dst].is_user:
                    entries.append(edge.dst)
    if automaton.initial and not states[automaton.initial].is_user:
        entries.append(automaton.initial)

    best = 0
    unbounded = False

    def walk(node_id: str, seen: tuple[str, ...]):
        nonlocal best, unbounded
        if unbounded:
            return
        if node_id in seen:
            unbounded = True
            return
        seen = seen + (node_id,)
        best = max(best, len(seen))
        for edge in automaton.out_edges(node_id):
            if not states[edge.dst].is_user:
                walk(edge.dst, seen)

    for entry in entries:
        walk(entry, ())
    return None if unbounded else best


# --- random DSL-expressible automata (for round-trip) ---

_WORDS = ["north", "summit", "river", "copper", "lantern", "quartz", "meadow", "harbor"]
_TEXT_CHARS = "abcdefgh XYZ0189_.!?'\"\\\n\t-"


def _text(rng: random.Random, max_len: int = 18) -> str:
    return "".join(rng.choice(_TEXT_CHARS) for _ in range(rng.randint(1, max_len)))


def generate_dsl_automaton(seed: int) -> Automaton:
    """Random structurally complete automaton using only DSL-expressible
    configuration (no in-memory-only params), for round-trip testing."""
    rng = random.Random(seed)
    automaton = Automaton(name=_text(rng, 10) or "a")
    archives = [f"h{i}" for i in range(rng.randint(0, 2))]
    automaton.archives = tuple(archives)

    for i in range(rng.randint(1, 4)):
        trigger_id = f"t{i}"
        kind = rng.choice([TriggerKind.ALWAYS, TriggerKind.KEYWORD, TriggerKind.PATTERN, TriggerKind.LLM])
        params = {}
        if kind is TriggerKind.KEYWORD:
            params["keywords"] = rng.sample(_WORDS, rng.randint(1, 3))
            if rng.random() < 0.3:
                params["case"] = "sensitive"
        elif kind is TriggerKind.PATTERN:
            params["pattern"] = rng.choice(_WORDS)
        elif kind is TriggerKind.LLM:
            params["endpoint"] = "http://localhost:9/v1/chat/completions"
            params["model"] = rng.choice(_WORDS)
            params["prompt"] = _text(rng)
            if rng.random() < 0.5:
                params["temperature"] = round(rng.uniform(0, 2), 2)
        attachments = ()
        if archives and rng.random() < 0.4:
            attachments = (AttachmentDecl(rng.choice(archives), AccessMode.READ),)
        automaton.trigger_defs[trigger_id] = TriggerDef(
            id=trigger_id,
            kind=kind,
            default_priority=rng.randint(1, 5),
            params=params,
            attachments=attachments,
        )

    n_states = rng.randint(1, 6)
    for i in range(n_states):
        state_id = f"s{i}"
        kind = rng.choice([StateKind.USER, StateKind.DIALER, StateKind.WRITER])
        if kind is StateKind.USER:
            automaton.states[state_id] = StateNode(state_id, kind, is_final=True)
            continue
        attachments = ()
        if archives and rng.random() < 0.5:
            attachments = (
                AttachmentDecl(rng.choice(archives), rng.choice([AccessMode.WRITE, AccessMode.READ_WRITE])),
            )
        display = rng.choice(list(DisplayPolicy))
        if kind is StateKind.WRITER:
            config = DialerConfig(
                BackendKind.WRITER, params={"sink": "out/records.csv", "field": rng.choice(_WORDS)}
            )
        elif rng.random() < 0.5:
            config = DialerConfig(
                BackendKind.TEMPLATE, prompt=_text(rng) if rng.random() < 0.3 else None,
                params={"pattern": "reply: {msg}"},
            )
        else:
            params = {"endpoint": "http://localhost:9/v1/chat/completions", "model": rng.choice(_WORDS)}
            if rng.random() < 0.5:
                params["temperature"] = round(rng.uniform(0, 2), 2)
            config = DialerConfig(
                BackendKind.HTTP_CHAT, prompt=_text(rng) if rng.random() < 0.5 else None, params=params
            )
        automaton.states[state_id] = StateNode(
            state_id,
            kind,
            is_final=rng.random() < 0.3,
            display=display,
            backend_ref=state_id,
            attachments=attachments,
        )
        automaton.backend_defs[state_id] = config

    state_ids = list(automaton.states)
    trigger_ids = list(automaton.trigger_defs)
    for _ in range(rng.randint(0, 8)):
        src, dst = rng.choice(state_ids), rng.choice(state_ids)
        triggers = tuple(rng.sample(trigger_ids, rng.randint(0, min(2, len(trigger_ids)))))
        priority = rng.randint(1, 6) if rng.random() < 0.6 else None
        automaton.edges.append(TriggerEdge("", src, dst, triggers=triggers, priority=priority))
    counts: dict[tuple[str, str], int] = {}
    for edge in automaton.edges:
        base = (edge.src, edge.dst)
        counts[base] = counts.get(base, 0) + 1
        edge.id = f"{edge.src}->{edge.dst}" + (f"#{counts[base]}" if counts[base] > 1 else "")
    automaton.initial = rng.choice(state_ids)
    return automaton


# --- loopback service ---


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class LoopbackServer:
    """Runs the FastAPI app under uvicorn in a daemon thread."""

    def __init__(self, app, port: int | None = None):
        import uvicorn

        self.port = port or free_port()
        config = uvicorn.Config(app, host="127.0.0.1", port=self.port, log_level="warning")
        self.server = uvicorn.Server(config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def __enter__(self):
        self.thread.start()
        deadline = time.time() + 10
        while not self.server.started:
            if time.time() > deadline:
                raise RuntimeError("loopback server did not start in time")
            time.sleep(0.02)
        return self

    def __exit__(self, *exc_info):
        self.server.should_exit = True
        self.thread.join(timeout=5)
