"""Automaton data model, validation, successor selection and workload bounds.

An automaton is a set of states (user turns, dialers, writers), directed
edges labelled with triggers and an integer priority, an initial state and
optional archive attachments. The transition function is operational: for
every outgoing edge the engine computes ``min(priority * fired, priority)``
where ``fired`` is the conjunction of the edge's trigger bits (an empty
trigger list always fires), keeps the edges with a positive value and takes
the highest one, breaking ties uniformly at random.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from mfa.backends import BackendKind, DialerConfig
from mfa.errors import UnvalidatedError
from mfa.history import AccessMode, AttachmentDecl
from mfa.triggers import TriggerDef, TriggerKind

TriggerEval = Callable[[str, str, str], int]  # (trigger_id, state_id, message) -> bit


class StateKind(str, Enum):
    USER = "user"
    DIALER = "dialer"
    WRITER = "writer"


class DisplayPolicy(str, Enum):
    ALWAYS = "always"
    NEVER = "never"
    AUTO = "auto"  # show the output only when the chosen successor is a user node


DEFAULT_DISPLAY = {
    StateKind.USER: DisplayPolicy.NEVER,
    StateKind.DIALER: DisplayPolicy.ALWAYS,
    StateKind.WRITER: DisplayPolicy.NEVER,
}


@dataclass
class StateNode:
    """One automaton state.

    User nodes are always final (the user may walk away), carry no backend
    and no attachment; machine nodes reference a backend configuration and
    may attach to at most one archive.
    """

    id: str
    kind: StateKind
    is_final: bool = False
    display: DisplayPolicy = DisplayPolicy.ALWAYS
    backend_ref: str | None = None
    attachments: tuple[AttachmentDecl, ...] = ()

    @property
    def is_user(self) -> bool:
        return self.kind is StateKind.USER

    @property
    def attachment(self) -> AttachmentDecl | None:
        return self.attachments[0] if self.attachments else None


@dataclass
class TriggerEdge:
    """Directed edge carrying trigger references and a priority.

    ``priority=None`` inherits the first trigger's default priority (1 when
    the trigger list is empty). An empty trigger list always fires.
    """

    id: str
    src: str
    dst: str
    triggers: tuple[str, ...] = ()
    priority: int | None = None


@dataclass
class Automaton:
    """A validated-or-not automaton definition.

    ``states`` is keyed by state id; ``edges`` keeps declaration order, which
    fixes the evaluation order used for deterministic tie-breaking. The
    structure is treated as immutable once ``validated`` is set.
    """

    name: str
    states: dict[str, StateNode] = field(default_factory=dict)
    edges: list[TriggerEdge] = field(default_factory=list)
    initial: str | None = None
    archives: tuple[str, ...] = ()
    trigger_defs: dict[str, TriggerDef] = field(default_factory=dict)
    backend_defs: dict[str, DialerConfig] = field(default_factory=dict)
    validated: bool = False

    def out_edges(self, state_id: str) -> list[TriggerEdge]:
        return [e for e in self.edges if e.src == state_id]

    def final_states(self) -> set[str]:
        return {s.id for s in self.states.values() if s.is_final}

    def effective_priority(self, edge: TriggerEdge) -> int:
        """Edge priority, falling back to the first trigger's default, else 1."""
        if edge.priority is not None:
            return edge.priority
        if edge.triggers:
            defn = self.trigger_defs.get(edge.triggers[0])
            if defn is not None:
                return defn.default_priority
        return 1


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    location: str
    message: str


@dataclass
class ValidationReport:
    """Validation outcome; an automaton is accepted iff ``errors`` is empty."""

    errors: list[ValidationIssue] = field(default_factory=list)
    warnings: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def _check_backend_config(issues: list[ValidationIssue], node: StateNode, config: DialerConfig) -> None:
    where = f"state {node.id}"

    def err(code: str, message: str) -> None:
        issues.append(ValidationIssue(code, where, message))

    if config.kind is BackendKind.HTTP_CHAT:
        if not config.params.get("endpoint") or not config.params.get("model"):
            err("BACKEND_CONFIG", "http backend requires endpoint and model")
        temperature = float(config.params.get("temperature", 0.0))
        if not 0.0 <= temperature <= 2.0:
            err("BACKEND_CONFIG", f"temperature {temperature} outside [0, 2]")
    elif config.kind is BackendKind.WRITER:
        if not config.params.get("sink"):
            err("BACKEND_CONFIG", "writer backend requires a sink path")
    elif config.kind is BackendKind.TEMPLATE:
        pattern = config.params.get("pattern", "")
        if pattern.replace("{msg}", "") == "":
            err("BACKEND_CONFIG", "template must contain literal text so outputs are never empty")
    elif config.kind is BackendKind.SCRIPTED:
        if not config.params.get("lines") and not config.params.get("script_file"):
            err("BACKEND_CONFIG", "scripted backend requires lines or script_file")


def _check_trigger_def(issues: list[ValidationIssue], defn: TriggerDef) -> None:
    where = f"trigger {defn.id}"

    def err(message: str) -> None:
        issues.append(ValidationIssue("TRIGGER_CONFIG", where, message))

    if defn.default_priority < 1:
        err(f"default priority must be >= 1, got {defn.default_priority}")
    if defn.kind is TriggerKind.ALWAYS:
        if any(k in defn.params for k in ("keywords", "pattern", "endpoint", "model")):
            err("always trigger takes no parameters")
    elif defn.kind is TriggerKind.KEYWORD:
        if not defn.params.get("keywords"):
            err("keyword trigger requires a non-empty keyword list")
    elif defn.kind is TriggerKind.PATTERN:
        pattern = defn.params.get("pattern")
        if not pattern:
            err("pattern trigger requires a pattern")
        else:
            try:
                re.compile(pattern)
            except re.error as exc:
                err(f"invalid pattern: {exc}")
    elif defn.kind is TriggerKind.LLM:
        if not defn.params.get("endpoint") or not defn.params.get("model"):
            err("llm trigger requires endpoint and model")


def validate(automaton: Automaton) -> ValidationReport:
    """Check all structural invariants; never raises on a well-formed object.

    On success (no errors) the automaton is marked validated, which the
    runner and the workload estimator require.
    """
    errors: list[ValidationIssue] = []
    warnings: list[ValidationIssue] = []
    states = automaton.states
    archives = set(automaton.archives)
    n_states = len(states)

    if automaton.initial is None:
        errors.append(ValidationIssue("NO_INITIAL", "automaton", "no initial state declared"))
    elif automaton.initial not in states:
        errors.append(
            ValidationIssue("UNKNOWN_INITIAL", "initial", f"initial state {automaton.initial!r} is not declared")
        )

    def check_attachments(owner: str, attachments: tuple[AttachmentDecl, ...], *, trigger: bool) -> None:
        where = ("trigger " if trigger else "state ") + owner
        if len(attachments) > 1:
            errors.append(
                ValidationIssue("MULTI_ATTACH", where, f"attached to {len(attachments)} archives; at most one allowed")
            )
        for decl in attachments:
            if decl.archive not in archives:
                errors.append(
                    ValidationIssue("UNKNOWN_ARCHIVE", where, f"attachment references undeclared archive {decl.archive!r}")
                )
            if trigger and decl.mode is not AccessMode.READ:
                errors.append(
                    ValidationIssue("TRIGGER_WRITE", where, f"triggers must attach read-only, got {decl.mode.value!r}")
                )
            if not trigger and not decl.mode.can_write:
                errors.append(
                    ValidationIssue(
                        "NODE_READ_ONLY",
                        where,
                        "machine states archive their own exchanges and need write access "
                        f"(got {decl.mode.value!r})",
                    )
                )

    for node in states.values():
        where = f"state {node.id}"
        if node.is_user:
            if not node.is_final:
                errors.append(ValidationIssue("USER_NOT_FINAL", where, "user nodes are always final"))
            if node.backend_ref is not None:
                errors.append(ValidationIssue("USER_BACKEND", where, "user nodes take no backend"))
            if node.attachments:
                errors.append(ValidationIssue("USER_ATTACH", where, "user nodes take no history attachment"))
        else:
            config = automaton.backend_defs.get(node.backend_ref) if node.backend_ref else None
            if config is None:
                errors.append(ValidationIssue("MISSING_BACKEND", where, "machine state has no backend configuration"))
            else:
                _check_backend_config(errors, node, config)
            check_attachments(node.id, node.attachments, trigger=False)

    for defn in automaton.trigger_defs.values():
        _check_trigger_def(errors, defn)
        check_attachments(defn.id, defn.attachments, trigger=True)

    for edge in automaton.edges:
        where = f"edge {edge.id}"
        for endpoint in (edge.src, edge.dst):
            if endpoint not in states:
                errors.append(ValidationIssue("UNKNOWN_STATE", where, f"references undeclared state {endpoint!r}"))
        for trigger_id in edge.triggers:
            if trigger_id not in automaton.trigger_defs:
                errors.append(ValidationIssue("UNKNOWN_TRIGGER", where, f"references undeclared trigger {trigger_id!r}"))
        priority = automaton.effective_priority(edge)
        if not 1 <= priority <= max(n_states, 1):
            errors.append(
                ValidationIssue(
                    "PRIORITY_RANGE", where, f"priority {priority} outside 1..{n_states} (0 is reserved)"
                )
            )

    for node in states.values():
        outgoing = automaton.out_edges(node.id)
        if not node.is_final and not outgoing:
            errors.append(
                ValidationIssue("DEAD_END", f"state {node.id}", "non-final state has no outgoing edge")
            )
        seen: dict[int, str] = {}
        for edge in outgoing:
            priority = automaton.effective_priority(edge)
            if priority in seen:
                warnings.append(
                    ValidationIssue(
                        "SHARED_PRIORITY",
                        f"state {node.id}",
                        f"edges {seen[priority]} and {edge.id} share priority {priority}; "
                        "ties are broken at random",
                    )
                )
            else:
                seen[priority] = edge.id

    report = ValidationReport(errors=errors, warnings=warnings)
    automaton.validated = report.ok
    return report


@dataclass(frozen=True)
class EdgeEvaluation:
    """Outcome of evaluating one outgoing edge against a message."""

    edge: TriggerEdge
    priority: int
    trigger_bits: tuple[tuple[str, int], ...]
    value: int

    @property
    def fired(self) -> bool:
        return self.value > 0


def evaluate_edges(
    automaton: Automaton, current: str, message: str, trigger_eval: TriggerEval
) -> list[EdgeEvaluation]:
    """Evaluate every outgoing edge of ``current``: value = min(p * f, p).

    The conjunction short-circuits on the first 0 bit; an empty trigger list
    fires unconditionally.
    """
    evaluations = []
    for edge in automaton.out_edges(current):
        priority = automaton.effective_priority(edge)
        bits: list[tuple[str, int]] = []
        fired = 1
        for trigger_id in edge.triggers:
            bit = trigger_eval(trigger_id, current, message)
            bits.append((trigger_id, bit))
            if bit == 0:
                fired = 0
                break
        value = min(priority * fired, priority)
        evaluations.append(EdgeEvaluation(edge, priority, tuple(bits), value))
    return evaluations


def choose_transition(
    automaton: Automaton,
    current: str,
    message: str,
    trigger_eval: TriggerEval,
    rng: random.Random,
) -> tuple[TriggerEdge | None, list[EdgeEvaluation]]:
    """Pick the firing edge with the highest value, breaking ties uniformly.

    Returns (edge, evaluations); edge is None when no edge fires. The rng is
    consumed only when two or more edges tie at the maximum, which keeps
    replays deterministic for a fixed seed.
    """
    evaluations = evaluate_edges(automaton, current, message, trigger_eval)
    firing = [ev for ev in evaluations if ev.fired]
    if not firing:
        return None, evaluations
    best = max(ev.value for ev in firing)
    ties = [ev.edge for ev in firing if ev.value == best]
    chosen = ties[0] if len(ties) == 1 else rng.choice(ties)
    return chosen, evaluations


def select_next(
    automaton: Automaton,
    current: str,
    message: str,
    trigger_eval: TriggerEval,
    rng: random.Random,
) -> str | None:
    """Successor state for ``current`` given ``message``; None when no edge fires."""
    edge, _ = choose_transition(automaton, current, message, trigger_eval, rng)
    return edge.dst if edge is not None else None


TERMINAL = None  # per-pair key for chains that end at a machine state with no outgoing edges


@dataclass
class WorkloadEstimate:
    """Bound on machine work between two consecutive user turns.

    ``max_machine_chain`` is None when a machine-only cycle is reachable, in
    which case no finite bound exists. ``per_pair`` maps
    (user exit, next user node or None-for-terminal) to the longest machine
    chain; the session start counts as a user exit keyed by None when the
    initial state is a machine node.
    """

    max_machine_chain: int | None
    per_pair: dict[tuple[str | None, str | None], int] = field(default_factory=dict)
    estimated_latency: float | None = None

    @property
    def unbounded(self) -> bool:
        return self.max_machine_chain is None


def estimate_workload(
    automaton: Automaton, per_state_cost: dict[StateKind, float] | None = None
) -> WorkloadEstimate:
    """Longest machine chain between user turns, by DP over the machine subgraph.

    Cycles through a user node do not make the estimate unbounded (the user
    turn bounds latency); cycles within the machine-only subgraph do.
    """
    if not automaton.validated:
        raise UnvalidatedError("estimate_workload requires a validated automaton")

    states = automaton.states
    machine_succ: dict[str, list[str]] = {
        s: [e.dst for e in automaton.out_edges(s) if not states[e.dst].is_user]
        for s in states
        if not states[s].is_user
    }

    # Entry points into the machine subgraph: user exits plus a machine initial.
    entries: list[tuple[str | None, str]] = []
    for node in states.values():
        if node.is_user:
            for edge in automaton.out_edges(node.id):
                if edge.dst in states and not states[edge.dst].is_user:
                    entries.append((node.id, edge.dst))
    if automaton.initial is not None and not states[automaton.initial].is_user:
        entries.append((None, automaton.initial))

    reachable: set[str] = set()
    frontier = [m for _, m in entries]
    while frontier:
        node = frontier.pop()
        if node in reachable:
            continue
        reachable.add(node)
        frontier.extend(machine_succ[node])

    # Cycle detection restricted to the reachable machine subgraph.
    color: dict[str, int] = {}  # 0 visiting, 1 done

    def has_cycle(node: str) -> bool:
        state = color.get(node)
        if state == 0:
            return True
        if state == 1:
            return False
        color[node] = 0
        if any(has_cycle(succ) for succ in machine_succ[node]):
            return True
        color[node] = 1
        return False

    if any(has_cycle(node) for node in reachable):
        return WorkloadEstimate(max_machine_chain=None)

    # For each reachable machine node: longest chain (counting the node itself)
    # ending right before each user node, or at a terminal machine node.
    best: dict[str, dict[str | None, int]] = {}

    def longest_from(node: str) -> dict[str | None, int]:
        cached = best.get(node)
        if cached is not None:
            return cached
        endings: dict[str | None, int] = {}
        outgoing = automaton.out_edges(node)
        if not outgoing:
            endings[TERMINAL] = 1
        for edge in outgoing:
            succ = edge.dst
            if states[succ].is_user:
                endings[succ] = max(endings.get(succ, 0), 1)
            else:
                for ending, length in longest_from(succ).items():
                    endings[ending] = max(endings.get(ending, 0), 1 + length)
        best[node] = endings
        return endings

    per_pair: dict[tuple[str | None, str | None], int] = {}
    for exit_point, machine_entry in entries:
        for ending, length in longest_from(machine_entry).items():
            key = (exit_point, ending)
            per_pair[key] = max(per_pair.get(key, 0), length)
    # Direct user-to-user edges cross zero machine states.
    for node in states.values():
        if node.is_user:
            for edge in automaton.out_edges(node.id):
                if edge.dst in states and states[edge.dst].is_user:
                    per_pair.setdefault((node.id, edge.dst), 0)

    max_chain = max(per_pair.values(), default=0)
    latency = None
    if per_state_cost:
        average = sum(per_state_cost.values()) / len(per_state_cost)
        latency = max_chain * average
    return WorkloadEstimate(max_machine_chain=max_chain, per_pair=per_pair, estimated_latency=latency)
