"""Declarative engine for trigger-routed multi-model dialogue automata."""

from mfa.core import (
    Automaton,
    DisplayPolicy,
    StateKind,
    StateNode,
    TriggerEdge,
    ValidationReport,
    WorkloadEstimate,
    estimate_workload,
    select_next,
    validate,
)
from mfa.dsl import parse, parse_file, serialize
from mfa.history import AccessMode, Archive, AttachmentDecl, ExchangePair, HistoryHub
from mfa.runner import Event, EventKind, Session, SessionStatus, end, run_scripted, start, step
from mfa.triggers import TriggerDef, TriggerKind

__version__ = "0.1.0"

__all__ = [
    "AccessMode",
    "Archive",
    "AttachmentDecl",
    "Automaton",
    "DisplayPolicy",
    "Event",
    "EventKind",
    "ExchangePair",
    "HistoryHub",
    "Session",
    "SessionStatus",
    "StateKind",
    "StateNode",
    "TriggerDef",
    "TriggerEdge",
    "TriggerKind",
    "ValidationReport",
    "WorkloadEstimate",
    "end",
    "estimate_workload",
    "parse",
    "parse_file",
    "run_scripted",
    "select_next",
    "serialize",
    "start",
    "step",
    "validate",
]
