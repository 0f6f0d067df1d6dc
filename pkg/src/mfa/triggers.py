"""Transition guards: binary functions of (state, message) plus a priority.

A trigger answers 0 ("not a candidate") or 1 ("candidate") for the message
produced at a state. Built-ins:

- ``always``: fires on every message
- ``keyword``: fires when any keyword occurs (whole-word, case-insensitive
  by default)
- ``pattern``: fires when a regular expression matches
- ``llm``: binary classifier backed by a chat model, with optional
  read-only access to a shared history
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from mfa.backends import ChatClient, build_chat_payload
from mfa.errors import BadPriorityError, ClassifierParseError
from mfa.history import AttachmentDecl, ExchangePair, HistoryAttachment, read_pairs

DEFAULT_CLASSIFIER_TEMPERATURE = 0.1

_ANSWER_RE = re.compile(r"^\s*(1|0|yes|no)\b", re.IGNORECASE)


class TriggerKind(str, Enum):
    ALWAYS = "always"
    KEYWORD = "keyword"
    PATTERN = "pattern"
    LLM = "llm"


@dataclass
class TriggerDef:
    """Declarative trigger configuration.

    ``default_priority`` is inherited by edges that do not set an explicit
    priority; triggers may attach to at most one archive, read-only.
    """

    id: str
    kind: TriggerKind
    default_priority: int = 1
    params: dict[str, Any] = field(default_factory=dict)
    attachments: tuple[AttachmentDecl, ...] = ()

    @property
    def attachment(self) -> AttachmentDecl | None:
        return self.attachments[0] if self.attachments else None


def get_priority(trigger: TriggerDef) -> int:
    return trigger.default_priority


def set_priority(trigger: TriggerDef, priority: int) -> None:
    """Update the default priority; 0 is reserved for "not a candidate"."""
    if priority < 1:
        raise BadPriorityError(f"priority must be >= 1, got {priority}")
    trigger.default_priority = priority


def parse_classifier_output(completion: str) -> int:
    """Map a classifier completion to a bit.

    Accepts a leading ``1``/``0`` or a leading case-insensitive ``yes``/``no``
    after whitespace; anything else raises CLASSIFIER_PARSE.
    """
    match = _ANSWER_RE.match(completion)
    if match is None:
        raise ClassifierParseError(f"cannot parse classifier completion {completion!r} as 0/1")
    answer = match.group(1).lower()
    return 1 if answer in ("1", "yes") else 0


class AlwaysTrigger:
    """Fires on every message."""

    def __init__(self, trigger_id: str = "always"):
        self.id = trigger_id

    def fire(self, state: str, message: str) -> int:
        return 1


class KeywordTrigger:
    """Fires when any keyword occurs in the message.

    Matching is whole-word and case-insensitive unless configured otherwise;
    keyword and pattern triggers are pure functions of their inputs.
    """

    def __init__(self, trigger_id: str, keywords: list[str], *, case_sensitive: bool = False):
        self.id = trigger_id
        self.keywords = [k for k in keywords if k]
        flags = 0 if case_sensitive else re.IGNORECASE
        alternatives = "|".join(re.escape(k) for k in self.keywords) or r"(?!)"
        self._regex = re.compile(rf"\b(?:{alternatives})\b", flags)

    def fire(self, state: str, message: str) -> int:
        return 1 if self._regex.search(message) else 0


class PatternTrigger:
    """Fires when the configured regular expression matches anywhere."""

    def __init__(self, trigger_id: str, pattern: str):
        self.id = trigger_id
        self._regex = re.compile(pattern)

    def fire(self, state: str, message: str) -> int:
        return 1 if self._regex.search(message) else 0


class LlmClassifierTrigger:
    """Chat-model-backed binary classifier.

    Builds a classification request from the configured prompt, the readable
    shared history (when attached) and the message, then parses the
    completion to a bit. Never writes to any archive.
    """

    def __init__(
        self,
        trigger_id: str,
        client: ChatClient,
        prompt: str,
        *,
        attachment: HistoryAttachment | None = None,
    ):
        self.id = trigger_id
        self.client = client
        self.prompt = prompt
        self.attachment = attachment

    def fire(self, state: str, message: str) -> int:
        history: list[ExchangePair] = []
        if self.attachment is not None:
            history = read_pairs(self.attachment)
        payload = build_chat_payload(
            self.prompt, history, message, model=self.client.model, temperature=self.client.temperature
        )
        return parse_classifier_output(self.client.complete(payload.messages))


Trigger = AlwaysTrigger | KeywordTrigger | PatternTrigger | LlmClassifierTrigger


def _load_prompt(params: dict[str, Any]) -> str:
    if "prompt" in params:
        return params["prompt"]
    path = params.get("prompt_file")
    if path:
        return Path(path).read_text(encoding="utf-8").strip()
    return ""


def build_trigger(
    defn: TriggerDef,
    *,
    attachment: HistoryAttachment | None = None,
    http_session: Any | None = None,
) -> Trigger:
    """Instantiate the runtime trigger for one definition."""
    if defn.kind is TriggerKind.ALWAYS:
        return AlwaysTrigger(defn.id)
    if defn.kind is TriggerKind.KEYWORD:
        return KeywordTrigger(
            defn.id,
            defn.params.get("keywords", []),
            case_sensitive=defn.params.get("case", "insensitive") == "sensitive",
        )
    if defn.kind is TriggerKind.PATTERN:
        return PatternTrigger(defn.id, defn.params["pattern"])
    if defn.kind is TriggerKind.LLM:
        client = ChatClient(
            defn.params["endpoint"],
            defn.params["model"],
            temperature=float(defn.params.get("temperature", DEFAULT_CLASSIFIER_TEMPERATURE)),
            api_key_env=defn.params.get("api_key_env"),
            timeout=float(defn.params.get("timeout", 30.0)),
            session=http_session,
        )
        return LlmClassifierTrigger(defn.id, client, _load_prompt(defn.params), attachment=attachment)
    raise ValueError(f"unknown trigger kind: {defn.kind}")
