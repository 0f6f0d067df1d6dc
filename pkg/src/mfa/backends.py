"""State backends: the pluggable functions a machine state applies to a message.

Every backend maps an incoming message (possibly empty) to a non-empty
response string. Four kinds are provided:

- ``scripted``: replays canned lines in order (deterministic tests, demos)
- ``template``: substitutes the message into a fixed pattern
- ``http_chat``: OpenAI-compatible chat-completions call, with the attached
  shared history expanded into the message list
- ``writer``: appends a structured record to a CSV sink and passes the
  message through unchanged
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Sequence

import requests

from mfa.errors import (
    EmptyCompletionError,
    HttpBackendError,
    ScriptExhaustedError,
    SinkIoError,
)
from mfa.history import ExchangePair, HistoryAttachment, add_pair, read_pairs


class BackendKind(str, Enum):
    SCRIPTED = "scripted"
    TEMPLATE = "template"
    HTTP_CHAT = "http_chat"
    WRITER = "writer"


@dataclass
class DialerConfig:
    """Declarative backend configuration, as produced by the definition parser."""

    kind: BackendKind
    prompt: str | None = None
    params: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "system" | "user" | "assistant"
    content: str


@dataclass(frozen=True)
class ChatPayload:
    """Wire representation of one chat-completions request."""

    messages: tuple[ChatMessage, ...]
    model: str = ""
    temperature: float = 0.0


def build_chat_payload(
    prompt: str | None,
    readable_history: Sequence[ExchangePair],
    message: str,
    *,
    model: str = "",
    temperature: float = 0.0,
) -> ChatPayload:
    """Expand an optional system prompt, archived exchanges and the incoming
    message into an ordered chat message list.

    Message count is always ``2 * len(history) + 1 + (1 if prompt else 0)``.
    """
    messages: list[ChatMessage] = []
    if prompt:
        messages.append(ChatMessage("system", prompt))
    for pair in readable_history:
        messages.append(ChatMessage("user", pair.input))
        messages.append(ChatMessage("assistant", pair.output))
    messages.append(ChatMessage("user", message))
    return ChatPayload(messages=tuple(messages), model=model, temperature=temperature)


class ChatClient:
    """Minimal OpenAI-compatible chat-completions client.

    Retries transient failures (connection errors, timeouts, 429, 5xx) with
    exponential backoff. The API key is read from the named environment
    variable at call time and never stored in definition files.
    """

    RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})

    def __init__(
        self,
        endpoint: str,
        model: str,
        *,
        temperature: float = 0.0,
        api_key_env: str | None = None,
        timeout: float = 30.0,
        retries: int = 2,
        backoff: float = 0.5,
        session: Any | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._session = session if session is not None else requests.Session()

    def complete(self, messages: Sequence[ChatMessage]) -> str:
        """POST the messages and return the first completion's content."""
        body = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"

        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                response = self._session.post(
                    self.endpoint, json=body, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
            else:
                status = getattr(response, "status_code", 0)
                if status in self.RETRYABLE_STATUS:
                    last_error = HttpBackendError(f"{self.endpoint}: HTTP {status}")
                elif status >= 400:
                    raise HttpBackendError(f"{self.endpoint}: HTTP {status}")
                else:
                    return self._extract(response)
            if attempt < self.retries and self.backoff > 0:
                time.sleep(self.backoff * (2**attempt))
        raise HttpBackendError(f"{self.endpoint}: giving up after {self.retries + 1} attempts: {last_error}")

    def _extract(self, response: Any) -> str:
        try:
            data = response.json()
            return data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise HttpBackendError(f"{self.endpoint}: malformed completion response: {exc}")


def _require_nonempty(output: str, origin: str) -> str:
    if output == "":
        raise EmptyCompletionError(f"{origin} produced an empty response; state outputs must be non-empty")
    return output


class ScriptedBackend:
    """Replays canned response lines in order.

    With ``loop=True`` the lines cycle forever; otherwise running past the
    last line raises SCRIPT_EXHAUSTED.
    """

    def __init__(self, lines: Sequence[str], *, loop: bool = False, attachment: HistoryAttachment | None = None):
        self.lines = [line for line in lines if line != ""]
        self.loop = loop
        self.attachment = attachment
        self._index = 0

    def predict(self, message: str) -> str:
        if self._index >= len(self.lines):
            if not self.loop or not self.lines:
                raise ScriptExhaustedError(f"scripted backend exhausted after {self._index} lines")
            self._index = 0
        line = self.lines[self._index]
        self._index += 1
        return _require_nonempty(line, "scripted backend")


class TemplateBackend:
    """Substitutes the incoming message into a fixed pattern at ``{msg}``."""

    def __init__(self, pattern: str, *, attachment: HistoryAttachment | None = None):
        self.pattern = pattern
        self.attachment = attachment

    def predict(self, message: str) -> str:
        return _require_nonempty(self.pattern.replace("{msg}", message), "template backend")


class HttpChatBackend:
    """Chat-model state: system prompt + readable shared history + message."""

    def __init__(self, client: ChatClient, *, prompt: str | None = None, attachment: HistoryAttachment | None = None):
        self.client = client
        self.prompt = prompt
        self.attachment = attachment

    def predict(self, message: str) -> str:
        history: list[ExchangePair] = []
        if self.attachment is not None and self.attachment.mode.can_read:
            history = read_pairs(self.attachment)
        payload = build_chat_payload(
            self.prompt, history, message, model=self.client.model, temperature=self.client.temperature
        )
        return _require_nonempty(self.client.complete(payload.messages), f"chat backend {self.client.endpoint}")


class WriterBackend:
    """Persists the incoming message as a structured record, passing it through.

    Appends ``field,value,timestamp,session_id`` rows to a CSV sink (header
    written on first use) and returns the message unchanged so downstream
    states and triggers can keep consuming it.
    """

    def __init__(
        self,
        sink: Path | str,
        field_name: str,
        *,
        session_id: str = "",
        attachment: HistoryAttachment | None = None,
    ):
        self.sink = Path(sink)
        self.field_name = field_name
        self.session_id = session_id
        self.attachment = attachment

    def predict(self, message: str) -> str:
        try:
            self.sink.parent.mkdir(parents=True, exist_ok=True)
            new_file = not self.sink.exists() or self.sink.stat().st_size == 0
            with self.sink.open("a", newline="", encoding="utf-8") as handle:
                writer = csv.writer(handle)
                if new_file:
                    writer.writerow(["field", "value", "timestamp", "session_id"])
                timestamp = datetime.now(timezone.utc).isoformat()
                writer.writerow([self.field_name, message, timestamp, self.session_id])
        except OSError as exc:
            raise SinkIoError(f"cannot append to sink {self.sink}: {exc}")
        return _require_nonempty(message, "writer backend")


Backend = ScriptedBackend | TemplateBackend | HttpChatBackend | WriterBackend


def add_pair_if_attached(backend: Backend, input_message: str, output_message: str) -> None:
    """Archive the exchange if the backend has a writable attachment; no-op otherwise.

    Read-only state attachments are rejected at validation time, so this
    never raises at runtime.
    """
    attachment = getattr(backend, "attachment", None)
    if attachment is not None and attachment.mode.can_write:
        add_pair(attachment, input_message, output_message)


def _load_script(params: dict[str, Any]) -> list[str]:
    if "lines" in params:
        return list(params["lines"])
    path = params.get("script_file")
    if not path:
        return []
    text = Path(path).read_text(encoding="utf-8")
    return [line for line in text.splitlines() if line.strip() != ""]


def _load_prompt(config: DialerConfig) -> str | None:
    if config.prompt is not None:
        return config.prompt
    path = config.params.get("prompt_file")
    if path:
        return Path(path).read_text(encoding="utf-8").strip()
    return None


def build_backend(
    config: DialerConfig,
    *,
    attachment: HistoryAttachment | None = None,
    session_id: str = "",
    sink_root: Path | str | None = None,
    http_session: Any | None = None,
) -> Backend:
    """Instantiate the runtime backend for one state from its configuration."""
    if config.kind is BackendKind.SCRIPTED:
        return ScriptedBackend(
            _load_script(config.params), loop=bool(config.params.get("loop", False)), attachment=attachment
        )
    if config.kind is BackendKind.TEMPLATE:
        return TemplateBackend(config.params["pattern"], attachment=attachment)
    if config.kind is BackendKind.HTTP_CHAT:
        client = ChatClient(
            config.params["endpoint"],
            config.params["model"],
            temperature=float(config.params.get("temperature", 0.0)),
            api_key_env=config.params.get("api_key_env"),
            timeout=float(config.params.get("timeout", 30.0)),
            session=http_session,
        )
        return HttpChatBackend(client, prompt=_load_prompt(config), attachment=attachment)
    if config.kind is BackendKind.WRITER:
        sink = Path(config.params["sink"])
        if sink_root is not None and not sink.is_absolute():
            sink = Path(sink_root) / sink
        return WriterBackend(
            sink, config.params.get("field", "value"), session_id=session_id, attachment=attachment
        )
    raise ValueError(f"unknown backend kind: {config.kind}")
