"""Parser and serializer for the ``.mfa`` automaton definition language.

Grammar (EBNF):

    automaton := "automaton" STRING "{" item* "}"
    item      := state | trigger | archive | edge | "initial" ID
    state     := "state" ID ("user"|"dialer"|"writer") ["final"] attrs
    trigger   := "trigger" ID ("always"|"keyword"|"pattern"|"llm") attrs
    archive   := "history" ID
    edge      := "edge" ID "->" ID ["on" ID ("," ID)*] ["priority" INT]
    attrs     := (KEY "=" value)*

Comments run from ``#`` to end of line; strings are double-quoted with
backslash escapes. Relative ``*_file`` and sink paths resolve against the
definition file's directory. Parsing is purely syntactic: unknown state or
trigger references survive parsing and are reported by validation.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

from mfa.backends import BackendKind, DialerConfig
from mfa.core import DEFAULT_DISPLAY, Automaton, DisplayPolicy, StateKind, StateNode, TriggerEdge
from mfa.errors import MfaError
from mfa.history import AccessMode, AttachmentDecl
from mfa.triggers import TriggerDef, TriggerKind


@dataclass
class DefinitionSource:
    """A definition text plus the path it was loaded from (for diagnostics
    and relative-path resolution)."""

    text: str
    path: str | None = None

    @property
    def base_dir(self) -> Path:
        return Path(self.path).resolve().parent if self.path else Path.cwd()


@dataclass(frozen=True)
class ParseError:
    line: int
    column: int
    expected: str
    found: str

    def __str__(self) -> str:
        return f"line {self.line}, column {self.column}: expected {self.expected}, found {self.found}"


class ParseFailure(MfaError):
    """Raised when a definition cannot be parsed; carries all collected errors."""

    code = "PARSE"

    def __init__(self, errors: list[ParseError]):
        super().__init__("; ".join(str(e) for e in errors))
        self.errors = errors


# --- lexer ---

_PUNCT = {"{": "LBRACE", "}": "RBRACE", "=": "EQUALS", ",": "COMMA", ":": "COLON"}
_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t"}


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT | STRING | NUMBER | punct kinds | EOF
    text: str
    value: object
    line: int
    column: int

    def describe(self) -> str:
        if self.kind == "EOF":
            return "end of input"
        return repr(self.text)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col, i = 1, 1, 0
    n = len(text)

    def error(expected: str, found: str, at_line: int, at_col: int) -> ParseFailure:
        return ParseFailure([ParseError(at_line, at_col, expected, found)])

    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch == "-" and text[i : i + 2] == "->":
            tokens.append(Token("ARROW", "->", "->", start_line, start_col))
            i += 2
            col += 2
            continue
        if ch in _PUNCT:
            tokens.append(Token(_PUNCT[ch], ch, ch, start_line, start_col))
            i += 1
            col += 1
            continue
        if ch == '"':
            i += 1
            col += 1
            out = io.StringIO()
            while True:
                if i >= n or text[i] == "\n":
                    raise error("closing '\"'", "end of line" if i < n else "end of input", start_line, start_col)
                ch = text[i]
                if ch == '"':
                    i += 1
                    col += 1
                    break
                if ch == "\\":
                    if i + 1 >= n or text[i + 1] not in _ESCAPES:
                        raise error("escape sequence", repr(text[i : i + 2]), line, col)
                    out.write(_ESCAPES[text[i + 1]])
                    i += 2
                    col += 2
                    continue
                out.write(ch)
                i += 1
                col += 1
            tokens.append(Token("STRING", out.getvalue(), out.getvalue(), start_line, start_col))
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            is_float = j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit()
            if is_float:
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            raw = text[i:j]
            value: object = float(raw) if is_float else int(raw)
            tokens.append(Token("NUMBER", raw, value, start_line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            raw = text[i:j]
            tokens.append(Token("IDENT", raw, raw, start_line, start_col))
            col += j - i
            i = j
            continue
        raise error("a token", repr(ch), start_line, start_col)
    tokens.append(Token("EOF", "", None, line, col))
    return tokens


# --- parser ---

_STATE_KINDS = {k.value: k for k in StateKind}
_TRIGGER_KINDS = {k.value: k for k in TriggerKind}
_MODES = {m.value: m for m in AccessMode}
_DISPLAYS = {d.value: d for d in DisplayPolicy}

# key -> value shape: "string" | "number" | "int" | "ident" | "history" | "bool"
_ATTR_KEYS = {
    "prompt": "string",
    "prompt_file": "string",
    "display": "ident",
    "history": "history",
    "script_file": "string",
    "endpoint": "string",
    "model": "string",
    "temperature": "number",
    "api_key_env": "string",
    "keywords": "string",
    "case": "ident",
    "pattern": "string",
    "sink": "string",
    "field": "string",
    "priority": "int",
    "loop": "bool",
}

_BACKEND_FAMILY_KEYS = ("script_file", "pattern", "endpoint")

# Structural keywords may not be used as ids; rejecting them keeps diagnostics
# anchored near the actual defect instead of swallowing the next declaration.
RESERVED_WORDS = frozenset({"automaton", "state", "trigger", "history", "edge", "initial", "on", "priority", "final"})

_STATE_KEYS = frozenset(_ATTR_KEYS) - {"priority", "keywords", "case"}
_TRIGGER_KEYS = frozenset(
    {"keywords", "case", "pattern", "endpoint", "model", "temperature", "api_key_env", "prompt", "prompt_file", "priority", "history"}
)


class _Parser:
    def __init__(self, source: DefinitionSource):
        self.source = source
        self.tokens = tokenize(source.text)
        self.pos = 0
        self.errors: list[ParseError] = []

    # token helpers

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        if token.kind != "EOF":
            self.pos += 1
        return token

    def fail(self, expected: str, token: Token | None = None, *, anchor_found: bool = False):
        token = token or self.peek()
        line, column = token.line, token.column
        if not anchor_found and self.pos > 0:
            # A continuation expectation (mid-declaration) failing on a token
            # lines below the last consumed one means the defect is the tail
            # of the earlier line (e.g. a deleted line-final token); anchor
            # the report where the expectation arose. Item-boundary failures
            # (anchor_found) point at the offending token itself.
            prev = self.tokens[self.pos - 1]
            if token.line - prev.line > 1:
                line, column = prev.line, prev.column + len(prev.text)
        self.errors.append(ParseError(line, column, expected, token.describe()))
        raise ParseFailure(self.errors)

    def soft_error(self, expected: str, token: Token) -> None:
        self.errors.append(ParseError(token.line, token.column, expected, token.describe()))

    def expect(self, kind: str, expected: str) -> Token:
        token = self.peek()
        if token.kind != kind:
            self.fail(expected, token)
        return self.advance()

    def expect_word(self, word: str) -> Token:
        token = self.peek()
        if token.kind != "IDENT" or token.text != word:
            self.fail(f"'{word}'", token)
        return self.advance()

    def expect_id(self, what: str) -> Token:
        token = self.peek()
        if token.kind != "IDENT" or token.text in RESERVED_WORDS:
            self.fail(what, token)
        return self.advance()

    def at_word(self, *words: str) -> bool:
        token = self.peek()
        return token.kind == "IDENT" and token.text in words

    def resolve(self, path_text: str) -> str:
        path = Path(path_text)
        if not path.is_absolute():
            path = self.source.base_dir / path
        return str(path)

    # attribute parsing

    def parse_attrs(self) -> dict[str, object]:
        """Parse ``key = value`` pairs; ``history`` may repeat (the validator
        enforces the at-most-one-attachment rule), other keys may not."""
        attrs: dict[str, object] = {}
        while self.peek().kind == "IDENT" and self.tokens[self.pos + 1].kind == "EQUALS":
            key_token = self.advance()
            key = key_token.text
            self.advance()  # '='
            shape = _ATTR_KEYS.get(key)
            if shape is None:
                self.fail("an attribute key (" + ", ".join(sorted(_ATTR_KEYS)) + ")", key_token)
            value = self.parse_attr_value(key, shape)
            if key == "history":
                attrs.setdefault("history", []).append(value)  # type: ignore[union-attr]
            elif key in attrs:
                self.fail(f"a unique attribute (duplicate '{key}')", key_token)
            else:
                attrs[key] = value
        return attrs

    def parse_attr_value(self, key: str, shape: str) -> object:
        token = self.peek()
        if shape == "string":
            return self.expect("STRING", f"a quoted string value for '{key}'").value
        if shape == "number":
            return self.expect("NUMBER", f"a numeric value for '{key}'").value
        if shape == "int":
            token = self.expect("NUMBER", f"an integer value for '{key}'")
            if not isinstance(token.value, int):
                self.fail(f"an integer value for '{key}'", token)
            return token.value
        if shape == "bool":
            token = self.expect_id(f"true or false for '{key}'")
            if token.text not in ("true", "false"):
                self.fail(f"true or false for '{key}'", token)
            return token.text == "true"
        if shape == "ident":
            return self.expect_id(f"a bare word value for '{key}'").text
        if shape == "history":
            archive = self.expect_id("an archive id").text
            self.expect("COLON", "':' between archive id and access mode")
            mode_token = self.expect_id("an access mode (r, w or rw)")
            mode = _MODES.get(mode_token.text)
            if mode is None:
                self.fail("an access mode (r, w or rw)", mode_token)
            return AttachmentDecl(archive, mode)
        raise AssertionError(f"unknown attr shape {shape}")

    # items

    def parse(self) -> Automaton:
        self.expect_word("automaton")
        name = self.expect("STRING", "the automaton name as a quoted string").value
        self.expect("LBRACE", "'{'")
        automaton = Automaton(name=str(name))
        declared_edges: list[tuple[Token, TriggerEdge]] = []
        initial_token: Token | None = None

        while not self.peek().kind == "RBRACE":
            token = self.peek()
            if token.kind == "EOF":
                self.fail("'}'", token, anchor_found=True)
            if not self.at_word("state", "trigger", "history", "edge", "initial"):
                self.fail("'state', 'trigger', 'history', 'edge', 'initial' or '}'", token, anchor_found=True)
            word = token.text
            if word == "state":
                self.parse_state(automaton)
            elif word == "trigger":
                self.parse_trigger(automaton)
            elif word == "history":
                self.parse_archive(automaton)
            elif word == "edge":
                declared_edges.append(self.parse_edge())
            else:
                self.advance()
                id_token = self.expect_id("the initial state id")
                if initial_token is not None:
                    self.soft_error("a single 'initial' declaration", id_token)
                initial_token = id_token
                automaton.initial = id_token.text
        self.advance()  # '}'
        if self.peek().kind != "EOF":
            self.fail("end of input (one automaton per file)")

        counts: dict[tuple[str, str], int] = {}
        for _, edge in declared_edges:
            base = (edge.src, edge.dst)
            counts[base] = counts.get(base, 0) + 1
            suffix = f"#{counts[base]}" if counts[base] > 1 else ""
            edge.id = f"{edge.src}->{edge.dst}{suffix}"
            automaton.edges.append(edge)

        if self.errors:
            raise ParseFailure(self.errors)
        return automaton

    def parse_state(self, automaton: Automaton) -> None:
        self.advance()
        id_token = self.expect_id("a state id")
        kind_token = self.expect_id("a state kind (user, dialer or writer)")
        kind = _STATE_KINDS.get(kind_token.text)
        if kind is None:
            self.fail("a state kind (user, dialer or writer)", kind_token)
        is_final = False
        if self.at_word("final"):
            self.advance()
            is_final = True
        attrs = self.parse_attrs()
        if kind is StateKind.USER:
            stray = [key for key in attrs if key != "history"]
            if stray:
                self.fail(f"no '{stray[0]}' attribute on a user state (user turns run no backend)", id_token)
        else:
            stray = [key for key in attrs if key not in _STATE_KEYS]
            if stray:
                self.fail(f"a state attribute, not '{stray[0]}'", id_token)
        if id_token.text in automaton.states:
            self.soft_error("a unique state id", id_token)
            return

        display = DEFAULT_DISPLAY[kind]
        if "display" in attrs:
            display_value = _DISPLAYS.get(str(attrs["display"]))
            if display_value is None:
                self.fail("a display policy (always, never or auto)", id_token)
            display = display_value

        attachments = tuple(attrs.get("history", ()))
        node = StateNode(
            id=id_token.text,
            kind=kind,
            is_final=is_final or kind is StateKind.USER,  # user turns may always end the chat
            display=display,
            attachments=attachments,
        )
        if kind is not StateKind.USER:
            config = self.build_backend_config(kind, attrs, id_token)
            if config is not None:
                node.backend_ref = id_token.text
                automaton.backend_defs[id_token.text] = config
        automaton.states[id_token.text] = node

    def build_backend_config(self, kind: StateKind, attrs: dict[str, object], at: Token) -> DialerConfig | None:
        params: dict[str, object] = {}
        prompt = attrs.get("prompt")
        if "prompt_file" in attrs:
            params["prompt_file"] = self.resolve(str(attrs["prompt_file"]))
        if "temperature" in attrs:
            params["temperature"] = attrs["temperature"]
        if "api_key_env" in attrs:
            params["api_key_env"] = attrs["api_key_env"]

        if kind is StateKind.WRITER:
            if "sink" in attrs:
                params["sink"] = attrs["sink"]
            if "field" in attrs:
                params["field"] = attrs["field"]
            return DialerConfig(BackendKind.WRITER, prompt=None, params=params)

        families = [key for key in _BACKEND_FAMILY_KEYS if key in attrs]
        if len(families) > 1:
            self.fail(f"a single backend family, not {' and '.join(families)}", at)
        if not families:
            # No runnable backend configured; validation reports MISSING_BACKEND.
            return None
        family = families[0]
        if family == "script_file":
            params["script_file"] = self.resolve(str(attrs["script_file"]))
            params["loop"] = bool(attrs.get("loop", False))
            return DialerConfig(BackendKind.SCRIPTED, prompt=prompt, params=params)
        if family == "pattern":
            params["pattern"] = attrs["pattern"]
            return DialerConfig(BackendKind.TEMPLATE, prompt=prompt, params=params)
        params["endpoint"] = attrs["endpoint"]
        params["model"] = attrs.get("model", "")
        return DialerConfig(BackendKind.HTTP_CHAT, prompt=prompt, params=params)

    def parse_trigger(self, automaton: Automaton) -> None:
        self.advance()
        id_token = self.expect_id("a trigger id")
        kind_token = self.expect_id("a trigger kind (always, keyword, pattern or llm)")
        kind = _TRIGGER_KINDS.get(kind_token.text)
        if kind is None:
            self.fail("a trigger kind (always, keyword, pattern or llm)", kind_token)
        attrs = self.parse_attrs()
        stray = [key for key in attrs if key not in _TRIGGER_KEYS]
        if stray:
            self.fail(f"a trigger attribute, not '{stray[0]}'", id_token)
        if id_token.text in automaton.trigger_defs:
            self.soft_error("a unique trigger id", id_token)
            return

        params: dict[str, object] = {}
        if "keywords" in attrs:
            params["keywords"] = [k.strip() for k in str(attrs["keywords"]).split(",") if k.strip()]
        if "case" in attrs:
            params["case"] = attrs["case"]
        if "pattern" in attrs:
            params["pattern"] = attrs["pattern"]
        for key in ("endpoint", "model", "temperature", "api_key_env", "prompt"):
            if key in attrs:
                params[key] = attrs[key]
        if "prompt_file" in attrs:
            params["prompt_file"] = self.resolve(str(attrs["prompt_file"]))

        automaton.trigger_defs[id_token.text] = TriggerDef(
            id=id_token.text,
            kind=kind,
            default_priority=int(attrs.get("priority", 1)),
            params=params,
            attachments=tuple(attrs.get("history", ())),
        )

    def parse_archive(self, automaton: Automaton) -> None:
        self.advance()
        id_token = self.expect_id("an archive id")
        if id_token.text in automaton.archives:
            self.soft_error("a unique archive id", id_token)
            return
        automaton.archives = automaton.archives + (id_token.text,)

    def parse_edge(self) -> tuple[Token, TriggerEdge]:
        start = self.advance()
        src = self.expect_id("the source state id").text
        self.expect("ARROW", "'->'")
        dst = self.expect_id("the target state id").text
        triggers: list[str] = []
        if self.at_word("on"):
            self.advance()
            triggers.append(self.expect_id("a trigger id").text)
            while self.peek().kind == "COMMA":
                self.advance()
                triggers.append(self.expect_id("a trigger id").text)
        priority: int | None = None
        if self.at_word("priority"):
            self.advance()
            token = self.expect("NUMBER", "an integer priority")
            if not isinstance(token.value, int):
                self.fail("an integer priority", token)
            priority = token.value
        return start, TriggerEdge(id="", src=src, dst=dst, triggers=tuple(triggers), priority=priority)


def parse(source: DefinitionSource | str, *, path: str | None = None) -> Automaton:
    """Parse a definition into an (unvalidated) automaton.

    Raises :class:`ParseFailure` carrying precise line/column diagnostics;
    duplicate ids are collected so several can be reported at once.
    """
    if isinstance(source, str):
        source = DefinitionSource(text=source, path=path)
    return _Parser(source).parse()


def parse_file(path: str | Path) -> Automaton:
    path = Path(path)
    return parse(DefinitionSource(text=path.read_text(encoding="utf-8"), path=str(path)))


# --- serializer ---


def _quote(value: str) -> str:
    escaped = value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
    return f'"{escaped}"'


def _render_value(key: str, value: object) -> str:
    shape = _ATTR_KEYS[key]
    if shape == "bool":
        return "true" if value else "false"
    if shape in ("number", "int"):
        return repr(value)
    if shape == "history":
        assert isinstance(value, AttachmentDecl)
        return f"{value.archive}:{value.mode.value}"
    if shape == "ident":
        return str(value)
    return _quote(str(value))


def _state_attrs(automaton: Automaton, node: StateNode) -> list[tuple[str, object]]:
    attrs: list[tuple[str, object]] = []
    if not node.is_user and node.display is not DEFAULT_DISPLAY[node.kind]:
        attrs.append(("display", node.display.value))
    config = automaton.backend_defs.get(node.backend_ref) if node.backend_ref else None
    if config is not None:
        if config.prompt is not None:
            attrs.append(("prompt", config.prompt))
        for key in ("prompt_file", "script_file", "pattern", "endpoint", "model", "sink", "field", "api_key_env"):
            if key in config.params:
                attrs.append((key, config.params[key]))
        if config.params.get("loop"):
            attrs.append(("loop", True))
        if "temperature" in config.params:
            attrs.append(("temperature", config.params["temperature"]))
    for decl in node.attachments:
        attrs.append(("history", decl))
    return attrs


def _trigger_attrs(defn: TriggerDef) -> list[tuple[str, object]]:
    attrs: list[tuple[str, object]] = []
    params = defn.params
    if "keywords" in params:
        attrs.append(("keywords", ",".join(params["keywords"])))
    for key in ("case", "pattern", "prompt", "prompt_file", "endpoint", "model", "api_key_env", "temperature"):
        if key in params:
            attrs.append((key, params[key]))
    if defn.default_priority != 1:
        attrs.append(("priority", defn.default_priority))
    for decl in defn.attachments:
        attrs.append(("history", decl))
    return attrs


def serialize(automaton: Automaton) -> str:
    """Render an automaton in canonical form: sorted states, triggers,
    histories, then edges, with the initial declaration last.

    ``parse(serialize(a))`` is structurally equal to ``a``.
    """
    out = io.StringIO()
    out.write(f"automaton {_quote(automaton.name)} {{\n")
    for state_id in sorted(automaton.states):
        node = automaton.states[state_id]
        parts = ["state", node.id, node.kind.value]
        if node.is_final:
            parts.append("final")
        parts.extend(f"{key}={_render_value(key, value)}" for key, value in _state_attrs(automaton, node))
        out.write("  " + " ".join(parts) + "\n")
    for trigger_id in sorted(automaton.trigger_defs):
        defn = automaton.trigger_defs[trigger_id]
        parts = ["trigger", defn.id, defn.kind.value]
        parts.extend(f"{key}={_render_value(key, value)}" for key, value in _trigger_attrs(defn))
        out.write("  " + " ".join(parts) + "\n")
    for archive_id in sorted(automaton.archives):
        out.write(f"  history {archive_id}\n")
    for edge in sorted(automaton.edges, key=lambda e: (e.src, e.dst, e.triggers, e.priority or 0)):
        parts = ["edge", edge.src, "->", edge.dst]
        if edge.triggers:
            parts.append("on")
            parts.append(",".join(edge.triggers))
        if edge.priority is not None:
            parts.append(f"priority {edge.priority}")
        out.write("  " + " ".join(parts) + "\n")
    if automaton.initial is not None:
        out.write(f"  initial {automaton.initial}\n")
    out.write("}\n")
    return out.getvalue()


def structural_equal(a: Automaton, b: Automaton) -> bool:
    """Equality up to formatting and edge declaration order (generated edge
    ids are ignored)."""

    def state_key(node: StateNode):
        display = node.display if not node.is_user else None  # users produce no output
        return (node.kind, node.is_final, display, tuple(sorted((d.archive, d.mode) for d in node.attachments)))

    def config_key(automaton: Automaton, node: StateNode):
        config = automaton.backend_defs.get(node.backend_ref) if node.backend_ref else None
        if config is None:
            return None
        return (config.kind, config.prompt, tuple(sorted((k, _freeze(v)) for k, v in config.params.items())))

    def trigger_key(defn: TriggerDef):
        return (
            defn.kind,
            defn.default_priority,
            tuple(sorted((k, _freeze(v)) for k, v in defn.params.items())),
            tuple(sorted((d.archive, d.mode) for d in defn.attachments)),
        )

    def edge_multiset(automaton: Automaton):
        return sorted((e.src, e.dst, e.triggers, e.priority or 0) for e in automaton.edges)

    if a.name != b.name or a.initial != b.initial or sorted(a.archives) != sorted(b.archives):
        return False
    if set(a.states) != set(b.states) or set(a.trigger_defs) != set(b.trigger_defs):
        return False
    for state_id, node in a.states.items():
        other = b.states[state_id]
        if state_key(node) != state_key(other) or config_key(a, node) != config_key(b, other):
            return False
    for trigger_id, defn in a.trigger_defs.items():
        if trigger_key(defn) != trigger_key(b.trigger_defs[trigger_id]):
            return False
    return edge_multiset(a) == edge_multiset(b)


def _freeze(value: object) -> object:
    if isinstance(value, list):
        return tuple(value)
    return value
