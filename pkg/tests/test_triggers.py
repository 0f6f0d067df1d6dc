from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from test_backends import StubResponse, StubSession

from mfa.backends import ChatClient
from mfa.errors import BadPriorityError, ClassifierParseError
from mfa.history import AccessMode, HistoryHub
from mfa.triggers import (
    AlwaysTrigger,
    KeywordTrigger,
    LlmClassifierTrigger,
    PatternTrigger,
    TriggerDef,
    TriggerKind,
    build_trigger,
    get_priority,
    parse_classifier_output,
    set_priority,
)

ANGER_MESSAGE = "It's outrageous to take half an hour to serve a sandwich!"


def test_always_fires_on_any_message():
    trigger = AlwaysTrigger("t1")
    assert trigger.fire("q0", "") == 1
    assert trigger.fire("q0", "anything at all") == 1


def test_keyword_detects_complaint_and_ignores_greeting():
    trigger = KeywordTrigger("t0", ["outrageous", "unacceptable"])
    assert trigger.fire("q0", ANGER_MESSAGE) == 1
    assert trigger.fire("q0", "hello") == 0


def test_keyword_matches_whole_words_case_insensitively():
    trigger = KeywordTrigger("t", ["rage"])
    assert trigger.fire("q", "RAGE!") == 1
    assert trigger.fire("q", "outrageous") == 0  # substring only, no word boundary
    sensitive = KeywordTrigger("t", ["Rage"], case_sensitive=True)
    assert sensitive.fire("q", "rage") == 0
    assert sensitive.fire("q", "Rage") == 1


def test_pattern_trigger_searches_anywhere():
    trigger = PatternTrigger("t", r"\b\d{2}:\d{2}\b")
    assert trigger.fire("q", "departure at 09:30 sharp") == 1
    assert trigger.fire("q", "departure at nine") == 0


@given(st.text(max_size=60))
def test_fire_is_binary_and_pure(message):
    triggers = [
        AlwaysTrigger("a"),
        KeywordTrigger("k", ["alpha", "beta"]),
        PatternTrigger("p", r"[0-9]+"),
    ]
    for trigger in triggers:
        first = trigger.fire("s", message)
        assert first in (0, 1)
        assert trigger.fire("s", message) == first


# --- priorities ---


def test_priority_defaults_and_updates():
    defn = TriggerDef(id="t0", kind=TriggerKind.ALWAYS)
    assert get_priority(defn) == 1
    set_priority(defn, 2)
    assert get_priority(defn) == 2


def test_priority_zero_is_reserved():
    defn = TriggerDef(id="t0", kind=TriggerKind.ALWAYS)
    with pytest.raises(BadPriorityError):
        set_priority(defn, 0)


# --- classifier output parsing ---


@pytest.mark.parametrize(
    "completion,expected",
    [(" 1\n", 1), ("0", 0), ("No", 0), ("YES", 1), ("yes, clearly", 1), ("0 - not angry", 0)],
)
def test_parse_classifier_output_accepts_bits_and_words(completion, expected):
    assert parse_classifier_output(completion) == expected


@pytest.mark.parametrize("completion", ["maybe", "", "10", "noon", "yesterday", "2"])
def test_parse_classifier_output_rejects_out_of_vocabulary(completion):
    with pytest.raises(ClassifierParseError):
        parse_classifier_output(completion)


# --- llm classifier ---


def classifier(responses, attachment=None):
    session = StubSession(responses)
    client = ChatClient("http://api.test/c", "clf-model", temperature=0.1, session=session)
    trigger = LlmClassifierTrigger("t0", client, "Answer 1 if angry else 0.", attachment=attachment)
    return trigger, session


def test_llm_classifier_parses_bit():
    trigger, session = classifier([StubResponse(content="1")])
    assert trigger.fire("q0", ANGER_MESSAGE) == 1
    sent = session.requests[0]["json"]
    assert sent["messages"][0]["role"] == "system"
    assert sent["messages"][-1]["content"] == ANGER_MESSAGE


def test_llm_classifier_includes_readable_history():
    hub = HistoryHub()
    hub.create_archive("h")
    writer = hub.attach("l1", "h", AccessMode.READ_WRITE)
    writer.archive.append("hi", "hello there", origin="l1")
    reader = hub.attach("t0", "h", AccessMode.READ, trigger=True)
    trigger, session = classifier([StubResponse(content="no")], attachment=reader)
    assert trigger.fire("q0", "fine") == 0
    roles = [m["role"] for m in session.requests[0]["json"]["messages"]]
    assert roles == ["system", "user", "assistant", "user"]


def test_llm_classifier_unparseable_raises():
    trigger, _ = classifier([StubResponse(content="it depends")])
    with pytest.raises(ClassifierParseError):
        trigger.fire("q0", "x")


# --- build_trigger ---


def test_build_trigger_constructs_each_kind():
    assert isinstance(build_trigger(TriggerDef(id="a", kind=TriggerKind.ALWAYS)), AlwaysTrigger)
    keyword = build_trigger(TriggerDef(id="k", kind=TriggerKind.KEYWORD, params={"keywords": ["x"]}))
    assert isinstance(keyword, KeywordTrigger)
    pattern = build_trigger(TriggerDef(id="p", kind=TriggerKind.PATTERN, params={"pattern": "x"}))
    assert isinstance(pattern, PatternTrigger)
    llm = build_trigger(
        TriggerDef(id="l", kind=TriggerKind.LLM, params={"endpoint": "http://e", "model": "m", "prompt": "p"})
    )
    assert isinstance(llm, LlmClassifierTrigger)
    assert llm.client.temperature == 0.1  # classifier default
