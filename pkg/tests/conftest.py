from __future__ import annotations

import pytest

from mfa import definitions, dsl
from mfa.core import validate


def load_definition(name: str):
    automaton = dsl.parse_file(definitions.path(name))
    report = validate(automaton)
    assert report.ok, report.errors
    return automaton


@pytest.fixture
def arps():
    return load_definition("arps")


@pytest.fixture
def trains():
    return load_definition("trains")


@pytest.fixture
def ethics():
    return load_definition("ethics")


@pytest.fixture
def nvc():
    return load_definition("nvc")
