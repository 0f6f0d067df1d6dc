"""Engine-wide exception hierarchy.

Every error carries a stable ``code`` string so callers (CLI, HTTP service,
tests) can match on the code instead of the message text.
"""

from __future__ import annotations


class MfaError(Exception):
    """Base class for all engine errors."""

    code = "MFA_ERROR"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


# --- automaton / validation ---

class UnvalidatedError(MfaError):
    """Operation requires a successfully validated automaton."""

    code = "UNVALIDATED"


class BadPriorityError(MfaError):
    """Priority outside the legal range (0 is reserved for non-candidates)."""

    code = "BAD_PRIORITY"


# --- history / archives ---

class MultiAttachError(MfaError):
    """Owner is already attached to an archive (at most one attachment each)."""

    code = "MULTI_ATTACH"


class TriggerWriteError(MfaError):
    """Triggers may only read histories, never write them."""

    code = "TRIGGER_WRITE"


class ReadOnlyError(MfaError):
    """Write attempted through a read-only attachment."""

    code = "READ_ONLY"


class WriteOnlyError(MfaError):
    """Read attempted through a write-only attachment."""

    code = "WRITE_ONLY"


class PairNotFoundError(MfaError):
    """No archived pair with the requested sequence number."""

    code = "NOT_FOUND"


# --- backends ---

class ScriptExhaustedError(MfaError):
    """A scripted backend ran out of lines."""

    code = "SCRIPT_EXHAUSTED"


class HttpBackendError(MfaError):
    """HTTP chat call failed (status, timeout or transport error)."""

    code = "HTTP_ERROR"


class EmptyCompletionError(MfaError):
    """A backend produced an empty string; state outputs must be non-empty."""

    code = "EMPTY_COMPLETION"


class SinkIoError(MfaError):
    """Writer backend could not append to its sink file."""

    code = "SINK_IO"


# --- triggers ---

class ClassifierParseError(MfaError):
    """Classifier completion could not be parsed to a 0/1 answer."""

    code = "CLASSIFIER_PARSE"


# --- runner / sessions ---

class NotFinalError(MfaError):
    """Normal session end requested while the current state is not final."""

    code = "NOT_FINAL"


class ScriptUnderrunError(MfaError):
    """Scripted run needs user input beyond the supplied script."""

    code = "SCRIPT_UNDERRUN"


class InputRequiredError(MfaError):
    """step() called without input while the session awaits the user."""

    code = "INPUT_REQUIRED"


class InputNotExpectedError(MfaError):
    """step() called with input while machine turns are pending."""

    code = "INPUT_NOT_EXPECTED"


class SessionOverError(MfaError):
    """step() called on a session that already ended."""

    code = "SESSION_OVER"


# --- eval harness ---

class BadLabelError(MfaError):
    """Dataset label is not 0 or 1."""

    code = "BAD_LABEL"


class DatasetIoError(MfaError):
    """Dataset file missing or unreadable."""

    code = "IO"


class EmptyDatasetError(MfaError):
    """Evaluation requires a non-empty dataset."""

    code = "EMPTY_DATASET"


class InsufficientDistractorsError(MfaError):
    """Not enough distractor sentences to reach the requested percentage."""

    code = "INSUFFICIENT_DISTRACTORS"
