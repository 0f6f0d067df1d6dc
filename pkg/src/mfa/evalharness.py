"""Trigger evaluation harness: labeled datasets, distractor augmentation,
accuracy/latency measurement and report rendering.

Datasets arrive pre-labeled (human validation happens out of process; the
``source`` field records provenance). Augmentation mixes in unrelated
label-0 sentences at a requested percentage of the final dataset, sampling
and shuffling with an explicit seed for reproducibility.
"""

from __future__ import annotations

import csv
import json
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

from mfa.errors import (
    BadLabelError,
    DatasetIoError,
    EmptyDatasetError,
    InsufficientDistractorsError,
    MfaError,
)

PASS_THRESHOLD = 75.0  # percent of good inferences considered deployable

CURATED = "curated"
DISTRACTOR = "distractor"


@dataclass(frozen=True)
class LabeledSentence:
    text: str
    label: int
    source: str = CURATED


@dataclass(frozen=True)
class SentenceResult:
    text: str
    expected: int
    got: int | None  # None when the trigger errored; scored as incorrect
    latency: float


@dataclass
class EvalReport:
    """Accuracy and latency of one trigger over one dataset."""

    trigger_id: str
    dataset_size: int
    distractor_pct: float
    accuracy: float  # percent of matching assignments
    avg_latency: float  # mean seconds per fire call
    per_sentence: list[SentenceResult] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    threshold: float = PASS_THRESHOLD

    @property
    def meets_threshold(self) -> bool:
        return self.accuracy >= self.threshold

    def to_dict(self) -> dict:
        return {
            "trigger_id": self.trigger_id,
            "dataset_size": self.dataset_size,
            "distractor_pct": self.distractor_pct,
            "accuracy": self.accuracy,
            "avg_latency": self.avg_latency,
            "meets_threshold": self.meets_threshold,
            "threshold": self.threshold,
            "warnings": self.warnings,
            "per_sentence": [
                {"text": r.text, "expected": r.expected, "got": r.got, "latency": r.latency}
                for r in self.per_sentence
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)


def load_dataset(path: str | Path) -> list[LabeledSentence]:
    """Read a ``text,label`` CSV; labels must be exactly 0 or 1."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            rows = list(reader)
    except OSError as exc:
        raise DatasetIoError(f"cannot read dataset {path}: {exc}")
    sentences = []
    for index, row in enumerate(rows, start=2):
        text = (row.get("text") or "").strip()
        raw_label = (row.get("label") or "").strip()
        if not text:
            continue
        if raw_label not in ("0", "1"):
            raise BadLabelError(f"{path}:{index}: label must be 0 or 1, got {raw_label!r}")
        sentences.append(LabeledSentence(text=text, label=int(raw_label)))
    return sentences


def load_distractors(path: str | Path) -> list[str]:
    """Read distractor sentences from a CSV with a ``text`` column."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            return [(row.get("text") or "").strip() for row in reader if (row.get("text") or "").strip()]
    except OSError as exc:
        raise DatasetIoError(f"cannot read distractors {path}: {exc}")


def augment(
    dataset: Sequence[LabeledSentence],
    distractors: Sequence[str],
    pct: float,
    seed: int = 0,
) -> list[LabeledSentence]:
    """Mix label-0 distractors into the dataset so they make up ``pct`` percent
    of the result (rounded to nearest), sampling without replacement and
    shuffling with the seed. ``pct=0`` keeps the content unchanged.
    """
    if not 0 <= pct < 100:
        raise ValueError(f"pct must be in [0, 100), got {pct}")
    curated = list(dataset)
    count = round(len(curated) * pct / (100 - pct))
    if count > len(distractors):
        raise InsufficientDistractorsError(
            f"need {count} distractors for {pct}% of the final dataset, have {len(distractors)}"
        )
    rng = random.Random(seed)
    sampled = rng.sample(list(distractors), count)
    result = curated + [LabeledSentence(text=t, label=0, source=DISTRACTOR) for t in sampled]
    rng.shuffle(result)
    return result


def evaluate(
    trigger: Any,
    dataset: Sequence[LabeledSentence],
    *,
    state: str = "eval",
    workers: int = 1,
    threshold: float = PASS_THRESHOLD,
) -> EvalReport:
    """Fire the trigger on every sentence, timing each call.

    Backend failures count as wrong answers (recorded as warnings) so flaky
    triggers cannot gain accuracy by erroring. Results merge in dataset
    order even when fanned out across workers.
    """
    if not dataset:
        raise EmptyDatasetError("cannot evaluate on an empty dataset")

    warnings: list[str] = []

    def run_one(sentence: LabeledSentence) -> SentenceResult:
        started = time.perf_counter()
        got: int | None
        try:
            got = trigger.fire(state, sentence.text)
        except MfaError as exc:
            got = None
            warnings.append(f"{exc.code} on {sentence.text[:40]!r}: {exc}")
        latency = time.perf_counter() - started
        return SentenceResult(text=sentence.text, expected=sentence.label, got=got, latency=latency)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, dataset))
    else:
        results = [run_one(s) for s in dataset]

    correct = sum(1 for r in results if r.got == r.expected)
    distractor_count = sum(1 for s in dataset if s.source == DISTRACTOR)
    trigger_id = getattr(trigger, "id", trigger.__class__.__name__)
    return EvalReport(
        trigger_id=trigger_id,
        dataset_size=len(dataset),
        distractor_pct=100.0 * distractor_count / len(dataset),
        accuracy=100.0 * correct / len(dataset),
        avg_latency=sum(r.latency for r in results) / len(results),
        per_sentence=results,
        warnings=warnings,
        threshold=threshold,
    )


GRID_COLUMNS = ("Trigger", "% of random sentences", "Nb. of sentences", "% good eval.", "Avg. time (s)")


def render_grid(reports: Sequence[EvalReport]) -> str:
    """Render reports as a fixed-column text grid (latency to 0.01 s)."""
    rows = [GRID_COLUMNS]
    for report in reports:
        rows.append(
            (
                report.trigger_id,
                f"{report.distractor_pct:.0f}%",
                str(report.dataset_size),
                f"{report.accuracy:.2f}%",
                f"{report.avg_latency:.2f}",
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(GRID_COLUMNS))]
    lines = []
    for index, row in enumerate(rows):
        lines.append(" | ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if index == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def oracle_trigger(dataset: Sequence[LabeledSentence], trigger_id: str = "oracle") -> Any:
    """Perfect classifier that replays the stored labels (reference baseline)."""
    table = {s.text: s.label for s in dataset}

    class _Oracle:
        id = trigger_id

        def fire(self, state: str, message: str) -> int:
            return table[message]

    return _Oracle()


def constant_trigger(bit: int, trigger_id: str = "constant") -> Any:
    """Trigger that always answers ``bit`` (degenerate baseline)."""

    class _Constant:
        id = trigger_id

        def fire(self, state: str, message: str) -> int:
            return bit

    return _Constant()


FireFn = Callable[[str, str], int]
