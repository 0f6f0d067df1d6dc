from __future__ import annotations

import json

import pytest

from mfa import definitions
from mfa.errors import (
    BadLabelError,
    DatasetIoError,
    EmptyDatasetError,
    InsufficientDistractorsError,
)
from mfa.evalharness import (
    CURATED,
    DISTRACTOR,
    GRID_COLUMNS,
    EvalReport,
    LabeledSentence,
    augment,
    constant_trigger,
    evaluate,
    load_dataset,
    load_distractors,
    oracle_trigger,
    render_grid,
)
from mfa.triggers import KeywordTrigger


@pytest.fixture(scope="module")
def anger_dataset():
    return load_dataset(definitions.dataset_path("anger"))


@pytest.fixture(scope="module")
def distractor_pool():
    return load_distractors(definitions.dataset_path("distractors"))


# --- loading ---


def test_shipped_dataset_loads_100_sentences(anger_dataset):
    assert len(anger_dataset) == 100
    assert all(s.label in (0, 1) for s in anger_dataset)
    assert all(s.source == CURATED for s in anger_dataset)
    assert sum(s.label for s in anger_dataset) == 40


def test_bad_label_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("text,label\nhello,2\n")
    with pytest.raises(BadLabelError):
        load_dataset(path)


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(DatasetIoError):
        load_dataset(tmp_path / "nope.csv")


def test_empty_file_loads_empty_then_evaluate_fails(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("text,label\n")
    dataset = load_dataset(path)
    assert dataset == []
    with pytest.raises(EmptyDatasetError):
        evaluate(constant_trigger(0), dataset)


# --- augmentation ---


def test_augment_zero_pct_is_identity_on_content(anger_dataset, distractor_pool):
    result = augment(anger_dataset, distractor_pool, 0, seed=4)
    assert sorted(s.text for s in result) == sorted(s.text for s in anger_dataset)
    assert len(result) == 100


def test_augment_thirty_pct_of_seventy_curated(anger_dataset, distractor_pool):
    result = augment(anger_dataset[:70], distractor_pool, 30, seed=4)
    assert len(result) == 100
    assert sum(1 for s in result if s.source == DISTRACTOR) == 30
    assert all(s.label == 0 for s in result if s.source == DISTRACTOR)


@pytest.mark.parametrize(
    "curated,pct,expected_distractors",
    [(100, 0, 0), (100, 30, 43), (100, 60, 150), (70, 30, 30), (40, 60, 60)],
)
def test_augment_share_arithmetic(curated, pct, expected_distractors, distractor_pool):
    dataset = [LabeledSentence(f"s{i}", 1) for i in range(curated)]
    result = augment(dataset, distractor_pool, pct, seed=0)
    injected = sum(1 for s in result if s.source == DISTRACTOR)
    assert injected == expected_distractors
    assert len(result) == curated + expected_distractors
    if pct:
        assert round(100 * injected / len(result)) == pct


def test_augment_requires_enough_distractors():
    dataset = [LabeledSentence(f"s{i}", 1) for i in range(70)]
    with pytest.raises(InsufficientDistractorsError):
        augment(dataset, ["a", "b", "c", "d", "e"], 30, seed=0)


def test_augment_reproducible_and_sampled_without_replacement(anger_dataset, distractor_pool):
    one = augment(anger_dataset, distractor_pool, 30, seed=11)
    two = augment(anger_dataset, distractor_pool, 30, seed=11)
    assert [s.text for s in one] == [s.text for s in two]
    injected = [s.text for s in one if s.source == DISTRACTOR]
    assert len(injected) == len(set(injected))
    three = augment(anger_dataset, distractor_pool, 30, seed=12)
    assert [s.text for s in one] != [s.text for s in three]


# --- evaluation ---


def test_oracle_trigger_scores_100(anger_dataset):
    report = evaluate(oracle_trigger(anger_dataset), anger_dataset)
    assert report.accuracy == 100.0
    assert report.meets_threshold


def test_ten_error_trigger_scores_90(anger_dataset):
    oracle = {s.text: s.label for s in anger_dataset}
    wrong = {s.text for s in anger_dataset[:10]}

    class TenErrors:
        id = "ten-errors"

        def fire(self, state, message):
            bit = oracle[message]
            return 1 - bit if message in wrong else bit

    report = evaluate(TenErrors(), anger_dataset)
    assert report.accuracy == pytest.approx(90.0)
    assert f"{report.accuracy:.2f}%" == "90.00%"


def test_constant_zero_scores_share_of_negatives(anger_dataset):
    report = evaluate(constant_trigger(0), anger_dataset)
    assert report.accuracy == pytest.approx(60.0)  # 40 positives of 100
    assert not report.meets_threshold


def test_trigger_and_negation_accuracies_sum_to_100(anger_dataset):
    keyword = KeywordTrigger("t0", ["outrageous", "unacceptable", "angry", "furious", "terrible", "awful"])

    class Negation:
        id = "not-t0"

        def fire(self, state, message):
            return 1 - keyword.fire(state, message)

    a = evaluate(keyword, anger_dataset).accuracy
    b = evaluate(Negation(), anger_dataset).accuracy
    assert a + b == pytest.approx(100.0)


def test_backend_errors_count_as_wrong(anger_dataset):
    from mfa.errors import HttpBackendError

    class Flaky:
        id = "flaky"

        def fire(self, state, message):
            raise HttpBackendError("down")

    report = evaluate(Flaky(), anger_dataset[:10])
    assert report.accuracy == 0.0
    assert len(report.warnings) == 10
    assert all(r.got is None for r in report.per_sentence)


def test_evaluate_parallel_merges_in_dataset_order(anger_dataset):
    sequential = evaluate(oracle_trigger(anger_dataset), anger_dataset)
    parallel = evaluate(oracle_trigger(anger_dataset), anger_dataset, workers=4)
    assert [r.text for r in parallel.per_sentence] == [r.text for r in sequential.per_sentence]
    assert parallel.accuracy == sequential.accuracy


def test_latency_measured_per_call(anger_dataset):
    report = evaluate(oracle_trigger(anger_dataset), anger_dataset[:5])
    assert report.avg_latency >= 0
    assert all(r.latency >= 0 for r in report.per_sentence)


# --- reporting ---


def test_grid_layout_columns(anger_dataset):
    report = evaluate(constant_trigger(0, "t0"), anger_dataset)
    grid = render_grid([report])
    header = grid.splitlines()[0]
    for column in GRID_COLUMNS:
        assert column in header
    row = grid.splitlines()[2]
    assert "t0" in row and "60.00%" in row and "0%" in row and "100" in row


def test_report_json_shape(anger_dataset):
    report = evaluate(oracle_trigger(anger_dataset), anger_dataset[:3])
    data = json.loads(report.to_json())
    assert data["dataset_size"] == 3
    assert data["accuracy"] == 100.0
    assert data["meets_threshold"] is True
    assert len(data["per_sentence"]) == 3


def test_threshold_flag_is_a_flag_not_a_gate(anger_dataset):
    report = evaluate(constant_trigger(1), anger_dataset)
    assert isinstance(report, EvalReport)  # low accuracy still yields a report
    assert report.accuracy == pytest.approx(40.0)
    assert not report.meets_threshold
