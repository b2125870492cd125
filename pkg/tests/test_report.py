from __future__ import annotations

import csv
import io
import time

import numpy as np
import pytest

from flowrag.errors import DataError
from flowrag.report import (
    ClassificationReport,
    classification_report,
    render_report,
    time_block,
)


def counting_oracle(preds, golds, classes):
    """Naive per-class counting, independent of the implementation."""
    out = {}
    for c in classes:
        tp = sum(1 for p, g in zip(preds, golds) if p == c and g == c)
        fp = sum(1 for p, g in zip(preds, golds) if p == c and g != c)
        fn = sum(1 for p, g in zip(preds, golds) if g == c and p != c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        out[c] = (precision, recall, f1, sum(1 for g in golds if g == c))
    accuracy = sum(1 for p, g in zip(preds, golds) if p == g) / len(golds)
    return out, accuracy


def random_case(rng, max_classes=10, max_items=200):
    classes = [f"c{i}" for i in range(rng.integers(2, max_classes + 1))]
    n = int(rng.integers(1, max_items + 1))
    golds = [classes[i] for i in rng.integers(0, len(classes), size=n)]
    preds = [classes[i] for i in rng.integers(0, len(classes), size=n)]
    return preds, golds, classes


def test_perfect_classifier_all_ones():
    golds = ["a", "b", "c"] * 10
    report = classification_report(golds, golds, ["a", "b", "c"])
    assert report.accuracy == 1.0
    assert all(s.precision == s.recall == s.f1 == 1.0 for s in report.per_class)
    assert report.macro_avg == (1.0, 1.0, 1.0)
    assert report.weighted_avg == (1.0, 1.0, 1.0)


def test_hand_counted_example():
    golds = ["A", "B", "B"]
    preds = ["A", "A", "B"]
    report = classification_report(preds, golds, ["A", "B"])
    a, b = report.per_class
    assert (a.precision, a.recall, a.support) == (0.5, 1.0, 1)
    assert a.f1 == pytest.approx(2 / 3)
    assert (b.precision, b.recall, b.support) == (1.0, 0.5, 2)
    assert b.f1 == pytest.approx(2 / 3)
    assert report.accuracy == pytest.approx(2 / 3)
    assert report.macro_avg[0] == pytest.approx(0.75)
    assert report.weighted_avg[0] == pytest.approx((0.5 * 1 + 1.0 * 2) / 3)
    assert report.confusion.tolist() == [[1, 0], [1, 1]]


def test_matches_counting_oracle_randomized():
    rng = np.random.default_rng(0)
    for _ in range(100):
        preds, golds, classes = random_case(rng)
        report = classification_report(preds, golds, classes)
        oracle, acc = counting_oracle(preds, golds, classes)
        assert report.accuracy == pytest.approx(acc, abs=1e-9)
        for s in report.per_class:
            p, r, f, sup = oracle[s.name]
            assert s.precision == pytest.approx(p, abs=1e-9)
            assert s.recall == pytest.approx(r, abs=1e-9)
            assert s.f1 == pytest.approx(f, abs=1e-9)
            assert s.support == sup


def test_weighted_recall_equals_accuracy_in_registry():
    rng = np.random.default_rng(1)
    for _ in range(50):
        preds, golds, classes = random_case(rng)
        report = classification_report(preds, golds, classes)
        assert report.weighted_avg[1] == pytest.approx(report.accuracy, abs=1e-12)


def test_macro_weighted_between_min_and_max():
    rng = np.random.default_rng(2)
    for _ in range(30):
        preds, golds, classes = random_case(rng)
        report = classification_report(preds, golds, classes)
        for k in range(3):
            vals = [(s.precision, s.recall, s.f1)[k] for s in report.per_class]
            assert min(vals) - 1e-12 <= report.macro_avg[k] <= max(vals) + 1e-12
            assert min(vals) - 1e-12 <= report.weighted_avg[k] <= max(vals) + 1e-12


def test_permutation_invariance():
    rng = np.random.default_rng(3)
    preds, golds, classes = random_case(rng)
    report = classification_report(preds, golds, classes)
    order = rng.permutation(len(preds))
    shuffled = classification_report(
        [preds[i] for i in order], [golds[i] for i in order], classes
    )
    assert report.to_dict() == shuffled.to_dict()


def test_unmatched_counts_as_false_negative():
    golds = ["A", "A", "B"]
    preds = ["unmatched", "A", "B"]
    report = classification_report(preds, golds, ["A", "B"])
    assert report.unmatched_count == 1
    a = report.per_class[0]
    assert a.recall == 0.5 and a.precision == 1.0 and a.support == 2
    assert report.accuracy == pytest.approx(2 / 3)
    assert report.confusion.sum() == 2  # unmatched excluded from matrix axis


def test_errors():
    with pytest.raises(DataError, match="length mismatch"):
        classification_report(["a"], ["a", "b"], ["a", "b"])
    with pytest.raises(DataError, match="unknown gold"):
        classification_report(["a"], ["z"], ["a", "b"])
    with pytest.raises(DataError, match="outside class set"):
        classification_report(["z"], ["a"], ["a", "b"])
    with pytest.raises(DataError, match="empty"):
        classification_report([], [], ["a"])


def _sample_report():
    return classification_report(["A", "A", "B"], ["A", "B", "B"], ["A", "B"], runtime_seconds=1.5)


class TestEmit:
    def test_markdown_column_order(self):
        md = render_report(_sample_report(), "markdown")
        lines = md.splitlines()
        assert lines[0] == "| Class | Precision | Recall | F1 | Support |"
        assert lines[2].startswith("| A |")
        assert any(line.startswith("| Macro Avg |") for line in lines)
        assert any(line.startswith("| Accuracy |") for line in lines)

    def test_json_csv_round_trip_at_six_places(self):
        report = _sample_report()
        import json

        doc = json.loads(render_report(report, "json"))
        rows = list(csv.DictReader(io.StringIO(render_report(report, "csv"))))
        by_class = {r["class"]: r for r in rows}
        for p in doc["per_class"]:
            row = by_class[p["class"]]
            assert float(row["precision"]) == p["precision"]
            assert float(row["recall"]) == p["recall"]
            assert float(row["f1"]) == p["f1"]
            assert int(row["support"]) == p["support"]
        assert float(by_class["accuracy"]["precision"]) == doc["accuracy"]

    def test_json_round_trip_dataclass(self):
        import json

        report = _sample_report()
        doc = json.loads(render_report(report, "json"))
        again = ClassificationReport.from_dict(doc)
        assert again.to_dict() == report.to_dict()

    def test_plotdata_long_format(self):
        rows = list(csv.reader(io.StringIO(render_report(_sample_report(), "plotdata"))))
        assert rows[0] == ["class", "metric", "value"]
        assert len(rows) == 1 + 2 * 3
        assert {r[1] for r in rows[1:]} == {"precision", "recall", "f1"}

    def test_emit_refuses_inconsistent_report(self, tmp_path):
        report = _sample_report()
        report.per_class = report.per_class[:1]
        from flowrag.report import emit_report

        with pytest.raises(DataError, match="full class set"):
            emit_report(report, "json", tmp_path / "r.json")

    def test_unknown_format(self, tmp_path):
        from flowrag.report import emit_report

        with pytest.raises(ValueError):
            emit_report(_sample_report(), "xml", tmp_path / "r.xml")


class TestTimeBlock:
    def test_zero_length_batch_nonnegative(self):
        with time_block("noop") as t:
            pass
        assert t.seconds >= 0.0

    def test_nested_outer_geq_inner(self):
        with time_block("outer") as outer:
            with time_block("inner") as inner:
                time.sleep(0.01)
        assert outer.seconds >= inner.seconds

    def test_injected_delay_measured(self):
        with time_block("sleep") as t:
            time.sleep(0.05)
        assert 0.05 <= t.seconds <= 0.25
