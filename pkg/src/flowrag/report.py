"""Per-class precision/recall/F1 reports, confusion matrices, and emitters.

Zero-denominator convention: precision, recall and F1 are 0. Predictions of
"unmatched" count as false negatives for the gold class; they are excluded
from the confusion matrix's class axis and tracked in a sidecar count.
"""

from __future__ import annotations

import csv
import io
import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

REPORT_FORMAT_VERSION = 1
UNMATCHED = "unmatched"
REPORT_FORMATS = ("json", "csv", "markdown", "plotdata")


@dataclass
class ClassScores:
    name: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class ClassificationReport:
    classes: tuple[str, ...]
    per_class: list[ClassScores]
    macro_avg: tuple[float, float, float]
    weighted_avg: tuple[float, float, float]
    accuracy: float
    confusion: np.ndarray  # [classes x classes], gold rows, predicted columns
    unmatched_count: int = 0
    runtime_seconds: float = 0.0

    def to_dict(self, decimals: int = 6) -> dict:
        r = lambda v: round(float(v), decimals)
        return {
            "format_version": REPORT_FORMAT_VERSION,
            "classes": list(self.classes),
            "per_class": [
                {
                    "class": s.name,
                    "precision": r(s.precision),
                    "recall": r(s.recall),
                    "f1": r(s.f1),
                    "support": s.support,
                }
                for s in self.per_class
            ],
            "macro_avg": [r(v) for v in self.macro_avg],
            "weighted_avg": [r(v) for v in self.weighted_avg],
            "accuracy": r(self.accuracy),
            "confusion": self.confusion.tolist(),
            "unmatched_count": self.unmatched_count,
            "runtime_seconds": r(self.runtime_seconds),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassificationReport":
        if d.get("format_version") != REPORT_FORMAT_VERSION:
            raise DataError(f"unsupported report format version: {d.get('format_version')}")
        return cls(
            classes=tuple(d["classes"]),
            per_class=[
                ClassScores(p["class"], p["precision"], p["recall"], p["f1"], p["support"])
                for p in d["per_class"]
            ],
            macro_avg=tuple(d["macro_avg"]),
            weighted_avg=tuple(d["weighted_avg"]),
            accuracy=d["accuracy"],
            confusion=np.asarray(d["confusion"], dtype=np.int64),
            unmatched_count=d["unmatched_count"],
            runtime_seconds=d["runtime_seconds"],
        )


def classification_report(
    preds: Sequence[str],
    golds: Sequence[str],
    classes: Sequence[str],
    runtime_seconds: float = 0.0,
) -> ClassificationReport:
    if len(preds) != len(golds):
        raise DataError(f"preds ({len(preds)}) and golds ({len(golds)}) length mismatch")
    if not golds:
        raise DataError("empty prediction set")
    classes = tuple(classes)
    index = {c: i for i, c in enumerate(classes)}
    for g in golds:
        if g not in index:
            raise DataError(f"unknown gold label: {g!r}")
    for p in preds:
        if p != UNMATCHED and p not in index:
            raise DataError(f"prediction {p!r} outside class set")

    n = len(classes)
    confusion = np.zeros((n, n), dtype=np.int64)
    unmatched = 0
    for p, g in zip(preds, golds):
        if p == UNMATCHED:
            unmatched += 1
        else:
            confusion[index[g], index[p]] += 1

    support = np.zeros(n, dtype=np.int64)
    for g in golds:
        support[index[g]] += 1

    tp = np.diag(confusion).astype(np.float64)
    pred_count = confusion.sum(axis=0).astype(np.float64)  # TP + FP per class
    per_class = []
    precisions = np.zeros(n)
    recalls = np.zeros(n)
    f1s = np.zeros(n)
    for i, cls in enumerate(classes):
        p = tp[i] / pred_count[i] if pred_count[i] > 0 else 0.0
        r = tp[i] / support[i] if support[i] > 0 else 0.0
        f = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
        precisions[i], recalls[i], f1s[i] = p, r, f
        per_class.append(ClassScores(cls, p, r, f, int(support[i])))

    total = len(golds)
    weights = support / total
    return ClassificationReport(
        classes=classes,
        per_class=per_class,
        macro_avg=(float(precisions.mean()), float(recalls.mean()), float(f1s.mean())),
        weighted_avg=(
            float(precisions @ weights),
            float(recalls @ weights),
            float(f1s @ weights),
        ),
        accuracy=float(np.trace(confusion)) / total,
        confusion=confusion,
        unmatched_count=unmatched,
        runtime_seconds=runtime_seconds,
    )


def _validate_for_emit(report: ClassificationReport) -> None:
    if not report.per_class or len(report.per_class) != len(report.classes):
        raise DataError("report requires scores for the full class set")
    if report.confusion.shape != (len(report.classes), len(report.classes)):
        raise DataError("confusion matrix does not match the class set")


def emit_report(report: ClassificationReport, format: str, path: str | Path) -> Path:
    """Write the report deterministically in one of REPORT_FORMATS."""
    if format not in REPORT_FORMATS:
        raise ValueError(f"unknown format {format!r}; expected one of {REPORT_FORMATS}")
    _validate_for_emit(report)
    path = Path(path)
    path.write_text(render_report(report, format))
    return path


def render_report(report: ClassificationReport, format: str) -> str:
    _validate_for_emit(report)
    d = report.to_dict()
    if format == "json":
        return json.dumps(d, indent=2, sort_keys=True) + "\n"
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "precision", "recall", "f1", "support"])
        for row in d["per_class"]:
            w.writerow([row["class"], row["precision"], row["recall"], row["f1"], row["support"]])
        w.writerow(["macro avg", *d["macro_avg"], sum(r["support"] for r in d["per_class"])])
        w.writerow(["weighted avg", *d["weighted_avg"], sum(r["support"] for r in d["per_class"])])
        w.writerow(["accuracy", d["accuracy"], "", "", sum(r["support"] for r in d["per_class"])])
        return buf.getvalue()
    if format == "markdown":
        lines = [
            "| Class | Precision | Recall | F1 | Support |",
            "|---|---|---|---|---|",
        ]
        for row in d["per_class"]:
            lines.append(
                f"| {row['class']} | {row['precision']:.2f} | {row['recall']:.2f} "
                f"| {row['f1']:.2f} | {row['support']} |"
            )
        total = sum(r["support"] for r in d["per_class"])
        mp, mr, mf = d["macro_avg"]
        wp, wr, wf = d["weighted_avg"]
        lines.append(f"| Macro Avg | {mp:.2f} | {mr:.2f} | {mf:.2f} | {total} |")
        lines.append(f"| Weighted Avg | {wp:.2f} | {wr:.2f} | {wf:.2f} | {total} |")
        lines.append(f"| Accuracy | {d['accuracy']:.2f} | | | {total} |")
        return "\n".join(lines) + "\n"
    # plotdata: long-format CSV feeding per-class bar charts
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", "metric", "value"])
    for row in d["per_class"]:
        for metric in ("precision", "recall", "f1"):
            w.writerow([row["class"], metric, row[metric]])
    return buf.getvalue()


@dataclass
class RuntimeRecord:
    label: str
    seconds: float = 0.0


@contextmanager
def time_block(label: str):
    """Wall-clock timer; result lands in RuntimeRecord.seconds on exit."""
    rec = RuntimeRecord(label)
    start = time.perf_counter()
    try:
        yield rec
    finally:
        rec.seconds = time.perf_counter() - start
