from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np
import pytest

from flowrag.ingest import FlowRecord
from flowrag.labels import SEEN_CLASSES, UNSEEN_CLASSES
from flowrag.schema import LABEL_COLUMN, canonical_schema

ALL_CLASSES = SEEN_CLASSES + UNSEEN_CLASSES


@pytest.fixture
def schema():
    return canonical_schema()


def make_record(features, label, source="test", row=0):
    return FlowRecord(tuple(float(v) for v in features), label, source=source, row=row)


def synthetic_records(per_class: int, classes=ALL_CLASSES, seed=0, dim=23, spread=0.05):
    """Class-separated Gaussian records over the canonical feature count."""
    rng = np.random.default_rng(seed)
    records = []
    row = 0
    for ci, cls in enumerate(classes):
        center = rng.normal(size=dim) * 3.0 + ci
        for _ in range(per_class):
            feats = center + rng.normal(scale=spread, size=dim)
            records.append(FlowRecord(tuple(feats.tolist()), cls, source="synthetic", row=row))
            row += 1
    return records


def records_to_csv_bytes(records, schema) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([*schema.names, LABEL_COLUMN])
    for rec in records:
        writer.writerow([repr(v) for v in rec.features] + [rec.label])
    return buf.getvalue().encode("utf-8")


def write_synthetic_csv(path: Path, per_class: int, classes=ALL_CLASSES, seed=0) -> Path:
    records = synthetic_records(per_class, classes=classes, seed=seed)
    path.write_bytes(records_to_csv_bytes(records, canonical_schema()))
    return path
