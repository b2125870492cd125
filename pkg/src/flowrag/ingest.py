"""CSV parsing, label standardization and deterministic balanced splits."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable

from .errors import DataError
from .labels import DEFAULT_LABEL_MAP, UNKNOWN_LABEL, LabelMap, standardize_label
from .schema import LABEL_COLUMN, FeatureSchema

MANIFEST_FORMAT_VERSION = 1


@dataclass(frozen=True)
class FlowRecord:
    """One network flow: schema-ordered numeric features plus canonical label.

    Identity is (source, row): the dataset carries no native record ids.
    """

    features: tuple[float, ...]
    label: str
    source: str = ""
    row: int = -1

    @property
    def identity(self) -> tuple[str, int]:
        return (self.source, self.row)


@dataclass(frozen=True)
class SplitSpec:
    """Per-class sampling counts and fractions for both experiments."""

    per_class_dev: int = 500
    dev_train_fraction: float = 0.80
    per_class_test: int = 100
    rag_per_class: int = 1000
    rag_kb_fraction: float = 0.70
    seed: int = 0

    def __post_init__(self):
        for name in ("per_class_dev", "per_class_test", "rag_per_class"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("dev_train_fraction", "rag_kb_fraction"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")


@dataclass
class SplitSet:
    """Disjoint, class-balanced record collections for both experiments."""

    train: list[FlowRecord] = field(default_factory=list)
    val: list[FlowRecord] = field(default_factory=list)
    test: list[FlowRecord] = field(default_factory=list)
    rag_kb: list[FlowRecord] = field(default_factory=list)
    rag_test: list[FlowRecord] = field(default_factory=list)
    seed: int = 0

    def as_dict(self) -> dict[str, list[FlowRecord]]:
        return {
            "train": self.train,
            "val": self.val,
            "test": self.test,
            "rag_kb": self.rag_kb,
            "rag_test": self.rag_test,
        }


def parse_flow_csv(
    source: BinaryIO | bytes | str | Path,
    schema: FeatureSchema,
    label_map: LabelMap = DEFAULT_LABEL_MAP,
    source_name: str | None = None,
) -> list[FlowRecord]:
    """Parse a flow CSV into schema-ordered FlowRecords.

    Features are reordered to schema order regardless of column order in the
    file. Raw labels run through standardize_label; out-of-registry labels
    become "unknown". Non-numeric or non-finite feature cells are rejected.
    """
    if isinstance(source, (str, Path)):
        name = source_name or str(source)
        stream = open(source, "rb")
        close = True
    elif isinstance(source, bytes):
        name = source_name or "<bytes>"
        stream = io.BytesIO(source)
        close = True
    else:
        name = source_name or getattr(source, "name", "<stream>")
        stream = source
        close = False

    try:
        text = io.TextIOWrapper(stream, encoding="utf-8", newline="")
        reader = csv.reader(text)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{name}: empty file (no header row)") from None
        header = [h.strip() for h in header]
        col_index: dict[str, int] = {}
        for col in (*schema.names, LABEL_COLUMN):
            if col not in header:
                raise DataError(f"{name}: missing required column: {col}")
            col_index[col] = header.index(col)

        records: list[FlowRecord] = []
        for row_idx, row in enumerate(reader):
            if not row or all(not c.strip() for c in row):
                continue
            values = []
            for col in schema.names:
                cell = row[col_index[col]].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{name}: row {row_idx}: non-numeric feature {col!r}: {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DataError(f"{name}: row {row_idx}: non-finite feature {col!r}: {cell!r}")
                values.append(v)
            label = standardize_label(row[col_index[LABEL_COLUMN]], label_map)
            records.append(FlowRecord(tuple(values), label, source=name, row=row_idx))
        return records
    finally:
        if close:
            stream.close()


def serialize_flow_csv(records: Iterable[FlowRecord], schema: FeatureSchema) -> bytes:
    """Inverse of parse_flow_csv (up to float repr); used for round-trip checks."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([*schema.names, LABEL_COLUMN])
    for rec in records:
        writer.writerow([repr(v) for v in rec.features] + [rec.label])
    return buf.getvalue().encode("utf-8")


def _class_seed(seed: int, class_name: str) -> int:
    digest = hashlib.sha256(class_name.encode("utf-8")).digest()
    return seed ^ int.from_bytes(digest[:8], "little")


def seeded_shuffle(n: int, seed: int) -> list[int]:
    """Fisher-Yates permutation of range(n) driven by random.Random(seed)."""
    idx = list(range(n))
    rng = random.Random(seed)
    for i in range(n - 1, 0, -1):
        j = rng.randint(0, i)
        idx[i], idx[j] = idx[j], idx[i]
    return idx


def make_splits(
    records: list[FlowRecord],
    spec: SplitSpec,
    label_map: LabelMap = DEFAULT_LABEL_MAP,
) -> SplitSet:
    """Build class-balanced, deterministic splits.

    Per class, records are shuffled with a Fisher-Yates seeded by
    spec.seed XOR sha256(class name), then prefix-taken. Seen classes fill
    dev (train/val) and test; unseen classes fill rag_kb and rag_test.
    Records with labels outside the registry are ignored.
    """
    by_class: dict[str, list[FlowRecord]] = {}
    for rec in records:
        if rec.label == UNKNOWN_LABEL:
            continue
        by_class.setdefault(rec.label, []).append(rec)

    out = SplitSet(seed=spec.seed)
    n_train = int(round(spec.per_class_dev * spec.dev_train_fraction))
    n_kb = int(round(spec.rag_per_class * spec.rag_kb_fraction))

    for cls in label_map.seen_classes:
        pool = by_class.get(cls, [])
        need = spec.per_class_dev + spec.per_class_test
        if len(pool) < need:
            raise DataError(f"class {cls!r}: {len(pool)} records, need {need}")
        order = seeded_shuffle(len(pool), _class_seed(spec.seed, cls))
        taken = [pool[i] for i in order[:need]]
        dev, test = taken[: spec.per_class_dev], taken[spec.per_class_dev :]
        out.train.extend(dev[:n_train])
        out.val.extend(dev[n_train:])
        out.test.extend(test)

    for cls in label_map.unseen_classes:
        pool = by_class.get(cls, [])
        if len(pool) < spec.rag_per_class:
            raise DataError(f"class {cls!r}: {len(pool)} records, need {spec.rag_per_class}")
        order = seeded_shuffle(len(pool), _class_seed(spec.seed, cls))
        taken = [pool[i] for i in order[: spec.rag_per_class]]
        out.rag_kb.extend(taken[:n_kb])
        out.rag_test.extend(taken[n_kb:])

    return out


def split_manifest(splits: SplitSet) -> dict:
    """JSON-ready manifest of (source, row) identities per split."""
    return {
        "format_version": MANIFEST_FORMAT_VERSION,
        "seed": splits.seed,
        "splits": {
            name: [[r.source, r.row] for r in recs] for name, recs in splits.as_dict().items()
        },
    }


def save_manifest(splits: SplitSet, path: str | Path, extra: dict | None = None) -> None:
    doc = split_manifest(splits)
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def apply_manifest(records: list[FlowRecord], manifest: dict) -> SplitSet:
    """Replay a saved manifest over a re-parsed record list."""
    if manifest.get("format_version") != MANIFEST_FORMAT_VERSION:
        raise DataError(f"unsupported manifest version: {manifest.get('format_version')}")
    by_identity = {r.identity: r for r in records}
    out = SplitSet(seed=manifest["seed"])
    for name, ids in manifest["splits"].items():
        bucket = getattr(out, name)
        for src, row in ids:
            try:
                bucket.append(by_identity[(src, row)])
            except KeyError:
                raise DataError(f"manifest references missing record ({src}, {row})") from None
    return out
