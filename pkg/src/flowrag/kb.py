"""Immutable knowledge base with exact cosine top-k retrieval.

Retrieval is a linear scan over standardized vectors: at KB scale (a few
thousand rows) exactness is cheap and no approximate index is warranted.
Ties are broken by ascending row index via a stable sort.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

KB_MAGIC = b"FRKB"
KB_FORMAT_VERSION = 2  # v2 adds the raw (pre-standardization) matrix


@dataclass(frozen=True)
class RetrievalHit:
    index: int
    similarity: float
    label: str


@dataclass(frozen=True)
class KnowledgeBase:
    """Standardized vectors + labels; raw rows kept for prompt rendering."""

    vectors: np.ndarray  # [n, d] standardized, float64
    labels: tuple[str, ...]
    norms: np.ndarray  # precomputed row magnitudes
    stats_id: str
    raw_vectors: np.ndarray  # [n, d] original feature values

    def __post_init__(self):
        self.vectors.setflags(write=False)
        self.norms.setflags(write=False)
        self.raw_vectors.setflags(write=False)

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def build_kb(
    vectors: np.ndarray,
    labels: Sequence[str],
    stats_id: str = "",
    raw_vectors: np.ndarray | None = None,
) -> KnowledgeBase:
    vectors = np.ascontiguousarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise DataError("KB vectors must be a 2D matrix")
    if vectors.shape[0] != len(labels):
        raise DataError("KB labels count does not match vector rows")
    raw = vectors if raw_vectors is None else np.ascontiguousarray(raw_vectors, dtype=np.float64)
    if raw.shape != vectors.shape:
        raise DataError("raw_vectors shape must match vectors")
    return KnowledgeBase(
        vectors=vectors,
        labels=tuple(labels),
        norms=np.linalg.norm(vectors, axis=1),
        stats_id=stats_id,
        raw_vectors=raw,
    )


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    """a.b / (|a||b|); 0 when either norm is 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))


def similarities(kb: KnowledgeBase, query: np.ndarray) -> np.ndarray:
    """Cosine similarity of the query against every KB row."""
    query = np.asarray(query, dtype=np.float64)
    if query.ndim != 1 or query.shape[0] != kb.dim:
        raise DataError(f"query dimension {query.shape} does not match KB dim {kb.dim}")
    qn = np.linalg.norm(query)
    if qn == 0.0:
        return np.zeros(len(kb))
    denom = kb.norms * qn
    sims = kb.vectors @ query
    return np.divide(sims, denom, out=np.zeros_like(sims), where=denom > 0)


def retrieve(kb: KnowledgeBase, query: Sequence[float], k: int = 20) -> list[RetrievalHit]:
    """Exact top-k by similarity descending, ties by ascending index."""
    if len(kb) == 0:
        raise DataError("knowledge base is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    sims = similarities(kb, np.asarray(query, dtype=np.float64))
    order = np.argsort(-sims, kind="stable")[: min(k, len(kb))]
    return [RetrievalHit(int(i), float(sims[i]), kb.labels[i]) for i in order]


def select_exemplars(hits: Sequence[RetrievalHit], m: int = 3) -> list[RetrievalHit]:
    """First m hits in rank order."""
    if m > len(hits):
        raise ValueError(f"m={m} exceeds available hits ({len(hits)})")
    return list(hits[:m])


@dataclass(frozen=True)
class RecallReport:
    """Top-m recall per class and overall, as (hits, total) pairs."""

    per_class: dict[str, tuple[int, int]]
    overall: tuple[int, int]

    @property
    def overall_fraction(self) -> float:
        h, n = self.overall
        return h / n if n else 0.0

    def formatted(self) -> dict[str, str]:
        out = {
            cls: f"{100.0 * h / n:.2f} ({h}/{n})" for cls, (h, n) in self.per_class.items()
        }
        h, n = self.overall
        out["overall"] = f"{100.0 * h / n:.2f} ({h}/{n})"
        return out

    def to_dict(self) -> dict:
        return {
            "per_class": {c: list(v) for c, v in self.per_class.items()},
            "overall": list(self.overall),
            "overall_fraction": self.overall_fraction,
        }


def top3_recall(
    kb: KnowledgeBase,
    test: Sequence[tuple[Sequence[float], str]],
    k: int = 20,
    m: int = 3,
) -> RecallReport:
    """A query is recalled if its true label appears among the top-m exemplars."""
    if not test:
        raise DataError("empty test set")
    per_class: dict[str, list[int]] = {}
    hit_total = 0
    for vec, label in test:
        exemplars = select_exemplars(retrieve(kb, vec, k=min(k, len(kb))), m=min(m, len(kb)))
        hit = int(any(e.label == label for e in exemplars))
        c = per_class.setdefault(label, [0, 0])
        c[0] += hit
        c[1] += 1
        hit_total += hit
    return RecallReport(
        per_class={c: (h, n) for c, (h, n) in sorted(per_class.items())},
        overall=(hit_total, len(test)),
    )


def save_kb(kb: KnowledgeBase, path: str | Path, manifest_extra: dict | None = None) -> None:
    """Versioned binary layout plus a JSON manifest twin for inspection."""
    path = Path(path)
    n, d = kb.vectors.shape
    with open(path, "wb") as fh:
        fh.write(KB_MAGIC)
        fh.write(struct.pack("<III", KB_FORMAT_VERSION, n, d))
        fh.write(kb.vectors.astype("<f8").tobytes(order="C"))
        fh.write(kb.raw_vectors.astype("<f8").tobytes(order="C"))
        for label in kb.labels:
            raw = label.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        sid = kb.stats_id.encode("utf-8")
        fh.write(struct.pack("<I", len(sid)))
        fh.write(sid)
    manifest = {
        "magic": KB_MAGIC.decode("ascii"),
        "format_version": KB_FORMAT_VERSION,
        "n": n,
        "dim": d,
        "stats_id": kb.stats_id,
        "classes": sorted(set(kb.labels)),
    }
    if manifest_extra:
        manifest.update(manifest_extra)
    path.with_suffix(path.suffix + ".manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n"
    )


def load_kb(path: str | Path) -> KnowledgeBase:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != KB_MAGIC:
            raise DataError(f"not a KB file (magic {magic!r})")
        version, n, d = struct.unpack("<III", fh.read(12))
        if version != KB_FORMAT_VERSION:
            raise DataError(f"unsupported KB format version {version}")
        vectors = np.frombuffer(fh.read(8 * n * d), dtype="<f8").reshape(n, d).copy()
        raw = np.frombuffer(fh.read(8 * n * d), dtype="<f8").reshape(n, d).copy()
        labels = []
        for _ in range(n):
            (length,) = struct.unpack("<I", fh.read(4))
            labels.append(fh.read(length).decode("utf-8"))
        (length,) = struct.unpack("<I", fh.read(4))
        stats_id = fh.read(length).decode("utf-8")
    return build_kb(vectors, labels, stats_id=stats_id, raw_vectors=raw)
