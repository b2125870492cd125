"""Correlation-based feature pruning, standardization, and numeric formatting.

Both the Pearson matrix and the standardizer use the population standard
deviation so the two stay internally consistent.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DataError

STATS_FORMAT_VERSION = 1


def to_matrix(records: Iterable) -> np.ndarray:
    """Stack FlowRecord features (or plain rows) into a float64 matrix."""
    rows = [r.features if hasattr(r, "features") else r for r in records]
    return np.asarray(rows, dtype=np.float64)


def pearson_matrix(data) -> np.ndarray:
    """Pairwise Pearson correlations over feature columns.

    Constant features correlate 0 with everything else and 1 with themselves.
    """
    X = to_matrix(data) if not isinstance(data, np.ndarray) else np.asarray(data, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("pearson_matrix requires at least 2 records")
    n, d = X.shape
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / n
    std = np.sqrt(np.diag(cov))
    denom = np.outer(std, std)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(denom > 0, cov / np.where(denom > 0, denom, 1.0), 0.0)
    np.fill_diagonal(corr, 1.0)
    return np.clip(corr, -1.0, 1.0)


def prune_correlated(
    matrix: np.ndarray, names: Sequence[str], threshold: float = 0.98
) -> tuple[str, ...]:
    """Drop the later-ordered member of every pair with |r| above threshold.

    Greedy scan in schema order; the surviving set has pairwise |r| <= threshold.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] != len(names):
        raise ValueError("matrix must be square and match names")
    kept = [True] * len(names)
    for i in range(len(names)):
        if not kept[i]:
            continue
        for j in range(i + 1, len(names)):
            if kept[j] and abs(matrix[i, j]) > threshold:
                kept[j] = False
    return tuple(n for n, k in zip(names, kept) if k)


class Standardizer(BaseEstimator, TransformerMixin):
    """Zero-mean / unit-variance transform fitted on training records only.

    Population std; constant features (std == 0) map to 0.
    """

    def __init__(self):
        self.mean_: np.ndarray | None = None
        self.std_: np.ndarray | None = None

    def fit(self, X, y=None):
        X = to_matrix(X) if not isinstance(X, np.ndarray) else np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise DataError("standardizer must be fitted on a non-empty 2D training set")
        self.mean_ = X.mean(axis=0)
        self.std_ = X.std(axis=0)  # population std (ddof=0)
        return self

    def transform(self, X) -> np.ndarray:
        if self.mean_ is None or self.std_ is None:
            raise DataError("standardizer is not fitted")
        X = to_matrix(X) if not isinstance(X, np.ndarray) else np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.shape[1] != self.mean_.shape[0]:
            raise DataError(
                f"dimension mismatch: got {X.shape[1]} features, fitted on {self.mean_.shape[0]}"
            )
        safe = np.where(self.std_ > 0, self.std_, 1.0)
        Z = (X - self.mean_) / safe
        Z[:, self.std_ == 0] = 0.0
        return Z[0] if single else Z

    def inverse_transform(self, Z) -> np.ndarray:
        if self.mean_ is None or self.std_ is None:
            raise DataError("standardizer is not fitted")
        Z = np.asarray(Z, dtype=np.float64)
        return Z * np.where(self.std_ > 0, self.std_, 0.0) + self.mean_

    @property
    def stats_id(self) -> str:
        """Stable identifier of the fitted statistics (for KB provenance)."""
        import hashlib

        if self.mean_ is None:
            raise DataError("standardizer is not fitted")
        h = hashlib.sha256()
        h.update(self.mean_.tobytes())
        h.update(self.std_.tobytes())
        return h.hexdigest()[:16]

    def to_dict(self) -> dict:
        if self.mean_ is None or self.std_ is None:
            raise DataError("standardizer is not fitted")
        return {
            "format_version": STATS_FORMAT_VERSION,
            "mean": self.mean_.tolist(),
            "std": self.std_.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        if d.get("format_version") != STATS_FORMAT_VERSION:
            raise ValueError(f"unsupported stats format version: {d.get('format_version')}")
        s = cls()
        s.mean_ = np.asarray(d["mean"], dtype=np.float64)
        s.std_ = np.asarray(d["std"], dtype=np.float64)
        return s

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Standardizer":
        return cls.from_dict(json.loads(Path(path).read_text()))


def format_value(x: float) -> str:
    """Render a feature value as prompt text.

    Round-half-even at six decimals, trailing zeros trimmed, at least one
    fractional digit kept ("20.0", "41913.7", "0.123457").
    """
    if not math.isfinite(x):
        raise ValueError(f"non-finite value: {x!r}")
    text = f"{x:.6f}".rstrip("0")
    if text.endswith("."):
        text += "0"
    if text == "-0.0":
        text = "0.0"
    return text
