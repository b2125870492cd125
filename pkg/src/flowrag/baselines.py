"""From-scratch classical baselines on standardized feature vectors.

Multinomial logistic regression (full-batch gradient descent on softmax
cross-entropy with L2) and a random forest with Gini splits. Both follow the
sklearn estimator API so they compose with the wider ecosystem, but the
training algorithms are implemented here.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import DataError

MODEL_FORMAT_VERSION = 1


def _validate_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("X must be a non-empty 2D matrix")
    if X.shape[0] != y.shape[0]:
        raise DataError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise DataError("X contains non-finite values")
    return X, y


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def logreg_loss_grad(
    W: np.ndarray, b: np.ndarray, X: np.ndarray, Y: np.ndarray, l2: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean softmax cross-entropy + (l2/2)|W|^2 and its gradients.

    Y is one-hot [n x classes]. Exposed separately so gradients can be
    checked against finite differences.
    """
    n = X.shape[0]
    P = softmax(X @ W.T + b)
    loss = -np.sum(Y * np.log(np.clip(P, 1e-300, None))) / n + 0.5 * l2 * np.sum(W * W)
    diff = (P - Y) / n
    return float(loss), diff.T @ X + l2 * W, diff.sum(axis=0)


class ScratchLogisticRegression(BaseEstimator, ClassifierMixin):
    """Multinomial LR trained with full-batch gradient descent."""

    def __init__(self, lr: float = 0.1, epochs: int = 300, l2: float = 1e-4):
        self.lr = lr
        self.epochs = epochs
        self.l2 = l2

    def fit(self, X, y):
        X, y = _validate_xy(X, y)
        self.classes_ = np.array(sorted(set(map(str, y))))
        if len(self.classes_) < 2:
            raise DataError("logistic regression needs at least 2 classes")
        index = {c: i for i, c in enumerate(self.classes_)}
        Y = np.zeros((X.shape[0], len(self.classes_)))
        for i, label in enumerate(map(str, y)):
            Y[i, index[label]] = 1.0
        W = np.zeros((len(self.classes_), X.shape[1]))
        b = np.zeros(len(self.classes_))
        self.loss_curve_ = []
        for _ in range(self.epochs):
            loss, gW, gb = logreg_loss_grad(W, b, X, Y, self.l2)
            self.loss_curve_.append(loss)
            W -= self.lr * gW
            b -= self.lr * gb
        self.coef_ = W
        self.intercept_ = b
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.coef_.shape[1]:
            raise DataError(
                f"dimension mismatch: got {X.shape[1]} features, trained on {self.coef_.shape[1]}"
            )
        return softmax(X @ self.coef_.T + self.intercept_)

    def predict(self, X) -> np.ndarray:
        proba = self.predict_proba(X)
        # argmax picks the first maximum; classes_ is alphabetical, so ties
        # resolve to the alphabetically-first class
        return self.classes_[proba.argmax(axis=1)]

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "logreg",
            "params": {"lr": self.lr, "epochs": self.epochs, "l2": self.l2},
            "classes": self.classes_.tolist(),
            "weights": self.coef_.tolist(),
            "bias": self.intercept_.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScratchLogisticRegression":
        if d.get("format_version") != MODEL_FORMAT_VERSION or d.get("kind") != "logreg":
            raise DataError("not a saved logistic-regression model")
        m = cls(**d["params"])
        m.classes_ = np.array(d["classes"])
        m.coef_ = np.asarray(d["weights"], dtype=np.float64)
        m.intercept_ = np.asarray(d["bias"], dtype=np.float64)
        return m


def gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.sum(p * p))


class _TreeNode:
    __slots__ = ("feature", "threshold", "left", "right", "counts")

    def __init__(self, feature=None, threshold=None, left=None, right=None, counts=None):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.counts = counts  # class-count vector at leaves

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def to_obj(self):
        if self.is_leaf:
            return {"counts": self.counts.tolist()}
        return {
            "feature": int(self.feature),
            "threshold": float(self.threshold),
            "left": self.left.to_obj(),
            "right": self.right.to_obj(),
        }

    @classmethod
    def from_obj(cls, obj) -> "_TreeNode":
        if "counts" in obj:
            return cls(counts=np.asarray(obj["counts"], dtype=np.int64))
        return cls(
            feature=obj["feature"],
            threshold=obj["threshold"],
            left=cls.from_obj(obj["left"]),
            right=cls.from_obj(obj["right"]),
        )


def _best_split(X, y_idx, n_classes, feature_ids):
    """Exhaustive Gini search over candidate features; midpoint thresholds."""
    n = X.shape[0]
    parent_counts = np.bincount(y_idx, minlength=n_classes)
    best = None  # (impurity, feature, threshold)
    for f in feature_ids:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y_idx[order]
        left = np.zeros(n_classes, dtype=np.int64)
        for i in range(n - 1):
            left[ys[i]] += 1
            if xs[i] == xs[i + 1]:
                continue
            right = parent_counts - left
            nl = i + 1
            imp = (nl * gini(left) + (n - nl) * gini(right)) / n
            if best is None or imp < best[0] - 1e-15:
                best = (imp, f, (xs[i] + xs[i + 1]) / 2.0)
    return best


class ScratchRandomForest(BaseEstimator, ClassifierMixin):
    """Bootstrap-aggregated Gini decision trees over random feature subsets.

    features_per_split=None means ceil(sqrt(d)); max_depth=None is unlimited.
    Fully deterministic for a given seed.
    """

    def __init__(
        self,
        n_trees: int = 100,
        max_depth: int | None = None,
        features_per_split: int | None = None,
        bootstrap: bool = True,
        seed: int = 0,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.features_per_split = features_per_split
        self.bootstrap = bootstrap
        self.seed = seed

    def _grow(self, X, y_idx, depth, rng, n_classes, k):
        counts = np.bincount(y_idx, minlength=n_classes)
        if (
            len(set(y_idx.tolist())) == 1
            or (self.max_depth is not None and depth >= self.max_depth)
            or X.shape[0] < 2
        ):
            return _TreeNode(counts=counts)
        d = X.shape[1]
        feats = np.sort(rng.choice(d, size=min(k, d), replace=False))
        split = _best_split(X, y_idx, n_classes, feats)
        if split is None:
            return _TreeNode(counts=counts)
        _, f, thr = split
        mask = X[:, f] <= thr
        return _TreeNode(
            feature=f,
            threshold=thr,
            left=self._grow(X[mask], y_idx[mask], depth + 1, rng, n_classes, k),
            right=self._grow(X[~mask], y_idx[~mask], depth + 1, rng, n_classes, k),
        )

    def fit(self, X, y):
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        X, y = _validate_xy(X, y)
        self.classes_ = np.array(sorted(set(map(str, y))))
        if len(self.classes_) < 2:
            raise DataError("random forest needs at least 2 classes")
        index = {c: i for i, c in enumerate(self.classes_)}
        y_idx = np.array([index[str(label)] for label in y], dtype=np.int64)
        k = self.features_per_split or math.ceil(math.sqrt(X.shape[1]))
        self.trees_ = []
        for t in range(self.n_trees):
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, t]))
            if self.bootstrap:
                idx = rng.integers(0, X.shape[0], size=X.shape[0])
                Xb, yb = X[idx], y_idx[idx]
            else:
                Xb, yb = X, y_idx
            self.trees_.append(self._grow(Xb, yb, 0, rng, len(self.classes_), k))
        return self

    def _leaf(self, node: _TreeNode, x: np.ndarray) -> np.ndarray:
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.counts

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        out = []
        for x in X:
            votes = np.zeros(len(self.classes_), dtype=np.int64)
            for tree in self.trees_:
                counts = self._leaf(tree, x)
                votes[counts.argmax()] += 1
            # argmax ties resolve to the alphabetically-first class
            out.append(self.classes_[votes.argmax()])
        return np.array(out)

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "forest",
            "params": {
                "n_trees": self.n_trees,
                "max_depth": self.max_depth,
                "features_per_split": self.features_per_split,
                "bootstrap": self.bootstrap,
                "seed": self.seed,
            },
            "classes": self.classes_.tolist(),
            "trees": [t.to_obj() for t in self.trees_],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScratchRandomForest":
        if d.get("format_version") != MODEL_FORMAT_VERSION or d.get("kind") != "forest":
            raise DataError("not a saved random-forest model")
        m = cls(**d["params"])
        m.classes_ = np.array(d["classes"])
        m.trees_ = [_TreeNode.from_obj(t) for t in d["trees"]]
        return m


def save_model(model, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict()) + "\n")


def load_model(path: str | Path):
    d = json.loads(Path(path).read_text())
    if d.get("kind") == "logreg":
        return ScratchLogisticRegression.from_dict(d)
    if d.get("kind") == "forest":
        return ScratchRandomForest.from_dict(d)
    raise DataError(f"unknown model kind: {d.get('kind')!r}")
