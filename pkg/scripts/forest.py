"""Random forest of Gini CART trees with per-split feature subsampling."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .classifiers import Classifier, register_classifier
from .errors import InvalidParameter

logger = logging.getLogger(__name__)

LEAF = -1


@dataclass(frozen=True)
class DecisionTree:
    """Flat array form of a fitted tree; ``feature[i] == LEAF`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.intp)
        while True:
            active = np.flatnonzero(self.feature[node] != LEAF)
            if active.size == 0:
                return node
            current = node[active]
            go_left = X[active, self.feature[current]] <= self.threshold[current]
            node[active] = np.where(go_left, self.left[current], self.right[current])

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


def _best_split_on_feature(x: np.ndarray, y: np.ndarray, n_classes: int):
    """Best Gini split of one feature as (score, threshold); score is -inf if x is constant."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return -np.inf, None
    n = y.size
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y[order]] = 1.0
    left = np.cumsum(onehot, axis=0)[:-1]
    right = left[-1] + onehot[-1] - left
    n_left = np.arange(1, n, dtype=float)
    # minimizing the weighted Gini impurity == maximizing this score
    score = np.sum(left**2, axis=1) / n_left + np.sum(right**2, axis=1) / (n - n_left)
    score[~valid] = -np.inf
    i = int(np.argmax(score))
    threshold = 0.5 * (xs[i] + xs[i + 1])
    if threshold >= xs[i + 1]:
        threshold = xs[i]
    return score[i], threshold


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    max_features: int,
    rng: np.random.Generator,
    max_depth=None,
    min_samples_split: int = 2,
    prior=None,
) -> DecisionTree:
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        counts = np.bincount(y[idx], minlength=n_classes).astype(float)
        total = counts.sum()
        value.append(counts / total if total > 0 else prior)
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        return len(feature) - 1

    d = X.shape[1]
    root = np.arange(X.shape[0])
    stack = [(new_node(root), root, 0)]
    while stack:
        node, idx, depth = stack.pop()
        yn = y[idx]
        if idx.size < min_samples_split or (max_depth is not None and depth >= max_depth) or np.all(yn == yn[0]):
            continue

        best_score, best_feature, best_threshold = -np.inf, None, None
        candidates = rng.permutation(d)
        for tried, f in enumerate(candidates):
            # past the sampled features, keep looking only until one split is valid
            if tried >= max_features and best_feature is not None:
                break
            score, thr = _best_split_on_feature(X[idx, f], yn, n_classes)
            if score > best_score:
                best_score, best_feature, best_threshold = score, int(f), thr
        if best_feature is None:
            continue

        mask = X[idx, best_feature] <= best_threshold
        feature[node] = best_feature
        threshold[node] = best_threshold
        left_idx, right_idx = idx[mask], idx[~mask]
        left[node] = new_node(left_idx)
        right[node] = new_node(right_idx)
        stack.append((right[node], right_idx, depth + 1))
        stack.append((left[node], left_idx, depth + 1))

    return DecisionTree(
        feature=np.asarray(feature, dtype=np.intp),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.intp),
        right=np.asarray(right, dtype=np.intp),
        value=np.vstack(value),
    )


@register_classifier
class RandomForest(Classifier):
    """
    Bagged Gini trees; each split considers a fresh random subset of
    ``features_per_split`` variables (floor(sqrt(d)) by default).

    Per-tree generators are spawned from ``seed`` so the forest is identical
    whatever ``n_jobs`` is.
    """

    name = "random_forest"
    defaults = {
        "n_trees": 200,
        "max_depth": None,
        "features_per_split": None,
        "min_samples_split": 2,
        "bootstrap": True,
        "n_jobs": 1,
        "seed": 0,
    }

    def _fit(self, X, y):
        n, d = X.shape
        n_trees = int(self.params["n_trees"])
        if n_trees < 1:
            raise InvalidParameter(f"n_trees must be >= 1, got {n_trees}")
        m = self.params["features_per_split"]
        m = max(1, int(np.floor(np.sqrt(d)))) if m is None else int(m)
        if not 1 <= m <= d:
            raise InvalidParameter(f"features_per_split must lie in [1, {d}], got {m}")
        max_depth = self.params["max_depth"]
        counts = np.bincount(y, minlength=self.n_classes).astype(float)
        prior = counts / counts.sum()

        def build(seq: np.random.SeedSequence) -> DecisionTree:
            rng = np.random.default_rng(seq)
            rows = rng.integers(0, n, size=n) if self.params["bootstrap"] else np.arange(n)
            return grow_tree(
                X[rows],
                y[rows],
                self.n_classes,
                m,
                rng,
                max_depth=None if max_depth is None else int(max_depth),
                min_samples_split=int(self.params["min_samples_split"]),
                prior=prior,
            )

        seeds = np.random.SeedSequence(self.params["seed"]).spawn(n_trees)
        with ThreadPoolExecutor(max_workers=max(1, int(self.params["n_jobs"]))) as exe:
            self.trees_ = list(exe.map(build, seeds))
        logger.debug("random forest: %d trees, %d nodes in total", n_trees, sum(t.n_nodes for t in self.trees_))

    def _predict_proba(self, X):
        P = np.zeros((X.shape[0], self.n_classes))
        for tree in self.trees_:
            P += tree.predict_proba(X)
        return P / len(self.trees_)
