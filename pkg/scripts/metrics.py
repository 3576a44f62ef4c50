"""
Evaluation of probabilistic geozone predictions: multiclass Brier score,
support-weighted precision / recall / F1, top-n recognition rates and the
aggregated (M or H) vs U binary scenario.
"""
from dataclasses import asdict, dataclass
from typing import Mapping

import numpy as np

from .classifiers import ProbPrediction
from .errors import BadN, UnknownLabel

GROUPS = ("M", "H", "U")
BINARY_CLASSES = np.array(["MH", "U"])
TOP_N = (1, 2, 4, 8)


@dataclass(frozen=True)
class GroupMap:
    """Geozone id -> group in {M, H, U}."""

    mapping: Mapping

    def __post_init__(self):
        bad = {g: grp for g, grp in self.mapping.items() if grp not in GROUPS}
        if bad:
            raise UnknownLabel(f"groups must be one of {GROUPS}, got {bad}")

    def check_total(self, class_ids):
        missing = [c for c in class_ids if c not in self.mapping]
        if missing:
            raise UnknownLabel(f"geozones without a group: {missing}")

    def group_of(self, geozone) -> str:
        return self.mapping[geozone]


@dataclass(frozen=True)
class MetricsReport:
    brier: float
    precision: float
    recall: float
    f1: float
    top_n: dict
    binary_brier: float
    binary_precision: float
    binary_recall: float
    binary_f1: float

    def as_record(self) -> dict:
        record = asdict(self)
        top_n = record.pop("top_n")
        for n in sorted(top_n):
            record[f"top_{n}"] = top_n[n]
        return record


def _label_columns(preds: ProbPrediction, labels) -> np.ndarray:
    labels = np.atleast_1d(np.asarray(labels))
    P = preds.matrix
    if labels.size != P.shape[0] or labels.size == 0:
        raise ValueError(f"got {P.shape[0]} predictions for {labels.size} labels")
    column = {c: i for i, c in enumerate(preds.class_ids.tolist())}
    try:
        return np.array([column[lab] for lab in labels.tolist()], dtype=np.intp)
    except KeyError as e:
        raise UnknownLabel(f"label {e.args[0]!r} is not among the predicted classes") from e


def brier_multiclass(preds: ProbPrediction, labels) -> float:
    """Mean over samples of sum_g (p_g - [g = true])^2; lies in [0, 2]."""
    cols = _label_columns(preds, labels)
    P = preds.matrix
    onehot = np.zeros_like(P)
    onehot[np.arange(cols.size), cols] = 1.0
    return float(np.mean(np.sum((P - onehot) ** 2, axis=1)))


def precision_recall_f1(preds: ProbPrediction, labels):
    """
    Support-weighted precision and recall of the argmax labels, in percent.

    F1 is the harmonic mean of the weighted precision and weighted recall.
    Classes that are never predicted count with precision 0.
    """
    cols = _label_columns(preds, labels)
    predicted = np.argmax(preds.matrix, axis=1)
    G = preds.matrix.shape[1]
    support = np.bincount(cols, minlength=G).astype(float)
    n_predicted = np.bincount(predicted, minlength=G).astype(float)
    true_pos = np.bincount(cols[predicted == cols], minlength=G).astype(float)

    weights = support / support.sum()
    precision_c = np.divide(true_pos, n_predicted, out=np.zeros(G), where=n_predicted > 0)
    precision = float(np.sum(weights * precision_c))
    # support-weighted recall reduces to accuracy
    recall = float(true_pos.sum() / support.sum())
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return 100.0 * precision, 100.0 * recall, 100.0 * f1


def top_n_rate(preds: ProbPrediction, labels, n: int) -> float:
    """Percentage of samples whose true class is among the n most probable; ties favour lower columns."""
    P = preds.matrix
    if not 1 <= n <= P.shape[1]:
        raise BadN(f"n must lie in [1, {P.shape[1]}], got {n}")
    cols = _label_columns(preds, labels)
    ranking = np.argsort(-P, axis=1, kind="stable")[:, :n]
    return 100.0 * float(np.mean(np.any(ranking == cols[:, None], axis=1)))


def aggregate_binary(preds: ProbPrediction, labels, gmap: GroupMap):
    """Collapse geozone probabilities into p(M or H) and p(U)."""
    gmap.check_total(preds.class_ids.tolist())
    labels = np.atleast_1d(np.asarray(labels))
    _label_columns(preds, labels)
    is_mh = np.array([gmap.group_of(c) in ("M", "H") for c in preds.class_ids.tolist()])
    P = preds.matrix
    binary = np.column_stack([P[:, is_mh].sum(axis=1), P[:, ~is_mh].sum(axis=1)])
    binary_labels = np.array(["MH" if gmap.group_of(lab) in ("M", "H") else "U" for lab in labels.tolist()])
    return ProbPrediction(binary, BINARY_CLASSES), binary_labels


def evaluate(preds: ProbPrediction, labels, gmap: GroupMap) -> MetricsReport:
    precision, recall, f1 = precision_recall_f1(preds, labels)
    G = preds.matrix.shape[1]
    top_n = {n: top_n_rate(preds, labels, n) for n in TOP_N if n <= G}
    bin_preds, bin_labels = aggregate_binary(preds, labels, gmap)
    b_precision, b_recall, b_f1 = precision_recall_f1(bin_preds, bin_labels)
    return MetricsReport(
        brier=brier_multiclass(preds, labels),
        precision=precision,
        recall=recall,
        f1=f1,
        top_n=top_n,
        binary_brier=brier_multiclass(bin_preds, bin_labels),
        binary_precision=b_precision,
        binary_recall=b_recall,
        binary_f1=b_f1,
    )
