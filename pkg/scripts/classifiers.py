"""
Probabilistic multi-class classifiers behind one fit / predict_proba interface.

Classifiers register themselves by ``name`` (the ClassifierSpec kind). The
random forest and the multi-layer perceptron live in their own modules and are
registered when this module is imported.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import logsumexp, softmax

from .errors import DegenerateLabels, DimensionMismatch, InvalidParameter, NonFinite

logger = logging.getLogger(__name__)

CLASSIFIERS: dict = {}


def register_classifier(cls):
    CLASSIFIERS[cls.name] = cls
    return cls


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    hyperparams: dict = field(default_factory=dict)
    name: Optional[str] = None

    def __post_init__(self):
        if self.kind not in CLASSIFIERS:
            raise InvalidParameter(f"unknown classifier kind {self.kind!r}; expected one of {sorted(CLASSIFIERS)}")
        defaults = CLASSIFIERS[self.kind].defaults
        unknown = set(self.hyperparams) - set(defaults)
        if unknown:
            raise InvalidParameter(f"unknown {self.kind} hyperparameters {sorted(unknown)}")

    @property
    def id(self) -> str:
        return self.name or self.kind

    def with_seed(self, seed: int) -> "ClassifierSpec":
        return ClassifierSpec(self.kind, {**self.hyperparams, "seed": seed}, self.name)


@dataclass(frozen=True)
class ProbPrediction:
    """
    Class probabilities p(g | f(c)).

    ``probs`` is a length-G vector for one sample or an (N, G) matrix holding
    one prediction per row; ``class_ids`` gives the class of each column.
    """

    probs: np.ndarray
    class_ids: np.ndarray

    def __len__(self) -> int:
        return 1 if self.probs.ndim == 1 else self.probs.shape[0]

    def __getitem__(self, i) -> "ProbPrediction":
        return ProbPrediction(np.atleast_2d(self.probs)[i], self.class_ids)

    @property
    def matrix(self) -> np.ndarray:
        return np.atleast_2d(self.probs)

    def labels(self) -> np.ndarray:
        """Most probable class per sample; ties go to the lowest column."""
        return self.class_ids[np.argmax(self.matrix, axis=1)]


class Classifier:
    """Base class: label encoding, input checks and the prediction wrapper."""

    name = ""
    defaults: dict = {}

    def __init__(self, **hyperparams):
        unknown = set(hyperparams) - set(self.defaults)
        if unknown:
            raise InvalidParameter(f"unknown {self.name} hyperparameters {sorted(unknown)}")
        self.params = {**self.defaults, **hyperparams}
        self.classes_: Optional[np.ndarray] = None
        self.n_features_: Optional[int] = None

    def fit(self, X, y) -> "Classifier":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"expected X of shape (N, d) and N labels, got {X.shape} and {y.shape}")
        if not np.all(np.isfinite(X)):
            raise NonFinite("training features contain non-finite values")
        self.classes_, codes = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise DegenerateLabels(f"need at least 2 classes, got {self.classes_.tolist()}")
        self.n_features_ = X.shape[1]
        self._fit(X, codes)
        return self

    def predict_proba(self, X) -> ProbPrediction:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features_:
            raise DimensionMismatch(f"model was trained on {self.n_features_} features, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise NonFinite("features contain non-finite values")
        P = self._predict_proba(X)
        # clean rounding so each row is a distribution to machine precision
        P = np.clip(P, 0.0, None)
        P /= P.sum(axis=1, keepdims=True)
        return ProbPrediction(P[0] if single else P, self.classes_)

    def predict_label(self, X):
        labels = self.predict_proba(np.atleast_2d(X)).labels()
        return labels[0] if np.ndim(X) == 1 else labels

    @property
    def n_classes(self) -> int:
        return self.classes_.size

    def _fit(self, X: np.ndarray, y: np.ndarray):
        raise NotImplementedError()

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError()


@register_classifier
class KnnClassifier(Classifier):
    """Class frequencies among the k nearest training points (Euclidean, unweighted)."""

    name = "knn"
    defaults = {"k": 10, "seed": 0}

    def _fit(self, X, y):
        if self.params["k"] < 1:
            raise InvalidParameter(f"k must be >= 1, got {self.params['k']}")
        self._tree = cKDTree(X)
        self._y = y

    def _predict_proba(self, X):
        k = min(int(self.params["k"]), self._y.size)
        _, ind = self._tree.query(X, k=k)
        ind = ind.reshape(X.shape[0], k)
        counts = np.zeros((X.shape[0], self.n_classes))
        np.add.at(counts, (np.repeat(np.arange(X.shape[0]), k), self._y[ind].ravel()), 1.0)
        return counts / k


@register_classifier
class GaussianNaiveBayes(Classifier):
    name = "gaussian_nb"
    defaults = {"nb_var_smoothing": 1e-9, "seed": 0}

    def _fit(self, X, y):
        G = self.n_classes
        counts = np.bincount(y, minlength=G).astype(float)
        self.prior_ = counts / counts.sum()
        self.theta_ = np.stack([X[y == g].mean(axis=0) for g in range(G)])
        epsilon = self.params["nb_var_smoothing"] * np.var(X, axis=0).max()
        self.var_ = np.stack([X[y == g].var(axis=0) for g in range(G)]) + epsilon
        if not np.all(self.var_ > 0):
            # every feature constant across the whole training set
            self.var_ = np.where(self.var_ > 0, self.var_, 1.0)

    def joint_log_likelihood(self, X) -> np.ndarray:
        inv_var = 1.0 / self.var_
        log_norm = -0.5 * np.sum(np.log(2.0 * np.pi * self.var_), axis=1)
        # expanded squared distance avoids an (N, G, d) intermediate
        sq = (X**2) @ inv_var.T - 2.0 * X @ (self.theta_ * inv_var).T + np.sum(self.theta_**2 * inv_var, axis=1)
        return np.log(self.prior_) + log_norm - 0.5 * sq

    def _predict_proba(self, X):
        jll = self.joint_log_likelihood(X)
        return np.exp(jll - logsumexp(jll, axis=1, keepdims=True))


@register_classifier
class LogisticRegression(Classifier):
    """
    Multinomial logistic regression with an L2 penalty on the weights (not the
    intercepts), trained full-batch by gradient descent with a backtracking
    (Armijo) line search.
    """

    name = "logistic"
    defaults = {"l2_lambda": 1e-4, "max_iter": 1000, "grad_tol": 1e-6, "seed": 0}

    def _fit(self, X, y):
        n, d = X.shape
        G = self.n_classes
        Xb = np.hstack([X, np.ones((n, 1))])
        Y = np.eye(G)[y]
        lam = float(self.params["l2_lambda"])
        penalty_mask = np.ones((d + 1, 1))
        penalty_mask[-1] = 0.0

        def loss_grad(W):
            Z = Xb @ W
            lse = logsumexp(Z, axis=1, keepdims=True)
            loss = float(np.mean(lse[:, 0] - np.sum(Z * Y, axis=1))) + 0.5 * lam * float(np.sum((W * penalty_mask) ** 2))
            grad = Xb.T @ (np.exp(Z - lse) - Y) / n + lam * W * penalty_mask
            return loss, grad

        W = np.zeros((d + 1, G))
        loss, grad = loss_grad(W)
        self.loss_history_ = [loss]
        step = 1.0
        for it in range(int(self.params["max_iter"])):
            gnorm2 = float(np.sum(grad**2))
            if np.sqrt(gnorm2) < self.params["grad_tol"]:
                break
            while True:
                W_new = W - step * grad
                loss_new, grad_new = loss_grad(W_new)
                if loss_new <= loss - 0.5 * step * gnorm2 or step < 1e-12:
                    break
                step *= 0.5
            if loss_new > loss:
                break
            W, loss, grad = W_new, loss_new, grad_new
            self.loss_history_.append(loss)
            step *= 2.0
        self.n_iter_ = len(self.loss_history_) - 1
        logger.debug("logistic regression stopped after %d iterations, loss %.6f", self.n_iter_, loss)
        self.coef_ = W[:-1]
        self.intercept_ = W[-1]

    def _predict_proba(self, X):
        return softmax(X @ self.coef_ + self.intercept_, axis=1)


def build_classifier(spec: ClassifierSpec) -> Classifier:
    return CLASSIFIERS[spec.kind](**spec.hyperparams)


def fit(spec: ClassifierSpec, X, y) -> Classifier:
    return build_classifier(spec).fit(X, y)


def predict_proba(model: Classifier, x) -> ProbPrediction:
    return model.predict_proba(x)


def predict_label(model: Classifier, x) -> Any:
    return model.predict_label(x)


# registration side effects
from . import forest, mlp  # noqa: E402,F401
