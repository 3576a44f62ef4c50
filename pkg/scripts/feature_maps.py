"""
Fitted feature-space maps and the pipeline combinator behind the transform
variants f(c) compared by the benchmark.

Each fitted map is an immutable model with a ``transform(X)`` method taking a
matrix with one sample per row (a single 1-D sample is also accepted). Models
are fitted on training rows only; test rows go through ``transform``.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh
from scipy.spatial import cKDTree

from . import simplex
from .errors import (
    DimensionMismatch,
    EigenFailure,
    InsufficientSamples,
    InvalidParameter,
    NeighborhoodTooLarge,
    NoConvergence,
    NonFinite,
    RankDeficient,
)

logger = logging.getLogger(__name__)

TRANSFORM_KINDS = ("identity", "ilr", "pca_whiten", "clr_pca", "clr_ica", "clr_lle", "pwlr")

TRANSFORM_DEFAULTS = {
    "alpha": 1e-7,
    "pwlr_denominator": "paper",
    "whiten": True,
    "standardize": False,
    "ica_tol": 1e-4,
    "ica_max_iter": 500,
    "ica_on_nonconvergence": "raise",
    "lle_neighbors": 128,
    "lle_dim": None,
    "lle_reg": 1e-3,
    "lle_max_fit": None,
    "seed": 0,
}

# singular values below RANK_TOL * largest make whitening ill-defined
RANK_TOL = 1e-12
# whitening divisors below WHITEN_FLOOR * largest are treated as null directions
WHITEN_FLOOR = 1e-8
DENSE_EIGEN_LIMIT = 2000

PARAM_CHOICES = {
    "pwlr_denominator": simplex.PWLR_DENOMINATORS,
    "whiten": (True, False),
    "standardize": (True, False),
    "ica_on_nonconvergence": ("raise", "warn"),
}


@dataclass(frozen=True)
class TransformSpec:
    kind: str
    params: dict = field(default_factory=dict)
    name: Optional[str] = None

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise InvalidParameter(f"unknown transform kind {self.kind!r}; expected one of {TRANSFORM_KINDS}")
        unknown = set(self.params) - set(TRANSFORM_DEFAULTS)
        if unknown:
            raise InvalidParameter(f"unknown transform parameters {sorted(unknown)}")
        for key, allowed in PARAM_CHOICES.items():
            if key in self.params and self.params[key] not in allowed:
                raise InvalidParameter(f"{key} must be one of {allowed}, got {self.params[key]!r}")

    @property
    def id(self) -> str:
        return self.name or self.kind

    def param(self, key: str) -> Any:
        return self.params.get(key, TRANSFORM_DEFAULTS[key])


def _as_matrix(X, what: str = "input") -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise DimensionMismatch(f"{what} must be a matrix with one sample per row")
    if not np.all(np.isfinite(X)):
        raise NonFinite(f"{what} contains non-finite values")
    return X


def _restore_shape(X_in, out: np.ndarray) -> np.ndarray:
    return out[0] if np.ndim(X_in) == 1 else out


def _check_width(X: np.ndarray, expected: int):
    if X.shape[1] != expected:
        raise DimensionMismatch(f"expected {expected} features, got {X.shape[1]}")


# -- standardization ----------------------------------------------------------


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = _as_matrix(X)
        std = X.std(axis=0)
        # constant columns stay centred at zero instead of dividing by zero
        scale = np.where(std > 0, std, 1.0)
        return cls(mean=X.mean(axis=0), scale=scale)

    def transform(self, X) -> np.ndarray:
        Xm = _as_matrix(X)
        _check_width(Xm, self.mean.shape[0])
        return _restore_shape(X, (Xm - self.mean) / self.scale)


# -- PCA with whitening ---------------------------------------------------------


@dataclass(frozen=True)
class PcaModel:
    """
    Principal axes of the training data.

    ``scale`` holds the per-component output factor: sqrt(N) / s_k when
    whitening (zero for null directions), one otherwise. The whitened training
    set has identity covariance under the 1/N estimator.
    """

    mean: np.ndarray
    components: np.ndarray
    singular_values: np.ndarray
    n_samples: int
    scale: np.ndarray
    null_components: tuple = ()

    @property
    def whiten(self) -> bool:
        return not np.all(self.scale == 1.0)

    def transform(self, X) -> np.ndarray:
        Xm = _as_matrix(X)
        _check_width(Xm, self.mean.shape[0])
        return _restore_shape(X, ((Xm - self.mean) @ self.components.T) * self.scale)


def fit_pca_whiten(X, whiten: bool = True, on_rank_deficient: str = "raise") -> PcaModel:
    """
    Fit a PCA keeping all d components.

    ``on_rank_deficient`` decides what happens when a singular value is
    numerically zero: ``"raise"`` reports RankDeficient, ``"zero"`` keeps the
    component but maps it to 0 in the output.
    """
    if on_rank_deficient not in ("raise", "zero"):
        raise InvalidParameter(f"on_rank_deficient must be 'raise' or 'zero', got {on_rank_deficient!r}")
    X = _as_matrix(X)
    n, d = X.shape
    if n <= d:
        raise InsufficientSamples(f"PCA needs more samples than features, got N={n}, d={d}")

    mean = X.mean(axis=0)
    _, s, vt = linalg.svd(X - mean, full_matrices=False)
    # sign convention: the largest loading of each axis is positive
    flip = np.sign(vt[np.arange(d), np.argmax(np.abs(vt), axis=1)])
    flip[flip == 0] = 1.0
    vt = vt * flip[:, None]

    largest = s[0] if s[0] > 0 else 1.0
    deficient = np.flatnonzero(s < RANK_TOL * largest)
    if deficient.size and on_rank_deficient == "raise":
        raise RankDeficient(
            f"singular values {s[deficient].tolist()} are below {RANK_TOL:g} x largest; whitening would divide by them",
            components=deficient.tolist(),
        )

    if whiten:
        null = s < WHITEN_FLOOR * largest
        scale = np.where(null, 0.0, np.sqrt(n) / np.where(null, 1.0, s))
        null_components = tuple(np.flatnonzero(null).tolist())
        if null_components:
            logger.warning("PCA whitening: zeroing null components %s", list(null_components))
    else:
        scale = np.ones(d)
        null_components = tuple(deficient.tolist())

    return PcaModel(
        mean=mean,
        components=vt,
        singular_values=s,
        n_samples=n,
        scale=scale,
        null_components=null_components,
    )


def apply_pca(model: PcaModel, x) -> np.ndarray:
    return model.transform(x)


# -- FastICA ------------------------------------------------------------------


def _sym_decorrelation(W: np.ndarray) -> np.ndarray:
    """W <- (W W^T)^{-1/2} W"""
    s, u = linalg.eigh(W @ W.T)
    s = np.clip(s, np.finfo(W.dtype).tiny, None)
    return (u * (1.0 / np.sqrt(s))) @ u.T @ W


def _logcosh(x: np.ndarray):
    gx = np.tanh(x)
    g_x = (1.0 - gx**2).mean(axis=-1)
    return gx, g_x


@dataclass(frozen=True)
class IcaModel:
    mean: np.ndarray
    whitening: np.ndarray
    unmixing: np.ndarray
    post_standardizer: Standardizer
    n_iter: int
    converged: bool = True

    @property
    def n_components(self) -> int:
        return self.unmixing.shape[0]

    def sources(self, X) -> np.ndarray:
        """Unmixed signals before standardization."""
        Xm = _as_matrix(X)
        _check_width(Xm, self.mean.shape[0])
        return ((Xm - self.mean) @ self.whitening.T) @ self.unmixing.T

    def transform(self, X) -> np.ndarray:
        return _restore_shape(X, self.post_standardizer.transform(self.sources(X)))


def fit_ica(X, spec: Optional[TransformSpec] = None) -> IcaModel:
    """
    Parallel FastICA with the log-cosh contrast.

    The input is whitened first; directions with no variance (one per CLR
    input) are dropped, so the component count equals the numerical rank.

    On near-Gaussian inputs the unmixing can keep rotating without meeting
    ``ica_tol``. ``ica_on_nonconvergence="raise"`` reports that as
    NoConvergence; ``"warn"`` logs a warning and keeps the last iterate.
    """
    spec = spec or TransformSpec("clr_ica")
    tol = float(spec.param("ica_tol"))
    max_iter = int(spec.param("ica_max_iter"))
    on_nonconvergence = spec.param("ica_on_nonconvergence")
    if max_iter < 1 or tol <= 0:
        raise InvalidParameter(f"ica_max_iter must be >= 1 and ica_tol > 0, got {max_iter} and {tol:g}")
    X = _as_matrix(X)
    n, d = X.shape
    if n <= d:
        raise InsufficientSamples(f"ICA needs more samples than features, got N={n}, d={d}")

    pca = fit_pca_whiten(X, whiten=True, on_rank_deficient="zero")
    keep = np.flatnonzero(pca.scale > 0)
    whitening = pca.components[keep] * pca.scale[keep][:, None]
    Xw = (X - pca.mean) @ whitening.T
    r = keep.size

    rng = np.random.default_rng(spec.param("seed"))
    W = _sym_decorrelation(rng.standard_normal((r, r)))
    converged = False
    for it in range(1, max_iter + 1):
        gwtx, g_wtx = _logcosh(W @ Xw.T)
        W1 = _sym_decorrelation(gwtx @ Xw / n - g_wtx[:, None] * W)
        lim = np.max(np.abs(np.abs(np.einsum("ij,ij->i", W1, W)) - 1.0))
        W = W1
        if lim < tol:
            converged = True
            break
    if converged:
        logger.debug("FastICA converged after %d iterations (%d components)", it, r)
    elif on_nonconvergence == "warn":
        logger.warning("FastICA stopped at %d iterations with change %.3g above tol=%g; keeping the last unmixing", max_iter, lim, tol)
    else:
        raise NoConvergence(f"FastICA did not reach tol={tol:g} in {max_iter} iterations", iterations=max_iter)

    S = Xw @ W.T
    return IcaModel(
        mean=pca.mean,
        whitening=whitening,
        unmixing=W,
        post_standardizer=Standardizer.fit(S),
        n_iter=it,
        converged=converged,
    )


def apply_ica(model: IcaModel, x) -> np.ndarray:
    return model.transform(x)


# -- locally linear embedding -----------------------------------------------------


def barycenter_weights(X: np.ndarray, Y: np.ndarray, indices: np.ndarray, reg: float = 1e-3, chunk: int = 512):
    """
    Weights reconstructing each X[i] from Y[indices[i]] with rows summing to one.

    The local Gram matrix is regularized by ``reg * trace`` so the problem stays
    well posed when there are more neighbours than dimensions.
    """
    n, k = indices.shape
    B = np.empty((n, k))
    ones = np.ones((k, 1))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        C = Y[indices[start:stop]] - X[start:stop, None, :]
        G = C @ C.transpose(0, 2, 1)
        trace = np.trace(G, axis1=1, axis2=2)
        R = np.where(trace > 0, reg * trace, reg)
        G[:, np.arange(k), np.arange(k)] += R[:, None]
        w = np.linalg.solve(G, np.broadcast_to(ones, (stop - start, k, 1)))[..., 0]
        B[start:stop] = w / w.sum(axis=1, keepdims=True)
    return B


def _neighbors_excluding_self(tree: cKDTree, X: np.ndarray, k: int) -> np.ndarray:
    _, ind = tree.query(X, k=k + 1)
    ind = np.atleast_2d(ind)
    is_self = ind == np.arange(X.shape[0])[:, None]
    # rows where the point itself was not returned (duplicates) drop the farthest instead
    missing = ~is_self.any(axis=1)
    is_self[missing, -1] = True
    return ind[~is_self].reshape(X.shape[0], k)


@dataclass(frozen=True)
class LleModel:
    train_points: np.ndarray
    train_embedding: np.ndarray
    n_neighbors: int
    embed_dim: int
    reg: float
    weights: sparse.csr_matrix = field(repr=False)
    tree: cKDTree = field(repr=False, compare=False)

    def transform(self, X) -> np.ndarray:
        Xm = _as_matrix(X)
        _check_width(Xm, self.train_points.shape[1])
        return _restore_shape(X, _barycentric_extend(self, Xm))


def _barycentric_extend(model: LleModel, X: np.ndarray) -> np.ndarray:
    k = min(model.n_neighbors, model.train_points.shape[0])
    dist, ind = model.tree.query(X, k=k)
    dist = dist.reshape(X.shape[0], k)
    ind = ind.reshape(X.shape[0], k)
    W = barycenter_weights(X, model.train_points, ind, reg=model.reg)
    # a query sitting on a training point takes that point's embedding
    exact = dist[:, 0] <= 1e-12 * max(1.0, float(np.abs(model.train_points).max()))
    W[exact] = 0.0
    W[exact, 0] = 1.0
    return np.einsum("nk,nkd->nd", W, model.train_embedding[ind])


def _bottom_eigenvectors(M: sparse.csr_matrix, n_vectors: int, seed: int) -> np.ndarray:
    """Eigenvectors for eigenvalues 2..n_vectors+1 of M, skipping the constant one."""
    n = M.shape[0]
    try:
        if n <= DENSE_EIGEN_LIMIT:
            logger.debug("LLE: dense eigensolver on %d points", n)
            _, vectors = linalg.eigh(M.toarray(), subset_by_index=(1, n_vectors))
            return vectors
        logger.debug("LLE: ARPACK shift-invert eigensolver on %d points", n)
        v0 = np.random.default_rng(seed).uniform(-1, 1, n)
        values, vectors = eigsh(M, k=n_vectors + 1, sigma=0.0, tol=1e-6, maxiter=1000, v0=v0)
        order = np.argsort(values)
        return vectors[:, order[1:]]
    except (ArpackNoConvergence, ArpackError, linalg.LinAlgError, RuntimeError) as e:
        raise EigenFailure(f"LLE eigenproblem failed: {e}") from e


def fit_lle(X, spec: Optional[TransformSpec] = None) -> LleModel:
    """
    Locally linear embedding of the training rows.

    Reconstruction weights are solved over each point's ``lle_neighbors``
    nearest neighbours; the embedding is given by the bottom non-constant
    eigenvectors of (I - W)^T (I - W), standardized per component.
    """
    spec = spec or TransformSpec("clr_lle")
    X = _as_matrix(X)
    n_all, d = X.shape
    n_neighbors = int(spec.param("lle_neighbors"))
    embed_dim = spec.param("lle_dim")
    embed_dim = int(embed_dim) if embed_dim is not None else max(1, d - 1)
    reg = float(spec.param("lle_reg"))
    seed = spec.param("seed")

    max_fit = spec.param("lle_max_fit")
    fit_rows = np.arange(n_all)
    if max_fit is not None and n_all > int(max_fit):
        fit_rows = np.sort(np.random.default_rng(seed).choice(n_all, size=int(max_fit), replace=False))
    points = X[fit_rows]
    n = points.shape[0]

    if n_neighbors >= n:
        raise NeighborhoodTooLarge(f"lle_neighbors={n_neighbors} must be smaller than the {n} fitted samples")
    if not 1 <= embed_dim <= n_neighbors:
        raise InvalidParameter(f"lle_dim must lie in [1, {n_neighbors}], got {embed_dim}")

    tree = cKDTree(points)
    ind = _neighbors_excluding_self(tree, points, n_neighbors)
    B = barycenter_weights(points, points, ind, reg=reg)
    W = sparse.csr_matrix(
        (B.ravel(), ind.ravel(), np.arange(0, n * n_neighbors + 1, n_neighbors)),
        shape=(n, n),
    )
    I_W = sparse.identity(n, format="csr") - W
    M = (I_W.T @ I_W).tocsr()

    Y = _bottom_eigenvectors(M, embed_dim, seed)
    Y = Standardizer.fit(Y).transform(Y)
    model = LleModel(
        train_points=points,
        train_embedding=Y,
        n_neighbors=n_neighbors,
        embed_dim=embed_dim,
        reg=reg,
        weights=W,
        tree=tree,
    )
    if fit_rows.size < n_all:
        logger.info("LLE: embedded %d of %d training rows, extending the rest", n, n_all)
    return model


def apply_lle(model: LleModel, x) -> np.ndarray:
    return model.transform(x)


# -- simplex stages and the pipeline ---------------------------------------------


@dataclass(frozen=True)
class _Clr:
    def transform(self, X):
        return simplex.clr(X)


@dataclass(frozen=True)
class _Ilr:
    basis: simplex.HelmertBasis

    def transform(self, X):
        return simplex.ilr(X, self.basis)


@dataclass(frozen=True)
class _Pwlr:
    alpha: float
    denominator: str

    def transform(self, X):
        return simplex.pwlr(X, alpha=self.alpha, denominator=self.denominator)


@dataclass(frozen=True)
class FittedTransform:
    spec: TransformSpec
    n_parts: int
    stages: tuple

    @property
    def id(self) -> str:
        return self.spec.id

    def transform(self, X) -> np.ndarray:
        Xm = _as_matrix(X, "compositions")
        _check_width(Xm, self.n_parts)
        for stage in self.stages:
            Xm = stage.transform(Xm)
        return _restore_shape(X, Xm)


def fit_pipeline(spec: TransformSpec, X_train) -> FittedTransform:
    """Fit the transform chain named by ``spec.kind`` on training compositions only."""
    X = _as_matrix(X_train, "training compositions")
    n_parts = X.shape[1]
    kind = spec.kind
    stages: list = []

    if kind == "identity":
        pass
    elif kind == "ilr":
        stages.append(_Ilr(simplex.helmert_basis(n_parts)))
    elif kind == "pwlr":
        stages.append(_Pwlr(float(spec.param("alpha")), spec.param("pwlr_denominator")))
    elif kind == "pca_whiten":
        stages.append(fit_pca_whiten(X, whiten=bool(spec.param("whiten")), on_rank_deficient="zero"))
    else:
        stages.append(_Clr())
        Z = simplex.clr(X)
        if kind == "clr_pca":
            stages.append(fit_pca_whiten(Z, whiten=bool(spec.param("whiten")), on_rank_deficient="zero"))
        elif kind == "clr_ica":
            stages.append(fit_ica(Z, spec))
        elif kind == "clr_lle":
            stages.append(fit_lle(Z, spec))

    if spec.param("standardize") and kind not in ("clr_ica", "clr_lle"):
        F = X
        for stage in stages:
            F = stage.transform(F)
        stages.append(Standardizer.fit(F))

    return FittedTransform(spec=spec, n_parts=n_parts, stages=tuple(stages))
