"""
Aitchison-simplex primitives: closure, log-ratio transforms and the
Aitchison distance.

Compositions are plain numpy arrays. A single composition is a 1-D array of
K strictly positive parts summing to one; a batch is a 2-D array with one
composition per row. Every function accepts either shape and returns the
matching shape.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg

from .errors import DimensionMismatch, InvalidParameter, NonPositivePart, NotZeroSum, TooShort

# c_1..c_K in the order the assay files list them
PART_NAMES = ("Fe", "SiO2", "Al2O3", "P", "LOI", "TiO2", "MgO", "Mn", "CaO", "S")

SIMPLEX_TOL = 1e-9
PWLR_DENOMINATORS = ("paper", "symmetric")


@dataclass(frozen=True)
class HelmertBasis:
    """Orthonormal (K-1) x K contrast matrix whose rows each sum to zero."""

    matrix: np.ndarray

    @property
    def n_parts(self) -> int:
        return self.matrix.shape[1]

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _positive_parts(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim not in (1, 2):
        raise DimensionMismatch(f"expected a vector or a matrix of row vectors, got {v.ndim} dimensions")
    if v.shape[-1] < 2:
        raise TooShort(f"a composition needs at least 2 parts, got {v.shape[-1]}")
    # written as a negation so that NaN is rejected too
    if not np.all(v > 0):
        raise NonPositivePart("every part must be strictly positive (and finite)")
    if not np.all(np.isfinite(v)):
        raise NonPositivePart("every part must be finite")
    return v


def closure(v) -> np.ndarray:
    """Rescale positive vector(s) so the parts sum to one."""
    v = _positive_parts(v)
    return v / v.sum(axis=-1, keepdims=True)


def check_composition(c, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Return ``c`` as an array after checking positivity and unit sum."""
    c = _positive_parts(c)
    if not np.all(np.abs(c.sum(axis=-1) - 1.0) <= tol):
        raise NonPositivePart(f"parts must sum to 1 within {tol}")
    return c


def clr(c) -> np.ndarray:
    """Centred log-ratio: log of each part minus the mean log."""
    logs = np.log(_positive_parts(c))
    return logs - logs.mean(axis=-1, keepdims=True)


def clr_inverse(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 2:
        raise TooShort(f"a composition needs at least 2 parts, got {x.shape[-1]}")
    if not np.all(np.abs(x.sum(axis=-1)) <= SIMPLEX_TOL):
        raise NotZeroSum(f"clr coordinates must sum to 0 within {SIMPLEX_TOL}")
    # shift by the row maximum before exponentiating; closure removes the factor
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@lru_cache(maxsize=32)
def _helmert_matrix(n_parts: int) -> np.ndarray:
    m = linalg.helmert(n_parts, full=False)
    m.setflags(write=False)
    return m


def helmert_basis(n_parts: int) -> HelmertBasis:
    """Helmert sub-matrix: row i contrasts the first i parts against part i+1."""
    if n_parts < 2:
        raise TooShort(f"a Helmert basis needs K >= 2, got {n_parts}")
    return HelmertBasis(matrix=_helmert_matrix(int(n_parts)))


def _check_basis(basis: HelmertBasis, width: int, expected: int, what: str):
    if width != expected:
        raise DimensionMismatch(f"{what} has {width} entries but the basis expects {expected}")


def ilr(c, basis: HelmertBasis = None) -> np.ndarray:
    """Isometric log-ratio coordinates: ``basis @ clr(c)``."""
    c = _positive_parts(c)
    if basis is None:
        basis = helmert_basis(c.shape[-1])
    _check_basis(basis, c.shape[-1], basis.n_parts, "composition")
    return clr(c) @ basis.matrix.T


def ilr_inverse(y, basis: HelmertBasis) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    _check_basis(basis, y.shape[-1], basis.dim, "ilr vector")
    x = y @ basis.matrix
    # the rows of the basis sum to zero, so x is zero-sum up to rounding
    x = x - x.mean(axis=-1, keepdims=True)
    return clr_inverse(x)


def pwlr_pairs(n_parts: int):
    """Index pairs (i, j), i < j, in the order pwlr emits them."""
    return np.triu_indices(n_parts, k=1)


def pwlr(c, alpha: float = 1e-7, denominator: str = "paper") -> np.ndarray:
    """
    Pairwise log-ratios ln(c_i / c_j) for every i < j, with Laplace smoothing.

    With ``denominator="paper"`` each entry is ln((c_i + a) / (c_j + K a));
    ``"symmetric"`` uses ln((c_i + a) / (c_j + a)). Both reduce to
    ln(c_i / c_j) when ``alpha`` is 0.
    """
    if alpha < 0:
        raise InvalidParameter(f"alpha must be >= 0, got {alpha}")
    if denominator not in PWLR_DENOMINATORS:
        raise InvalidParameter(f"denominator must be one of {PWLR_DENOMINATORS}, got {denominator!r}")
    c = _positive_parts(c)
    n_parts = c.shape[-1]
    i, j = pwlr_pairs(n_parts)
    den_alpha = n_parts * alpha if denominator == "paper" else alpha
    return np.log(c[..., i] + alpha) - np.log(c[..., j] + den_alpha)


def aitchison_distance(p, q) -> np.ndarray:
    """d_A with d_A^2 = (1/K^2) * sum_{i<j} (ln(p_i/p_j) - ln(q_i/q_j))^2."""
    p = _positive_parts(p)
    q = _positive_parts(q)
    if p.shape[-1] != q.shape[-1]:
        raise DimensionMismatch(f"compositions have {p.shape[-1]} and {q.shape[-1]} parts")
    n_parts = p.shape[-1]
    diff = pwlr(p, alpha=0.0) - pwlr(q, alpha=0.0)
    d2 = np.sum(diff**2, axis=-1) / n_parts**2
    return np.sqrt(d2)
