import numpy as np
import pytest

from scripts import simplex
from scripts.errors import DimensionMismatch, InvalidParameter, NonPositivePart, NotZeroSum, TooShort


def test_closure_rescales_to_unit_sum():
    np.testing.assert_allclose(simplex.closure([2, 2, 4]), [0.25, 0.25, 0.5])
    np.testing.assert_allclose(simplex.closure([0.1, 0.9]), [0.1, 0.9])


def test_closure_rejects_bad_parts():
    with pytest.raises(NonPositivePart):
        simplex.closure([1, 0, 3])
    with pytest.raises(NonPositivePart):
        simplex.closure([1, np.nan, 3])
    with pytest.raises(TooShort):
        simplex.closure([1.0])


def test_closure_idempotent_and_scale_invariant(compositions):
    v = compositions * 37.5
    np.testing.assert_allclose(simplex.closure(v), compositions, atol=1e-15)
    np.testing.assert_allclose(simplex.closure(simplex.closure(v)), simplex.closure(v), atol=1e-15)
    np.testing.assert_allclose(simplex.clr(v), simplex.clr(compositions), atol=1e-12)


def test_clr_examples():
    np.testing.assert_allclose(simplex.clr([0.25] * 4), np.zeros(4), atol=1e-15)
    np.testing.assert_allclose(simplex.clr([0.5, 0.25, 0.25]), [0.4621, -0.2310, -0.2310], atol=1e-4)


def test_clr_sums_to_zero(compositions):
    assert np.all(np.abs(simplex.clr(compositions).sum(axis=1)) < 1e-12)


def test_clr_inverse():
    np.testing.assert_allclose(simplex.clr_inverse([0.0, 0.0, 0.0]), [1 / 3] * 3)
    x = simplex.clr([0.5, 0.25, 0.25])
    np.testing.assert_allclose(simplex.clr_inverse(x), [0.5, 0.25, 0.25], atol=1e-12)
    with pytest.raises(NotZeroSum):
        simplex.clr_inverse([1.0, 0.0, 0.0])


def test_helmert_basis_properties():
    np.testing.assert_allclose(simplex.helmert_basis(2).matrix, [[1 / np.sqrt(2), -1 / np.sqrt(2)]])
    H = simplex.helmert_basis(10).matrix
    assert H.shape == (9, 10)
    np.testing.assert_allclose(H @ H.T, np.eye(9), atol=1e-10)
    np.testing.assert_allclose(H @ np.ones(10), np.zeros(9), atol=1e-10)
    with pytest.raises(TooShort):
        simplex.helmert_basis(1)


def test_ilr_examples():
    assert np.allclose(simplex.ilr([0.2] * 5), np.zeros(4))
    e = np.e
    c = [e / (1 + e), 1 / (1 + e)]
    np.testing.assert_allclose(simplex.ilr(c), [1 / np.sqrt(2)], atol=1e-12)
    basis = simplex.helmert_basis(2)
    np.testing.assert_allclose(simplex.ilr_inverse([1 / np.sqrt(2)], basis), c, atol=1e-6)
    np.testing.assert_allclose(simplex.ilr_inverse(np.zeros(4), simplex.helmert_basis(5)), [0.2] * 5)


def test_ilr_dimension_checks():
    with pytest.raises(DimensionMismatch):
        simplex.ilr([0.2] * 5, simplex.helmert_basis(4))
    with pytest.raises(DimensionMismatch):
        simplex.ilr_inverse(np.zeros(3), simplex.helmert_basis(5))


@pytest.mark.parametrize("n_parts", [3, 5, 10])
def test_isometry_chain(rng, n_parts):
    p = rng.dirichlet(np.ones(n_parts), size=1000)
    q = rng.dirichlet(np.ones(n_parts), size=1000)
    ilr_d2 = np.sum((simplex.ilr(p) - simplex.ilr(q)) ** 2, axis=1)
    clr_d2 = np.sum((simplex.clr(p) - simplex.clr(q)) ** 2, axis=1)
    d_a = simplex.aitchison_distance(p, q)
    pwlr_d2 = np.sum((simplex.pwlr(p, alpha=0.0) - simplex.pwlr(q, alpha=0.0)) ** 2, axis=1) / n_parts**2
    scale = np.maximum(1.0, clr_d2)
    assert np.all(np.abs(ilr_d2 - clr_d2) / scale < 1e-10)
    assert np.all(np.abs(clr_d2 - n_parts * d_a**2) / scale < 1e-10)
    assert np.all(np.abs(pwlr_d2 - d_a**2) / scale < 1e-10)


def test_round_trips(rng):
    c = rng.dirichlet(np.ones(10), size=1000)
    np.testing.assert_allclose(simplex.clr_inverse(simplex.clr(c)), c, atol=1e-9)
    basis = simplex.helmert_basis(10)
    np.testing.assert_allclose(simplex.ilr_inverse(simplex.ilr(c, basis), basis), c, atol=1e-9)
    y = rng.normal(size=(1000, 9))
    np.testing.assert_allclose(simplex.ilr(simplex.ilr_inverse(y, basis), basis), y, atol=1e-9)


def test_aitchison_distance_brute_force(rng):
    p, q = rng.dirichlet(np.ones(6), size=2)
    total = 0.0
    for i in range(6):
        for j in range(i + 1, 6):
            total += (np.log(p[i] / p[j]) - np.log(q[i] / q[j])) ** 2
    assert simplex.aitchison_distance(p, q) == pytest.approx(np.sqrt(total / 36), rel=1e-12)
    assert simplex.aitchison_distance(p, q) == pytest.approx(simplex.aitchison_distance(q, p), rel=1e-12)
    assert simplex.aitchison_distance(p, p) == 0.0
    with pytest.raises(DimensionMismatch):
        simplex.aitchison_distance(p, q[:5])


def test_pwlr_examples():
    assert simplex.pwlr(np.full(10, 0.1)).shape == (45,)
    np.testing.assert_allclose(simplex.pwlr([0.5, 0.25, 0.25], alpha=0.0), [np.log(2), np.log(2), 0.0], atol=1e-15)


def test_pwlr_smoothing(rng):
    c = simplex.closure(rng.uniform(0.2, 1.0, size=(50, 10)))
    assert c.min() >= 0.01
    assert np.all(np.abs(simplex.pwlr(c, alpha=1e-7) - simplex.pwlr(c, alpha=0.0)) < 1e-4)


def test_pwlr_denominators():
    c = np.array([0.5, 0.3, 0.2])
    a = 0.01
    paper = simplex.pwlr(c, alpha=a)
    symmetric = simplex.pwlr(c, alpha=a, denominator="symmetric")
    np.testing.assert_allclose(paper[0], np.log((0.5 + a) / (0.3 + 3 * a)))
    np.testing.assert_allclose(symmetric[0], np.log((0.5 + a) / (0.3 + a)))
    i, j = simplex.pwlr_pairs(3)
    assert list(zip(i.tolist(), j.tolist())) == [(0, 1), (0, 2), (1, 2)]
    with pytest.raises(InvalidParameter):
        simplex.pwlr(c, alpha=-1.0)
    with pytest.raises(InvalidParameter):
        simplex.pwlr(c, denominator="other")
