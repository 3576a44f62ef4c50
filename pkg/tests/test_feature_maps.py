import logging

import numpy as np
import pytest
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from scripts import simplex
from scripts.config import GRID_PARAMS
from scripts.errors import InsufficientSamples, InvalidParameter, NeighborhoodTooLarge, NoConvergence, RankDeficient
from scripts.feature_maps import (
    TransformSpec,
    apply_ica,
    apply_lle,
    apply_pca,
    barycenter_weights,
    fit_ica,
    fit_lle,
    fit_pca_whiten,
    fit_pipeline,
)

KEEP_LAST_ICA = {"ica_on_nonconvergence": "warn"}


def biased_cov(Y):
    Yc = Y - Y.mean(axis=0)
    return Yc.T @ Yc / Y.shape[0]


def curved_sheet(rng, n):
    """Half cylinder of radius 1 and height pi; both intrinsic axes have length pi."""
    t = rng.uniform(0, np.pi, n)
    h = rng.uniform(0, np.pi, n)
    return np.column_stack([np.cos(t), np.sin(t), h])


# -- PCA ------------------------------------------------------------------------


def test_whitened_covariance_is_identity(rng):
    X = rng.normal(size=(5000, 10)) @ rng.normal(size=(10, 10))
    model = fit_pca_whiten(X)
    Y = model.transform(X)
    assert Y.shape == (5000, 10)
    assert np.max(np.abs(biased_cov(Y) - np.eye(10))) < 1e-6


def test_correlated_pair_whitens_to_unit_variance(rng):
    X = rng.multivariate_normal([0, 0], [[1, 0.9], [0.9, 1]], size=10000)
    Y = fit_pca_whiten(X).transform(X)
    np.testing.assert_allclose(Y.var(axis=0), [1, 1], atol=0.05)


def test_pca_model_invariants(rng):
    X = rng.normal(size=(400, 6)) * np.arange(1, 7)
    model = fit_pca_whiten(X, whiten=False)
    np.testing.assert_allclose(model.components @ model.components.T, np.eye(6), atol=1e-8)
    s = model.singular_values
    assert np.all(s >= 0) and np.all(np.diff(s) <= 0)
    np.testing.assert_allclose(apply_pca(model, model.mean), np.zeros(6), atol=1e-12)
    np.testing.assert_allclose(apply_pca(model, X[7]), model.transform(X)[7])


def test_pca_rank_deficiency_on_clr(compositions):
    Z = simplex.clr(compositions)
    with pytest.raises(RankDeficient):
        fit_pca_whiten(Z)
    model = fit_pca_whiten(Z, on_rank_deficient="zero")
    assert model.null_components == (9,)
    Y = model.transform(Z)
    np.testing.assert_allclose(Y[:, 9], 0.0)
    np.testing.assert_allclose(biased_cov(Y[:, :9]), np.eye(9), atol=1e-6)


def test_pca_needs_more_samples_than_features(rng):
    with pytest.raises(InsufficientSamples):
        fit_pca_whiten(rng.normal(size=(5, 5)))


def test_unwhitened_clr_pca_matches_ilr_distances(rng):
    train = rng.dirichlet(np.ones(10), size=500)
    test = rng.dirichlet(np.ones(10), size=200)
    clr_pca = fit_pipeline(TransformSpec("clr_pca", {"whiten": False}), train)
    ilr = fit_pipeline(TransformSpec("ilr"), train)
    np.testing.assert_allclose(pdist(clr_pca.transform(test)), pdist(ilr.transform(test)), atol=1e-8)


# -- ICA ------------------------------------------------------------------------


def test_ica_recovers_uniform_sources(rng):
    S = rng.uniform(-1, 1, size=(5000, 2))
    A = np.array([[1.0, 0.6], [0.4, 1.0]])
    model = fit_ica(S @ A.T)
    assert model.converged
    recovered = model.transform(S @ A.T)
    corr = np.abs(np.corrcoef(S.T, recovered.T)[:2, 2:])
    assert corr.max(axis=1).min() > 0.95
    assert sorted(corr.argmax(axis=1).tolist()) == [0, 1]


def test_ica_outputs_standardized_and_deterministic(compositions):
    Z = simplex.clr(compositions)
    spec = TransformSpec("clr_ica", {"seed": 3, **KEEP_LAST_ICA})
    model = fit_ica(Z, spec)
    Y = apply_ica(model, Z)
    assert model.n_components == 9
    np.testing.assert_allclose(Y.mean(axis=0), 0.0, atol=1e-6)
    np.testing.assert_allclose(Y.std(axis=0), 1.0, atol=1e-6)
    again = fit_ica(Z, spec)
    np.testing.assert_array_equal(model.unmixing, again.unmixing)


def test_ica_reports_non_convergence(rng):
    X = rng.uniform(size=(500, 3)) @ rng.normal(size=(3, 3))
    with pytest.raises(NoConvergence) as err:
        fit_ica(X, TransformSpec("clr_ica", {"ica_tol": 1e-300, "ica_max_iter": 2}))
    assert err.value.iterations == 2


def test_ica_on_clr_assays_raises_by_default(compositions):
    with pytest.raises(NoConvergence):
        fit_ica(simplex.clr(compositions), TransformSpec("clr_ica", {"seed": 3}))


def test_ica_keeps_last_iterate_when_asked(rng, caplog):
    X = rng.uniform(size=(500, 3)) @ rng.normal(size=(3, 3))
    spec = TransformSpec("clr_ica", {"ica_tol": 1e-300, "ica_max_iter": 2, "ica_on_nonconvergence": "warn"})
    with caplog.at_level(logging.WARNING, logger="scripts.feature_maps"):
        model = fit_ica(X, spec)
    assert not model.converged
    assert model.n_iter == 2
    assert "FastICA stopped at 2 iterations" in caplog.text
    Y = model.transform(X)
    np.testing.assert_allclose(Y.std(axis=0), 1.0, atol=1e-6)


# -- LLE ------------------------------------------------------------------------


def test_barycenter_weights_sum_to_one(rng):
    X = rng.normal(size=(200, 4))
    _, ind = cKDTree(X).query(X, k=9)
    W = barycenter_weights(X, X, ind[:, 1:])
    np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-8)


def test_lle_preserves_neighbourhoods_on_curved_sheet(rng):
    X = curved_sheet(rng, 1000)
    model = fit_lle(X, TransformSpec("clr_lle", {"lle_neighbors": 12, "lle_dim": 2}))
    Y = model.train_embedding
    np.testing.assert_allclose(Y.mean(axis=0), 0.0, atol=1e-6)
    np.testing.assert_allclose(model.weights.sum(axis=1).A.ravel(), 1.0, atol=1e-8)

    _, nx = cKDTree(X).query(X, k=11)
    _, ny = cKDTree(Y).query(Y, k=11)
    overlap = np.mean([len(set(a[1:]) & set(b[1:])) / 10 for a, b in zip(nx, ny)])
    assert overlap >= 0.8


def test_lle_out_of_sample(rng):
    X = curved_sheet(rng, 600)
    model = fit_lle(X, TransformSpec("clr_lle", {"lle_neighbors": 10, "lle_dim": 2}))
    np.testing.assert_allclose(apply_lle(model, X), model.train_embedding, atol=1e-6)
    np.testing.assert_array_equal(apply_lle(model, X[:50]), apply_lle(model, X[:50]))

    _, ind = model.tree.query(X, k=2)
    a, b = 0, int(ind[0, 1])
    mid = apply_lle(model, 0.5 * (X[a] + X[b]))
    centre = 0.5 * (model.train_embedding[a] + model.train_embedding[b])
    assert np.linalg.norm(mid - centre) < 0.25


def test_lle_neighbourhood_must_fit(rng):
    with pytest.raises(NeighborhoodTooLarge):
        fit_lle(rng.normal(size=(50, 3)), TransformSpec("clr_lle", {"lle_neighbors": 50}))


def test_lle_subsampled_fit(compositions):
    spec = TransformSpec("clr_lle", {"lle_neighbors": 20, "lle_max_fit": 150})
    fitted = fit_pipeline(spec, compositions)
    lle = fitted.stages[-1]
    assert lle.train_points.shape[0] == 150
    assert lle.embed_dim == 9
    assert fitted.transform(compositions).shape == (300, 9)


# -- pipeline -------------------------------------------------------------------


@pytest.mark.parametrize(
    "kind, width",
    [("identity", 10), ("ilr", 9), ("pwlr", 45), ("pca_whiten", 10), ("clr_pca", 10), ("clr_ica", 9), ("clr_lle", 9)],
)
def test_pipeline_output_widths(compositions, kind, width):
    fitted = fit_pipeline(TransformSpec(kind, dict(GRID_PARAMS.get(kind, {}))), compositions)
    assert fitted.id == kind
    out = fitted.transform(compositions)
    assert out.shape == (300, width)
    assert fitted.transform(compositions[0]).shape == (width,)


def test_identity_passes_parts_through(compositions):
    np.testing.assert_array_equal(fit_pipeline(TransformSpec("identity"), compositions).transform(compositions), compositions)


def test_fit_uses_training_rows_only(rng):
    train = rng.dirichlet(np.ones(10), size=300)
    test = rng.dirichlet(np.ones(10), size=50)
    params = {"clr_ica": KEEP_LAST_ICA, "clr_lle": {"lle_neighbors": 20}}
    for kind in ("pca_whiten", "clr_pca", "clr_ica", "clr_lle"):
        spec = TransformSpec(kind, {"seed": 1, **params.get(kind, {})})
        a = fit_pipeline(spec, train).transform(test)
        b = fit_pipeline(spec, train.copy()).transform(test[::-1])[::-1]
        np.testing.assert_allclose(a, b, atol=1e-10)


def test_standardize_switch(compositions):
    out = fit_pipeline(TransformSpec("ilr", {"standardize": True}), compositions).transform(compositions)
    np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-10)
    np.testing.assert_allclose(out.std(axis=0), 1.0, atol=1e-10)


def test_transform_spec_validation():
    with pytest.raises(InvalidParameter):
        TransformSpec("tsne")
    with pytest.raises(InvalidParameter):
        TransformSpec("ilr", {"perplexity": 30})
    assert TransformSpec("pwlr", name="pwlr_sym").id == "pwlr_sym"
    assert TransformSpec("pwlr").param("alpha") == 1e-7
    assert TransformSpec("pwlr").param("pwlr_denominator") == "paper"
    for key, value in [("pwlr_denominator", "shifted"), ("whiten", "yes"), ("standardize", None), ("ica_on_nonconvergence", "ignore")]:
        with pytest.raises(InvalidParameter):
            TransformSpec("clr_ica", {key: value})
    with pytest.raises(InvalidParameter):
        fit_ica(np.eye(20, 3), TransformSpec("clr_ica", {"ica_max_iter": 0}))
