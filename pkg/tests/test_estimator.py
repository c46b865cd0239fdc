import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.linear_model import LogisticRegression
from sklearn.pipeline import make_pipeline

from gaan.estimator import (GAANClassifier, GAANRegressor, MarginFoldingFeaturizer, SmilesToGraph,
                            check_graphs, check_targets)
from gaan.smiles import parse_smiles

RINGS = ["C1CCCCC1", "c1ccccc1C", "C1CCOC1", "CC1CCC1", "c1ccncc1", "C1CC1CC", "OC1CCCC1", "c1ccccc1O"]
CHAINS = ["CCCC", "CCO", "CC(C)C", "CCN", "CCCCCO", "CC(=O)O", "CCOC", "NCCN"]
X = RINGS + CHAINS
y = np.array([1] * 8 + [0] * 8)
SMALL = dict(arch="GAC(8)-PMF-GAC(8)-PMF-GMP-Tanh", lr=0.01, max_epochs=30, early_stop_patience=30)


def test_get_params_and_clone():
    est = GAANClassifier(lam=0.3, max_epochs=7)
    params = est.get_params()
    assert params["lam"] == 0.3 and params["max_epochs"] == 7
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(lr=0.05)
    assert est.lr == 0.05


def test_classifier_fit_predict():
    clf = GAANClassifier(**SMALL).fit(X, y)
    assert clf.predict(X).shape == (16,)
    proba = clf.predict_proba(X)
    assert proba.shape == (16, 2)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert clf.score(X, y) >= 0.9
    assert set(clf.classes_) == {0, 1}
    assert clf.history_[0][0] == 0


def test_classifier_accepts_graphs_and_eval_set():
    graphs = [parse_smiles(s) for s in X]
    clf = GAANClassifier(**SMALL).fit(graphs, y, eval_set=(graphs[:4] + graphs[-4:], np.r_[y[:4], y[-4:]]))
    assert clf.decision_function(graphs).shape == (16,)


def test_multitask_classifier_with_missing_labels():
    Y = np.column_stack([y, 1 - y]).astype(float)
    Y[0, 1] = np.nan
    clf = GAANClassifier(**dict(SMALL, max_epochs=3)).fit(X, Y)
    assert clf.decision_function(X).shape == (16, 2)
    assert clf.predict_proba(X).shape == (16, 2)


def test_classifier_rejects_non_binary():
    with pytest.raises(ValueError):
        GAANClassifier(**SMALL).fit(X, np.arange(16))


def test_regressor():
    targets = np.array([parse_smiles(s).n for s in X], dtype=float)
    reg = GAANRegressor(**dict(SMALL, max_epochs=60, early_stop_patience=60)).fit(X, targets)
    pred = reg.predict(X)
    assert pred.shape == (16,)
    assert reg.score(X, targets) > 0.0
    assert reg.evaluate(X, targets)["rmse"] < targets.std()


def test_not_fitted():
    with pytest.raises(NotFittedError):
        GAANClassifier().predict(X)
    with pytest.raises(NotFittedError):
        MarginFoldingFeaturizer().transform(X)


def test_invalid_lambda():
    with pytest.raises(ValueError):
        GAANRegressor(lam=1.5).fit(X, np.ones(16))


def test_featurizer_pipeline():
    feat = MarginFoldingFeaturizer(levels=2)
    Z = feat.fit_transform(X)
    assert Z.shape == (16, feat.n_features_out_)
    assert feat.n_features_out_ == 3 * (feat.schema_.p + feat.schema_.q)
    pipe = make_pipeline(SmilesToGraph(), MarginFoldingFeaturizer(levels=2), LogisticRegression(max_iter=500))
    pipe.fit(X, y)
    assert pipe.score(X, y) == 1.0


def test_featurizer_is_relabelling_invariant():
    feat = MarginFoldingFeaturizer(levels=3).fit(X)
    g = parse_smiles("CC(=O)Nc1ccc(O)cc1")
    h = g.relabel(np.random.default_rng(0).permutation(g.n))
    np.testing.assert_allclose(feat.transform([g]), feat.transform([h]), atol=1e-12)


def test_input_validation():
    with pytest.raises(TypeError):
        check_graphs("CCO")
    with pytest.raises(TypeError):
        check_graphs([1, 2])
    with pytest.raises(ValueError):
        check_graphs([])
    with pytest.raises(ValueError):
        check_targets([1.0, 2.0], 3)
    with pytest.raises(ValueError):
        check_targets([[np.nan], [np.nan]], 2)
    assert check_targets([1, 0], 2).shape == (2, 1)
