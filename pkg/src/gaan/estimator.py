"""scikit-learn compatible estimators wrapping the graph pipeline.

Inputs ``X`` are sequences of :class:`~gaan.graph.AttributedGraph` or SMILES
strings. Multitask targets are 2-D with NaN marking missing labels.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .datasets import Dataset
from .folding import FoldParams, RingCollapseParams, build_pyramid, stack_one_hots
from .graph import AttributedGraph, AttributeSchema, initial_features
from .model import DEFAULT_ARCH, ModelConfig
from .nn import CLASSIFICATION, REGRESSION
from .smiles import parse_smiles
from .training import evaluate, train


def check_graphs(X) -> list[AttributedGraph]:
    """Validate ``X`` and convert SMILES strings to graphs."""
    if isinstance(X, (str, AttributedGraph)):
        raise TypeError("X must be a sequence of graphs or SMILES strings, not a single item")
    graphs = []
    for i, item in enumerate(X):
        if isinstance(item, AttributedGraph):
            graphs.append(item)
        elif isinstance(item, str):
            graphs.append(parse_smiles(item))
        else:
            raise TypeError(f"X[{i}] is {type(item).__name__}; expected AttributedGraph or str")
    if not graphs:
        raise ValueError("X is empty")
    for i, g in enumerate(graphs):
        if g.n == 0:
            raise ValueError(f"X[{i}] has no vertices")
    return graphs


def check_targets(y, n_samples: int) -> np.ndarray:
    """Coerce ``y`` to a float ``(n_samples, n_tasks)`` array; NaN means missing."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2 or y.shape[0] != n_samples:
        raise ValueError(f"y has shape {y.shape}; expected ({n_samples},) or ({n_samples}, n_tasks)")
    if np.isinf(y).any():
        raise ValueError("y contains infinite values")
    empty = np.all(np.isnan(y), axis=0)
    if empty.any():
        raise ValueError(f"tasks {np.flatnonzero(empty).tolist()} have no observed labels")
    return y


class SmilesToGraph(BaseEstimator, TransformerMixin):
    """Stateless transformer turning SMILES strings into graphs."""

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return check_graphs(X)


class MarginFoldingFeaturizer(BaseEstimator, TransformerMixin):
    """Fixed-weight folding fingerprint.

    ``fit`` freezes the attribute schema; ``transform`` folds each graph's
    one-hot vertex/edge encoding ``levels`` times with constant weights and
    concatenates the mean-pooled vertex features of every level, giving a
    ``(n_graphs, (levels + 1) * (p + q))`` matrix.
    """

    def __init__(self, levels=3, alpha=1.0, beta=1.0, omega=1.0, theta=1.0):
        self.levels = levels
        self.alpha = alpha
        self.beta = beta
        self.omega = omega
        self.theta = theta

    def fit(self, X, y=None):
        graphs = check_graphs(X)
        self.schema_ = AttributeSchema.from_graphs(graphs)
        self.n_features_out_ = (self.levels + 1) * (self.schema_.p + self.schema_.q)
        return self

    def pyramids(self, X):
        check_is_fitted(self, "schema_")
        params = [(FoldParams(self.alpha, self.beta), RingCollapseParams(self.omega, self.theta))] * self.levels
        out = []
        for g in check_graphs(X):
            out.append(build_pyramid(stack_one_hots(initial_features(g, self.schema_)), params))
        return out

    def transform(self, X):
        rows = []
        for pyr in self.pyramids(X):
            rows.append(np.concatenate([lv.graph.X_V.mean(axis=0) for lv in pyr.levels]))
        return np.vstack(rows)


class _BaseGAAN(BaseEstimator):
    _task_type = None

    def __init__(self, arch=DEFAULT_ARCH, lam=0.5, learnable_lambda=False, lr=0.001,
                 batch_size=64, max_epochs=200, early_stop_patience=30, encoder_dim=16,
                 recon_weight=0.0, fold_init=1.0, random_state=0):
        self.arch = arch
        self.lam = lam
        self.learnable_lambda = learnable_lambda
        self.lr = lr
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.early_stop_patience = early_stop_patience
        self.encoder_dim = encoder_dim
        self.recon_weight = recon_weight
        self.fold_init = fold_init
        self.random_state = random_state

    def _config(self) -> ModelConfig:
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must lie in [0, 1], got {self.lam}")
        return ModelConfig(
            arch=self.arch, lam=self.lam, learnable_lambda=self.learnable_lambda, lr=self.lr,
            batch_size=self.batch_size, max_epochs=self.max_epochs,
            early_stop_patience=self.early_stop_patience, seed=int(self.random_state or 0),
            encoder_dim=self.encoder_dim, recon_weight=self.recon_weight, fold_init=self.fold_init,
        )

    def _validate_y(self, y):
        return y

    def fit(self, X, y, eval_set=None):
        """Train on ``(X, y)``.

        ``eval_set=(X_val, y_val)`` drives early stopping; without it the
        training data itself is monitored.
        """
        graphs = check_graphs(X)
        y = self._validate_y(check_targets(y, len(graphs)))
        types = [self._task_type] * y.shape[1]
        train_ds = Dataset(graphs, y, types)
        valid_ds = None
        if eval_set is not None:
            Xv, yv = eval_set
            gv = check_graphs(Xv)
            valid_ds = Dataset(gv, self._validate_y(check_targets(yv, len(gv))), types)
        state, history = train(train_ds, valid_ds, self._config())
        self.model_ = state.model
        self.schema_ = state.model.schema
        self.history_ = history
        self.best_epoch_ = state.best_epoch
        self.n_tasks_ = y.shape[1]
        return self

    def _raw(self, X):
        check_is_fitted(self, "model_")
        return self.model_.decision_function(check_graphs(X))

    def evaluate(self, X, y) -> dict:
        check_is_fitted(self, "model_")
        graphs = check_graphs(X)
        return evaluate(self.model_, Dataset(graphs, check_targets(y, len(graphs)), self.model_.task_types))


class GAANClassifier(ClassifierMixin, _BaseGAAN):
    """Binary (optionally multitask) molecular property classifier."""

    _task_type = CLASSIFICATION

    def _validate_y(self, y):
        observed = y[~np.isnan(y)]
        if not np.all((observed == 0) | (observed == 1)):
            raise ValueError("classification targets must be 0/1 (NaN for missing)")
        return y

    def fit(self, X, y, eval_set=None):
        self.classes_ = np.array([0, 1])
        self.multitask_ = np.ndim(y) == 2 and np.shape(y)[1] > 1
        return super().fit(X, y, eval_set)

    def decision_function(self, X):
        raw = self._raw(X)
        return raw if self.multitask_ else raw[:, 0]

    def predict_proba(self, X):
        """Positive-class probability per task, ``(n, 2)`` for a single task."""
        p = 1.0 / (1.0 + np.exp(-self._raw(X)))
        if self.multitask_:
            return p
        return np.column_stack([1.0 - p[:, 0], p[:, 0]])

    def predict(self, X):
        return (self.decision_function(X) > 0).astype(np.int64)


class GAANRegressor(RegressorMixin, _BaseGAAN):
    """Molecular property regressor."""

    _task_type = REGRESSION

    def fit(self, X, y, eval_set=None):
        self.multitask_ = np.ndim(y) == 2 and np.shape(y)[1] > 1
        return super().fit(X, y, eval_set)

    def predict(self, X):
        raw = self._raw(X)
        return raw if self.multitask_ else raw[:, 0]
