"""Minibatch training with early stopping on the validation metric."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .datasets import Dataset
from .graph import AttributeSchema
from .metrics import accuracy, mean_roc_auc, per_task_rmse
from .model import GAANModel, ModelConfig
from .nn import CLASSIFICATION, REGRESSION, Adam

logger = logging.getLogger(__name__)


@dataclass
class TrainState:
    model: GAANModel
    optimizer: Adam
    best_snapshot: dict
    best_epoch: int = 0
    best_metric: float = float("nan")
    epoch: int = 0
    history: list = field(default_factory=list)


def evaluate(model: GAANModel, data: Dataset) -> dict:
    """Metrics of ``model`` on ``data`` in eval mode.

    Classification tasks report ``roc_auc`` (mean over tasks with both
    classes) and ``accuracy``; regression tasks report ``rmse``.
    """
    preds = model.decision_function(data.graphs)
    labels = np.asarray(data.labels, dtype=np.float64)
    types = np.array(model.task_types)
    out = {}
    cls = types == CLASSIFICATION
    if cls.any():
        out["roc_auc"], out["roc_auc_per_task"] = mean_roc_auc(preds[:, cls], labels[:, cls])
        out["accuracy"] = accuracy(preds[:, cls], labels[:, cls])
    if (~cls).any():
        per_task = per_task_rmse(preds[:, ~cls], labels[:, ~cls])
        out["rmse_per_task"] = per_task
        out["rmse"] = float(np.nanmean(per_task))
    return out


def validation_score(model: GAANModel, data: Dataset):
    """``(name, value, higher_is_better)`` used for early stopping.

    Pure classification uses mean ROC-AUC, pure regression RMSE. Mixed task
    sets, or validation splits where no task has both classes, fall back to
    the validation loss.
    """
    types = set(model.task_types)
    if types == {REGRESSION}:
        return "rmse", evaluate(model, data)["rmse"], False
    if types == {CLASSIFICATION}:
        auc = evaluate(model, data)["roc_auc"]
        if not np.isnan(auc):
            return "roc_auc", auc, True
    batch = model.make_batch(data.graphs)
    loss = model.loss(batch, data.labels, training=False).item()
    return "loss", loss, False


def _improved(new, best, higher):
    if np.isnan(best):
        return not np.isnan(new)
    return new > best if higher else new < best


def train(train_data: Dataset, valid_data: Dataset | None, config: ModelConfig,
          schema: AttributeSchema | None = None, verbose: bool = False, callback=None):
    """Fit a fresh model and return ``(state, history)``.

    ``history`` rows are ``(epoch, split, metric, value)``. Epoch 0 is the
    untrained model; the best validation snapshot (including epoch 0) is
    restored into ``state.model`` before returning.

    ``callback(epoch, model)`` runs after every epoch's validation; a truthy
    return value stops training (the best snapshot is still restored).
    """
    if not train_data.graphs:
        raise ValueError("training set is empty")
    if valid_data is None or not valid_data.graphs:
        valid_data = train_data
    schema = schema or AttributeSchema.from_graphs(train_data.graphs)
    rng = np.random.default_rng(config.seed)
    model = GAANModel(config, schema, train_data.task_types, rng)
    model.fit_target_scaling(train_data.labels)
    params = model.parameters()
    opt = Adam(params, lr=config.lr)
    labels = np.asarray(train_data.labels, dtype=np.float64)
    n = len(train_data.graphs)

    name, value, higher = validation_score(model, valid_data)
    history = [(0, "valid", name, value)]
    state = TrainState(model, opt, model.snapshot(), 0, value, 0, history)
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            # row order inside a batch does not affect the loss; sorting lets
            # full-batch runs hit the model's batch cache
            idx = np.sort(order[start:start + config.batch_size])
            if np.all(np.isnan(labels[idx])):
                continue
            batch = model.make_batch([train_data.graphs[i] for i in idx])
            model.zero_grad()
            loss = model.loss(batch, labels[idx], training=True)
            loss.backward()
            opt.step()
            losses.append(loss.item() * len(idx))
        history.append((epoch, "train", "loss", float(np.sum(losses) / n)))
        name, value, higher = validation_score(model, valid_data)
        history.append((epoch, "valid", name, value))
        state.epoch = epoch
        if _improved(value, state.best_metric, higher):
            state.best_metric, state.best_epoch = value, epoch
            state.best_snapshot = model.snapshot()
        if verbose:
            logger.info("epoch %d train loss %.4f valid %s %.4f", epoch, history[-2][3], name, value)
        if callback is not None and callback(epoch, model):
            break
        if epoch - state.best_epoch >= config.early_stop_patience:
            break
    model.restore(state.best_snapshot)
    return state, history


def write_history(path, history) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "split", "metric", "value"])
        for epoch, split, metric, value in history:
            w.writerow([epoch, split, metric, repr(float(value))])
