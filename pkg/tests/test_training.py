import numpy as np
import pytest

from gaan.datasets import (Dataset, infer_task_types, load_dataset, read_label_csv, read_smiles_file,
                           split_indices)
from gaan.exceptions import ParseError, RowCountMismatch
from gaan.graph import write_jsonl
from gaan.model import ModelConfig
from gaan.nn import CLASSIFICATION, REGRESSION
from gaan.smiles import parse_smiles
from gaan.training import evaluate, train, validation_score, write_history

SMALL_ARCH = "GAC(8)-PMF-GAC(8)-PMF-GMP-Tanh"
RINGS = ["C1CCCCC1", "c1ccccc1C", "C1CCOC1", "CC1CCC1", "c1ccncc1", "C1CC1CC", "OC1CCCC1", "c1ccccc1O"]
CHAINS = ["CCCC", "CCO", "CC(C)C", "CCN", "CCCCCO", "CC(=O)O", "CCOC", "NCCN"]


def ring_data():
    graphs = [parse_smiles(s) for s in RINGS + CHAINS]
    y = np.array([1.0] * len(RINGS) + [0.0] * len(CHAINS))[:, None]
    return Dataset(graphs, y, [CLASSIFICATION])


def test_split_sizes():
    for n, sizes in ((100, (80, 10, 10)), (10, (8, 1, 1)), (7, (5, 1, 1))):
        parts = split_indices(n, seed=0)
        assert tuple(len(p) for p in parts) == sizes
        assert sorted(np.concatenate(parts).tolist()) == list(range(n))
    a, b = split_indices(50, 1), split_indices(50, 1)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_infer_task_types():
    y = np.array([[0, 1.5], [1, np.nan], [np.nan, 2.0]])
    assert infer_task_types(y) == [CLASSIFICATION, REGRESSION]


def test_label_csv(tmp_path):
    p = tmp_path / "y.csv"
    p.write_text("id,a,b\nm0,1,\nm1,0,2.5\n")
    ids, labels, names = read_label_csv(p)
    assert ids == ["m0", "m1"] and names == ["a", "b"]
    assert np.isnan(labels[0, 1]) and labels[1, 1] == 2.5
    p.write_text("name,a\nm0,1\n")
    with pytest.raises(ParseError):
        read_label_csv(p)
    p.write_text("id,a\nm0,x\n")
    with pytest.raises(ParseError):
        read_label_csv(p)


def test_smiles_file_formats(tmp_path):
    p = tmp_path / "a.smi"
    p.write_text("CCO\nc1ccccc1\n")
    assert read_smiles_file(p) == (["CCO", "c1ccccc1"], None, [])
    p.write_text("smiles,logS\nCCO,1.1\nCCC,-0.5\n")
    smiles, labels, names = read_smiles_file(p)
    assert smiles == ["CCO", "CCC"] and names == ["logS"]
    np.testing.assert_allclose(labels[:, 0], [1.1, -0.5])


def test_load_dataset_row_mismatch(tmp_path):
    gpath = tmp_path / "g.jsonl"
    write_jsonl(gpath, [parse_smiles("CC"), parse_smiles("CO")])
    lpath = tmp_path / "y.csv"
    lpath.write_text("id,t\na,1\n")
    with pytest.raises(RowCountMismatch):
        load_dataset(gpath, lpath)


def test_load_dataset_from_jsonl_labels(tmp_path):
    gpath = tmp_path / "g.jsonl"
    graphs = [parse_smiles(s) for s in RINGS + CHAINS]
    write_jsonl(gpath, graphs, [[float(i % 2)] for i in range(len(graphs))])
    tr, va, te = load_dataset(gpath, split_seed=3)
    assert (len(tr), len(va), len(te)) == (12, 2, 2)
    assert tr.task_types == [CLASSIFICATION]


def test_training_learns_rings():
    data = ring_data()
    cfg = ModelConfig(arch=SMALL_ARCH, lr=0.01, max_epochs=40, early_stop_patience=40, seed=0)
    state, history = train(data, data, cfg)
    assert evaluate(state.model, data)["roc_auc"] == 1.0
    assert history[0][:3] == (0, "valid", "roc_auc")


def test_best_snapshot_is_restored():
    data = ring_data()
    cfg = ModelConfig(arch=SMALL_ARCH, lr=0.05, max_epochs=15, early_stop_patience=100, seed=1)
    state, history = train(data, data, cfg)
    valid = [(e, v) for e, split, _, v in history if split == "valid"]
    best_epoch, best = max(valid, key=lambda ev: (ev[1], -ev[0]))
    assert state.best_epoch == best_epoch
    assert validation_score(state.model, data)[1] == pytest.approx(best)


def test_early_stopping_patience():
    data = ring_data()
    cfg = ModelConfig(arch=SMALL_ARCH, lr=0.0, max_epochs=50, early_stop_patience=3, seed=0)
    state, history = train(data, data, cfg)
    # with a zero learning rate nothing improves after epoch 0
    assert state.best_epoch == 0 and state.epoch == 3


def test_callback_can_stop():
    data = ring_data()
    seen = []
    cfg = ModelConfig(arch=SMALL_ARCH, max_epochs=20, early_stop_patience=100)
    state, _ = train(data, data, cfg, callback=lambda epoch, model: seen.append(epoch) or epoch == 4)
    assert seen == [1, 2, 3, 4] and state.epoch == 4


def test_regression_uses_rmse_and_masks():
    graphs = [parse_smiles(s) for s in RINGS + CHAINS]
    y = np.array([[g.n + 0.5 * g.m] for g in graphs], dtype=float)
    y[3, 0] = np.nan
    data = Dataset(graphs, y, [REGRESSION])
    cfg = ModelConfig(arch=SMALL_ARCH, lr=0.01, max_epochs=60, early_stop_patience=60, seed=0)
    state, history = train(data, data, cfg)
    assert history[0][2] == "rmse"
    baseline = np.sqrt(np.nanmean((y - np.nanmean(y)) ** 2))
    assert evaluate(state.model, data)["rmse"] < baseline


def test_mixed_tasks_fall_back_to_loss():
    graphs = [parse_smiles(s) for s in RINGS[:4] + CHAINS[:4]]
    y = np.column_stack([[1, 1, 1, 1, 0, 0, 0, 0], np.arange(8.0)])
    data = Dataset(graphs, y, [CLASSIFICATION, REGRESSION])
    cfg = ModelConfig(arch=SMALL_ARCH, max_epochs=2)
    _, history = train(data, None, cfg)
    assert history[0][2] == "loss"


def test_history_csv_is_exact(tmp_path):
    path = tmp_path / "m.csv"
    write_history(path, [(0, "valid", "rmse", 0.1), (1, "train", "loss", 1 / 3)])
    assert path.read_text() == "epoch,split,metric,value\n0,valid,rmse,0.1\n1,train,loss,0.3333333333333333\n"


def test_training_is_deterministic():
    data = ring_data()
    cfg = ModelConfig(arch=SMALL_ARCH, max_epochs=5, batch_size=4, seed=7)
    _, h1 = train(data, data, cfg)
    _, h2 = train(data, data, cfg)
    assert h1 == h2
