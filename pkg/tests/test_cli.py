import json
import logging

import numpy as np
import pytest

import gaan.autograd as autograd
from gaan.cli import EXIT_CHECK, EXIT_DATA, EXIT_OK, EXIT_USAGE, main, read_config
from gaan.graph import read_jsonl, write_jsonl

from builders import path_graph, ring_with_pendant

RINGS = ["C1CCCCC1", "c1ccccc1C", "C1CCOC1", "CC1CCC1", "c1ccncc1", "C1CC1CC", "OC1CCCC1", "c1ccccc1O",
         "C1CCNCC1", "c1ccsc1"]
CHAINS = ["CCCC", "CCO", "CC(C)C", "CCN", "CCCCCO", "CC(=O)O", "CCOC", "NCCN", "CCCl", "CC#N"]


@pytest.fixture
def dataset(tmp_path):
    smi = tmp_path / "mols.csv"
    smi.write_text("smiles,ring\n" + "".join(f"{s},{int(i < 10)}\n" for i, s in enumerate(RINGS + CHAINS)))
    out = tmp_path / "mols.jsonl"
    assert main(["mol2jsonl", str(smi), str(out)]) == EXIT_OK
    return out


def write_config(tmp_path, graphs, **extra):
    cfg = {"graphs": graphs.name, "arch": "GAC(8)-PMF-GAC(8)-PMF-GMP-Tanh", "max_epochs": 5,
           "lr": 0.01, "seed": 3, "metrics": "metrics.csv", "checkpoint": "model.json"}
    cfg.update(extra)
    path = tmp_path / "train.cfg"
    path.write_text("# toy run\n" + "".join(f"{k} = {v}\n" for k, v in cfg.items()))
    return path


def test_mol2jsonl_with_labels(dataset):
    graphs, labels = read_jsonl(dataset)
    assert len(graphs) == 20
    assert labels[0] == [1.0] and labels[-1] == [0.0]


def test_mol2jsonl_reports_bad_lines(tmp_path, capsys):
    smi = tmp_path / "m.smi"
    smi.write_text("CCO\nC1CC\nCXC\n")
    out = tmp_path / "o.jsonl"
    assert main(["mol2jsonl", str(smi), str(out)]) == EXIT_OK
    err = capsys.readouterr().err
    assert "line 2: UnmatchedRingClosure" in err and "line 3: UnsupportedSymbol" in err
    assert len(read_jsonl(out)[0]) == 1


def test_mol2jsonl_label_row_mismatch(tmp_path):
    smi = tmp_path / "m.smi"
    smi.write_text("CCO\nCC\n")
    lab = tmp_path / "y.csv"
    lab.write_text("id,t\na,1\n")
    assert main(["mol2jsonl", str(smi), str(tmp_path / "o.jsonl"), "--labels", str(lab)]) == EXIT_DATA


def test_fold_path7_json(tmp_path, capsys):
    g = tmp_path / "p7.jsonl"
    write_jsonl(g, [path_graph(7)])
    assert main(["fold", str(g), "--levels", "3", "--dump-pyramid", "json", "--out-dir", str(tmp_path / "o")]) == 0
    files = sorted(p.name for p in (tmp_path / "o").iterdir())
    assert files == [f"p7_g0_level{h}.json" for h in range(4)]
    counts = [json.loads((tmp_path / "o" / f).read_text())["n"] for f in files]
    assert counts == [7, 5, 3, 1]
    assert "vertex counts 7,5,3,1" in capsys.readouterr().out


def test_fold_dot_and_fixpoint_warning(tmp_path, caplog):
    g = tmp_path / "ring.jsonl"
    write_jsonl(g, [ring_with_pendant()])
    with caplog.at_level(logging.WARNING, logger="gaan"):
        assert main(["fold", str(g), "--levels", "3", "--dump-pyramid", "dot", "--out-dir", str(tmp_path)]) == 0
    assert "fixpoint at level 1" in caplog.text
    level1 = (tmp_path / "ring_g0_level1.dot").read_text()
    assert "doublecircle" in level1 and 'tooltip="{0,1,2,3,4,5,6}"' in level1


def test_train_and_eval(tmp_path, dataset, capsys):
    cfg = write_config(tmp_path, dataset)
    assert main(["train", str(cfg)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "best epoch" in out and (tmp_path / "model.json").exists()
    header = (tmp_path / "metrics.csv").read_text().splitlines()[0]
    assert header == "epoch,split,metric,value"
    assert main(["eval", str(tmp_path / "model.json"), str(dataset)]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("roc_auc ")


def test_train_seed_override(tmp_path, dataset, monkeypatch):
    cfg = write_config(tmp_path, dataset, max_epochs=2)
    main(["train", str(cfg)])
    a = (tmp_path / "metrics.csv").read_text()
    monkeypatch.setenv("GAAN_SEED", "11")
    main(["train", str(cfg)])
    b = (tmp_path / "metrics.csv").read_text()
    assert a != b


def test_usage_errors(tmp_path, dataset, capsys):
    with pytest.raises(SystemExit) as info:
        main(["fold"])
    assert info.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main(["nonsense"])
    assert info.value.code == EXIT_USAGE
    bad = write_config(tmp_path, dataset, arch="GAC(8)-XYZ-GMP")
    assert main(["train", str(bad)]) == EXIT_USAGE
    assert "XYZ" in capsys.readouterr().err
    nograph = tmp_path / "empty.cfg"
    nograph.write_text("lr = 0.1\n")
    assert main(["train", str(nograph)]) == EXIT_USAGE
    broken = tmp_path / "broken.cfg"
    broken.write_text("just words\n")
    assert main(["train", str(broken)]) == EXIT_USAGE


def test_data_errors(tmp_path):
    assert main(["eval", str(tmp_path / "missing.json"), str(tmp_path / "x.jsonl")]) == EXIT_DATA
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json\n")
    assert main(["fold", str(bad)]) == EXIT_DATA
    assert main(["mol2jsonl", str(tmp_path / "nope.smi"), str(tmp_path / "o.jsonl")]) == EXIT_DATA


def test_read_config_comments(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("a = 1  # trailing\n\n# only comment\nb=x=y\n")
    assert read_config(p) == {"a": "1", "b": "x=y"}


def test_gradcheck_command(capsys):
    assert main(["gradcheck"]) == EXIT_OK
    out = capsys.readouterr().out
    for cls in ("W_V", "b_E", "lambda", "alpha", "omega", "theta"):
        assert cls in out
    assert "FAIL" not in out


def test_gradcheck_command_fails_on_broken_backward(monkeypatch, capsys):
    monkeypatch.setattr(autograd, "_tanh_backward", lambda out, grad: grad * (1.0 - out * out) * 1.05)
    assert main(["gradcheck"]) == EXIT_CHECK
    assert "FAILED" in capsys.readouterr().err


def test_eval_with_label_file(tmp_path, dataset, capsys):
    cfg = write_config(tmp_path, dataset, max_epochs=1)
    main(["train", str(cfg)])
    graphs, _ = read_jsonl(dataset)
    lab = tmp_path / "y.csv"
    lab.write_text("id,t\n" + "".join(f"m{i},{np.float64(i % 2)}\n" for i in range(len(graphs))))
    capsys.readouterr()
    assert main(["eval", str(tmp_path / "model.json"), str(dataset), "--labels", str(lab)]) == EXIT_OK
    assert "accuracy" in capsys.readouterr().out

