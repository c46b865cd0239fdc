"""Dataset container, file readers and the deterministic 8:1:1 split."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ParseError, RowCountMismatch
from .graph import AttributedGraph, read_jsonl
from .nn import CLASSIFICATION, REGRESSION

logger = logging.getLogger(__name__)


@dataclass
class Dataset:
    graphs: list
    labels: np.ndarray
    task_types: list = field(default_factory=list)
    names: list = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.float64).reshape(len(self.graphs), -1)
        if not self.task_types:
            self.task_types = infer_task_types(self.labels)
        if len(self.task_types) != self.labels.shape[1]:
            raise RowCountMismatch(f"{self.labels.shape[1]} label columns for {len(self.task_types)} task types")

    def __len__(self):
        return len(self.graphs)

    @property
    def n_tasks(self) -> int:
        return self.labels.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = list(idx)
        names = [self.names[i] for i in idx] if self.names else []
        return Dataset([self.graphs[i] for i in idx], self.labels[idx], list(self.task_types), names)


def infer_task_types(labels) -> list:
    """Columns whose observed values are all 0/1 are classification tasks."""
    labels = np.asarray(labels, dtype=np.float64)
    types = []
    for t in range(labels.shape[1]):
        col = labels[:, t][~np.isnan(labels[:, t])]
        types.append(CLASSIFICATION if col.size and np.all((col == 0) | (col == 1)) else REGRESSION)
    return types


def _cell(x: str) -> float:
    x = x.strip()
    if x == "" or x.lower() in ("nan", "null", "none"):
        return np.nan
    try:
        return float(x)
    except ValueError as exc:
        raise ParseError(f"non-numeric label {x!r}") from exc


def read_label_csv(path):
    """Read ``id,task1,...,taskT``; returns ``(ids, labels, task_names)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty label file")
    header, body = rows[0], [r for r in rows[1:] if r]
    if not header or header[0].strip().lower() != "id":
        raise ParseError(f"{path}: header must start with 'id'")
    labels = np.full((len(body), len(header) - 1), np.nan)
    ids = []
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise ParseError(f"{path}:{i + 2}: expected {len(header)} fields, got {len(row)}")
        ids.append(row[0])
        labels[i] = [_cell(x) for x in row[1:]]
    return ids, labels, header[1:]


def read_smiles_file(path):
    """Read SMILES, either one per line or as a ``smiles,label...`` CSV.

    Returns ``(smiles, labels or None, task_names)``.
    """
    with open(path, newline="") as fh:
        lines = [ln.rstrip("\r\n") for ln in fh]
    lines = [ln for ln in lines if ln.strip()]
    if lines and "," in lines[0] and lines[0].split(",")[0].strip().lower() == "smiles":
        rows = list(csv.reader(lines))
        header = rows[0]
        smiles = [r[0].strip() for r in rows[1:]]
        labels = np.array([[_cell(x) for x in r[1:]] for r in rows[1:]], dtype=np.float64)
        return smiles, labels.reshape(len(smiles), len(header) - 1), header[1:]
    return [ln.strip() for ln in lines], None, []


def split_indices(n: int, seed: int, fractions=(0.8, 0.1, 0.1)):
    """Shuffled train/valid/test index arrays with sizes following ``fractions``."""
    perm = np.random.default_rng(seed).permutation(n)
    n_valid = int(round(n * fractions[1]))
    n_test = int(round(n * fractions[2]))
    n_train = n - n_valid - n_test
    return perm[:n_train], perm[n_train:n_train + n_valid], perm[n_train + n_valid:]


def load_dataset(graph_path, label_path=None, split_seed: int = 0, task_types=None):
    """Load graphs (JSONL) and labels, then split 8:1:1.

    Labels come from ``label_path`` when given, otherwise from the
    ``labels`` key of each JSONL record.

    Raises
    ------
    RowCountMismatch
        When the label file and graph file disagree on the number of rows.
    ParseError
    """
    graphs, jsonl_labels = read_jsonl(graph_path)
    if label_path is not None:
        _, labels, _ = read_label_csv(label_path)
        if labels.shape[0] != len(graphs):
            raise RowCountMismatch(f"{len(graphs)} graphs but {labels.shape[0]} label rows")
    else:
        if any(y is None for y in jsonl_labels):
            raise ParseError(f"{graph_path}: records without labels and no label file given")
        widths = {len(y) for y in jsonl_labels}
        if len(widths) > 1:
            raise ParseError(f"{graph_path}: inconsistent label counts {sorted(widths)}")
        labels = np.array(jsonl_labels, dtype=np.float64).reshape(len(graphs), -1)
    full = Dataset(graphs, labels, list(task_types) if task_types else [])
    for t in range(full.n_tasks):
        if np.all(np.isnan(full.labels[:, t])):
            logger.warning("task %d has no observed labels", t)
    tr, va, te = split_indices(len(graphs), split_seed)
    return full.subset(tr), full.subset(va), full.subset(te)


def dataset_from_graphs(graphs: list[AttributedGraph], labels, task_types=None) -> Dataset:
    return Dataset(list(graphs), np.asarray(labels, dtype=np.float64).reshape(len(graphs), -1),
                   list(task_types) if task_types else [])
