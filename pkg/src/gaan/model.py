"""The full network: encoder, GAC/BN/tanh/PMF combos, pooling and task head."""

from __future__ import annotations

import hashlib
import json
import re
from collections import OrderedDict
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from . import autograd as ag
from .autograd import Tensor
from .exceptions import ArchitectureError, CheckpointMismatch
from .folding import FoldParams, RingCollapseParams, apply_plan, plan_pyramid
from .gac import GacParams, classify_elements, gac_apply, incidence_mean
from .graph import AttributedGraph, AttributeSchema, initial_features
from .nn import (REGRESSION, BatchNorm, autoencode_features, batch_norm, dense_init,
                 multitask_loss, pool_matrix)

DEFAULT_ARCH = "GAC(32)-PMF-GAC(64)-PMF-GAC(128)-PMF-GAC(256)-PMF-GMP-Tanh"
CHECKPOINT_VERSION = 1

_GAC = re.compile(r"^GAC\((\d+)\)$")


@dataclass(frozen=True)
class Combo:
    width: int
    fold: bool


def parse_arch(arch: str):
    """Parse an architecture string into ``(combos, final_tanh)``.

    The grammar is ``(GAC(k) [PMF])+ GMP [Tanh]`` with ``-`` separators.
    """
    tokens = [t.strip() for t in arch.split("-")]
    combos = []
    i = 0
    while i < len(tokens) and tokens[i].startswith("GAC"):
        match = _GAC.match(tokens[i])
        if not match or int(match.group(1)) <= 0:
            raise ArchitectureError("malformed GAC token", tokens[i])
        fold = i + 1 < len(tokens) and tokens[i + 1] == "PMF"
        combos.append(Combo(int(match.group(1)), fold))
        i += 2 if fold else 1
    if not combos:
        raise ArchitectureError("architecture must start with a GAC token", tokens[0] if tokens else "")
    if i >= len(tokens) or tokens[i] != "GMP":
        raise ArchitectureError("expected GMP", tokens[i] if i < len(tokens) else "<end>")
    i += 1
    final_tanh = i < len(tokens) and tokens[i] == "Tanh"
    if final_tanh:
        i += 1
    if i != len(tokens):
        raise ArchitectureError("unexpected token", tokens[i])
    return combos, final_tanh


@dataclass
class ModelConfig:
    arch: str = DEFAULT_ARCH
    lam: float = 0.5
    learnable_lambda: bool = False
    lr: float = 0.001
    batch_size: int = 64
    max_epochs: int = 200
    early_stop_patience: int = 30
    seed: int = 0
    encoder_dim: int = 16
    recon_weight: float = 0.0
    fold_init: float = 1.0
    standardize_targets: bool = True

    def __post_init__(self):
        parse_arch(self.arch)

    @property
    def h_max(self) -> int:
        return sum(c.fold for c in parse_arch(self.arch)[0])

    def to_json(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()[:16]


def _block_diag(mats) -> sp.csr_matrix:
    """Block-diagonal CSR assembled directly from the CSR arrays of ``mats``."""
    if not mats:
        return sp.csr_matrix((0, 0))
    data, indices, indptr = [], [], [np.zeros(1, dtype=np.int64)]
    rows = cols = nnz = 0
    for M in mats:
        M = M if sp.isspmatrix_csr(M) else sp.csr_matrix(M)
        data.append(M.data)
        indices.append(M.indices.astype(np.int64) + cols)
        indptr.append(M.indptr[1:].astype(np.int64) + nnz)
        rows += M.shape[0]
        cols += M.shape[1]
        nnz += M.nnz
    return sp.csr_matrix((np.concatenate(data), np.concatenate(indices), np.concatenate(indptr)),
                         shape=(rows, cols))


@dataclass
class LevelInfo:
    n: int
    m: int
    vgroups: np.ndarray
    egroups: np.ndarray
    inc_mean: sp.csr_matrix


def _level_info(g: AttributedGraph, schema) -> LevelInfo:
    vg, eg = classify_elements(g, schema)
    return LevelInfo(g.n, g.m, vg, eg, incidence_mean(g.n, g.edges))


@dataclass
class PreparedGraph:
    """Level-0 features plus the cached fold plans of one graph."""

    X_V: np.ndarray
    X_E: np.ndarray
    levels: list
    plans: list


@dataclass
class BatchPlan:
    keep_leaf: sp.csr_matrix
    leaf_v: sp.csr_matrix
    leaf_e: sp.csr_matrix
    edge_mid: sp.csr_matrix
    keep_ring: sp.csr_matrix
    ring_v: sp.csr_matrix
    ring_e: sp.csr_matrix
    edge_out: sp.csr_matrix
    folded_leaves: bool
    collapsed: list
    is_identity: bool


_PLAN_MATS = ("keep_leaf", "leaf_v", "leaf_e", "edge_mid", "keep_ring", "ring_v", "ring_e", "edge_out")


@dataclass
class Batch:
    X_V: np.ndarray
    X_E: np.ndarray
    levels: list
    plans: list
    pool: sp.csr_matrix

    @classmethod
    def from_prepared(cls, items):
        n_levels = len(items[0].levels)
        levels = []
        for k in range(n_levels):
            infos = [it.levels[k] for it in items]
            levels.append(LevelInfo(
                sum(i.n for i in infos), sum(i.m for i in infos),
                np.concatenate([i.vgroups for i in infos]),
                np.concatenate([i.egroups for i in infos]),
                _block_diag([i.inc_mean for i in infos]),
            ))
        plans = []
        for k in range(n_levels - 1):
            ps = [it.plans[k] for it in items]
            mats = {name: _block_diag([getattr(p, name) for p in ps]) for name in _PLAN_MATS}
            folded = any(bool(p.folded_leaves) for p in ps)
            collapsed = [any(any(p.collapsed) for p in ps)]
            plans.append(BatchPlan(**mats, folded_leaves=folded, collapsed=collapsed,
                                   is_identity=not folded and not collapsed[0]))
        return cls(
            X_V=np.concatenate([it.X_V for it in items]),
            X_E=np.concatenate([it.X_E for it in items]),
            levels=levels,
            plans=plans,
            pool=pool_matrix([lv.n for lv in (it.levels[-1] for it in items)]),
        )


class GAANModel:
    """Parameters and forward pass of the network.

    Parameters live in plain attributes; :meth:`parameters` exposes them as
    an ordered ``name -> Tensor`` dict whose name prefix identifies the
    parameter class (``gac0.W_V.2``, ``pmf1.alpha``, ``bn0.gamma``, ...).
    """

    BATCH_CACHE_SIZE = 16

    def __init__(self, config: ModelConfig, schema: AttributeSchema, task_types, rng=None):
        self.config = config
        self.schema = schema
        self.task_types = list(task_types)
        self.combos, self.final_tanh = parse_arch(config.arch)
        rng = np.random.default_rng(config.seed) if rng is None else rng
        p, q = schema.p, schema.q
        self.enc = dense_init(rng, p, config.encoder_dim)
        self.dec = dense_init(rng, config.encoder_dim, p)
        self.gac, self.bn, self.fold, self.ring = [], [], [], []
        d_v, d_e = config.encoder_dim, q
        for combo in self.combos:
            self.gac.append(GacParams.init(p, q, d_v, d_e, combo.width, rng,
                                           config.lam, config.learnable_lambda))
            self.bn.append(BatchNorm(combo.width))
            if combo.fold:
                c = config.fold_init
                self.fold.append(FoldParams(Tensor(c, requires_grad=True), Tensor(c, requires_grad=True)))
                self.ring.append(RingCollapseParams(Tensor(c, requires_grad=True), Tensor(c, requires_grad=True)))
            d_v = d_e = combo.width
        self.head = dense_init(rng, d_v, len(self.task_types))
        self.target_mean = np.zeros(len(self.task_types))
        self.target_scale = np.ones(len(self.task_types))
        self._cache = {}
        self._batches = OrderedDict()

    @property
    def h_max(self) -> int:
        return len(self.fold)

    def parameters(self) -> dict:
        out = {"enc.W": self.enc[0], "enc.b": self.enc[1],
               "dec.W": self.dec[0], "dec.b": self.dec[1]}
        for i, gp in enumerate(self.gac):
            for k, t in gp.parameters().items():
                out[f"gac{i}.{k}"] = t
            out[f"bn{i}.gamma"] = self.bn[i].gamma
            out[f"bn{i}.shift"] = self.bn[i].shift
        for i, (fp, rp) in enumerate(zip(self.fold, self.ring)):
            out[f"pmf{i}.alpha"] = fp.alpha
            out[f"pmf{i}.beta"] = fp.beta
            out[f"pmf{i}.omega"] = rp.omega
            out[f"pmf{i}.theta"] = rp.theta
        out["head.W"], out["head.b"] = self.head
        return out

    def zero_grad(self):
        for t in self.parameters().values():
            t.grad = None

    # structure --------------------------------------------------------------
    def prepare(self, g: AttributedGraph) -> PreparedGraph:
        """Level-0 one-hot features and fold plans, cached per graph object."""
        key = id(g)
        hit = self._cache.get(key)
        if hit is not None and hit[0] is g:
            return hit[1]
        g0 = initial_features(g, self.schema)
        plans = plan_pyramid(g, self.h_max)
        levels = [_level_info(g, self.schema)] + [_level_info(p.graph, self.schema) for p in plans]
        prepared = PreparedGraph(g0.X_V, g0.X_E, levels, plans)
        self._cache[key] = (g, prepared)
        return prepared

    def make_batch(self, graphs) -> Batch:
        """Block-diagonal batch; recently built batches are reused."""
        graphs = tuple(graphs)
        key = tuple(id(g) for g in graphs)
        hit = self._batches.get(key)
        if hit is not None and all(a is b for a, b in zip(hit[0], graphs)):
            self._batches.move_to_end(key)
            return hit[1]
        batch = Batch.from_prepared([self.prepare(g) for g in graphs])
        self._batches[key] = (graphs, batch)
        if len(self._batches) > self.BATCH_CACHE_SIZE:
            self._batches.popitem(last=False)
        return batch

    # forward ------------------------------------------------------------------
    def forward(self, batch: Batch, training: bool, update_stats: bool = True):
        """Return ``(outputs, reconstruction_mse)`` for a batch.

        Outputs are logits for classification tasks and standardised values
        for regression tasks.
        """
        X0 = Tensor(batch.X_V)
        Z, recon = autoencode_features(X0, self.enc, self.dec)
        diff = recon - X0
        recon_mse = (diff * diff).mean()
        XV, XE = Z, Tensor(batch.X_E)
        level = 0
        fold_i = 0
        for i, combo in enumerate(self.combos):
            info = batch.levels[level]
            _, XE_out, fused = gac_apply(XV, XE, info.vgroups, info.egroups, info.inc_mean, self.gac[i])
            XV = ag.tanh(batch_norm(fused, self.bn[i].gamma, self.bn[i].shift, self.bn[i],
                                    training, update_stats))
            XE = ag.tanh(XE_out)
            if combo.fold:
                XV, XE = apply_plan(batch.plans[level], XV, XE, self.fold[fold_i], self.ring[fold_i])
                level += 1
                fold_i += 1
        pooled = ag.spmm(batch.pool, XV)
        if self.final_tanh:
            pooled = ag.tanh(pooled)
        out = pooled @ self.head[0] + self.head[1]
        return out, recon_mse

    def loss(self, batch: Batch, labels, training=True, update_stats=True) -> Tensor:
        out, recon = self.forward(batch, training, update_stats)
        y = self.scale_targets(labels)
        loss = multitask_loss(out, y, self.task_types)
        if self.config.recon_weight:
            loss = loss + self.config.recon_weight * recon
        return loss

    def scale_targets(self, labels):
        labels = np.asarray(labels, dtype=np.float64).reshape(-1, len(self.task_types))
        return (labels - self.target_mean) / self.target_scale

    def fit_target_scaling(self, labels):
        labels = np.asarray(labels, dtype=np.float64).reshape(-1, len(self.task_types))
        for t, kind in enumerate(self.task_types):
            col = labels[:, t]
            col = col[~np.isnan(col)]
            if kind == REGRESSION and self.config.standardize_targets and col.size:
                self.target_mean[t] = col.mean()
                self.target_scale[t] = col.std() if col.std() > 0 else 1.0
            else:
                self.target_mean[t], self.target_scale[t] = 0.0, 1.0

    def decision_function(self, graphs, batch_size=None) -> np.ndarray:
        """Eval-mode raw outputs: logits / regression values in label units."""
        batch_size = batch_size or self.config.batch_size
        outs = []
        for start in range(0, len(graphs), batch_size):
            out, _ = self.forward(self.make_batch(graphs[start:start + batch_size]), training=False)
            outs.append(out.data)
        raw = np.concatenate(outs) if outs else np.zeros((0, len(self.task_types)))
        return raw * self.target_scale + self.target_mean

    # persistence -------------------------------------------------------------
    def snapshot(self) -> dict:
        snap = {k: t.data.copy() for k, t in self.parameters().items()}
        for i, bn in enumerate(self.bn):
            snap[f"bn{i}.running_mean"] = bn.running_mean.copy()
            snap[f"bn{i}.running_var"] = bn.running_var.copy()
        return snap

    def restore(self, snap: dict):
        params = self.parameters()
        for k, t in params.items():
            t.data = np.array(snap[k], dtype=np.float64).reshape(t.data.shape)
        for i, bn in enumerate(self.bn):
            bn.running_mean = np.array(snap[f"bn{i}.running_mean"], dtype=np.float64)
            bn.running_var = np.array(snap[f"bn{i}.running_var"], dtype=np.float64)

    def fingerprint(self) -> str:
        payload = json.dumps({"config": self.config.to_json(), "schema": self.schema.to_json(),
                              "tasks": self.task_types}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_checkpoint(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "config": self.config.to_json(),
            "schema": self.schema.to_json(),
            "task_types": self.task_types,
            "target_mean": self.target_mean.tolist(),
            "target_scale": self.target_scale.tolist(),
            "params": {k: v.tolist() for k, v in self.snapshot().items()},
            "hash": self.fingerprint(),
        }

    @classmethod
    def from_checkpoint(cls, obj: dict) -> "GAANModel":
        if obj.get("version") != CHECKPOINT_VERSION:
            raise CheckpointMismatch(f"unsupported checkpoint version {obj.get('version')!r}")
        model = cls(ModelConfig(**obj["config"]), AttributeSchema.from_json(obj["schema"]), obj["task_types"])
        if model.fingerprint() != obj.get("hash"):
            raise CheckpointMismatch("checkpoint hash does not match its config and schema")
        model.restore(obj["params"])
        model.target_mean = np.array(obj["target_mean"])
        model.target_scale = np.array(obj["target_scale"])
        return model

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_checkpoint(), fh)

    @classmethod
    def load(cls, path) -> "GAANModel":
        with open(path) as fh:
            return cls.from_checkpoint(json.load(fh))


def forward_model(graphs, model: GAANModel, mode: str = "eval") -> np.ndarray:
    """Per-graph task outputs of ``model`` (``mode`` is ``"train"`` or ``"eval"``)."""
    out, _ = model.forward(model.make_batch(list(graphs)), training=(mode == "train"))
    return out.data * model.target_scale + model.target_mean
