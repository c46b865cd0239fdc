"""Graph attribute convolution: per-group affine maps fused by a coefficient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import autograd as ag
from .autograd import Tensor
from .exceptions import DimensionMismatch
from .graph import AttributedGraph, AttributeSchema


@dataclass
class GacParams:
    """Weights of one GAC layer.

    ``W_V[i]`` / ``b_V[i]`` transform vertices of group ``i``; ``W_E`` and
    ``b_E`` do the same for edge groups. ``lam_raw`` is clamped to [0, 1]
    when read through :attr:`lam`.
    """

    W_V: list
    b_V: list
    W_E: list
    b_E: list
    lam_raw: Tensor

    @classmethod
    def init(cls, p, q, d_in_V, d_in_E, d_out, rng, lam=0.5, learnable_lambda=False):
        def uniform(fan_in, shape):
            bound = 1.0 / np.sqrt(max(fan_in, 1))
            return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)

        return cls(
            W_V=[uniform(d_in_V, (d_in_V, d_out)) for _ in range(p)],
            b_V=[Tensor(np.zeros(d_out), requires_grad=True) for _ in range(p)],
            W_E=[uniform(d_in_E, (d_in_E, d_out)) for _ in range(q)],
            b_E=[Tensor(np.zeros(d_out), requires_grad=True) for _ in range(q)],
            lam_raw=Tensor(np.float64(lam), requires_grad=learnable_lambda),
        )

    @property
    def d_out(self) -> int:
        return self.W_V[0].shape[1]

    @property
    def lam(self) -> Tensor:
        if self.lam_raw.requires_grad:
            return ag.clamp(self.lam_raw, 0.0, 1.0)
        return Tensor(np.clip(self.lam_raw.data, 0.0, 1.0))

    def parameters(self) -> dict:
        out = {}
        for kind in ("W_V", "b_V", "W_E", "b_E"):
            for i, t in enumerate(getattr(self, kind)):
                out[f"{kind}.{i}"] = t
        if self.lam_raw.requires_grad:
            out["lambda"] = self.lam_raw
        return out


def classify_elements(g: AttributedGraph, schema: AttributeSchema):
    """Group index of every vertex and every edge of ``g``."""
    vgroups = np.array([schema.vertex_index(a) for a in g.vertex_attrs], dtype=np.int64)
    egroups = np.array([schema.edge_index(a) for a in g.edge_attrs], dtype=np.int64)
    return vgroups, egroups


def incidence_mean(n, edges) -> sp.csr_matrix:
    """``n x m`` matrix averaging the rows of incident edges into each vertex.

    Isolated vertices get an all-zero row.
    """
    m = len(edges)
    if m == 0:
        return sp.csr_matrix((n, 0))
    edges = np.asarray(edges, dtype=np.int64)
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([np.arange(m), np.arange(m)])
    deg = np.bincount(rows, minlength=n).astype(np.float64)
    vals = 1.0 / deg[rows]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, m))


def grouped_affine(X: Tensor, groups, W, b) -> Tensor:
    """Apply ``X[r] @ W[g] + b[g]`` to each row ``r`` in group ``g``."""
    d_out = W[0].shape[1]
    if X.shape[1] != W[0].shape[0]:
        raise DimensionMismatch(f"feature width {X.shape[1]} != weight input width {W[0].shape[0]}")
    groups = np.asarray(groups)
    parts, order = [], []
    for gi in np.unique(groups):
        rows = np.flatnonzero(groups == gi)
        parts.append(ag.take_rows(X, rows) @ W[gi] + b[gi])
        order.append(rows)
    if not parts:
        return Tensor(np.zeros((0, d_out)))
    stacked = ag.concat_rows(parts)
    inverse = np.empty(len(groups), dtype=np.int64)
    inverse[np.concatenate(order)] = np.arange(len(groups))
    return ag.take_rows(stacked, inverse)


def gac_apply(X_V, X_E, vgroups, egroups, inc_mean, params: GacParams):
    """Tensor-level GAC on (possibly batched) graphs.

    Returns ``(X_V_out, X_E_out, X_fused)`` where the fused vertex feature is
    ``lam * X_V_out + (1 - lam) * mean of incident X_E_out``.
    """
    XV = grouped_affine(X_V, vgroups, params.W_V, params.b_V)
    XE = grouped_affine(X_E, egroups, params.W_E, params.b_E)
    lam = params.lam
    fused = lam * XV + (1.0 - lam) * ag.spmm(inc_mean, XE)
    return XV, XE, fused


def gac_forward(g: AttributedGraph, params: GacParams, schema: AttributeSchema):
    """GAC on a single graph's stored features. Activation is not applied."""
    if g.X_V.shape[1] != params.W_V[0].shape[0] or g.X_E.shape[1] != params.W_E[0].shape[0]:
        raise DimensionMismatch(
            f"graph widths ({g.X_V.shape[1]}, {g.X_E.shape[1]}) do not match "
            f"params ({params.W_V[0].shape[0]}, {params.W_E[0].shape[0]})"
        )
    if len(params.W_V) != schema.p or len(params.W_E) != schema.q:
        raise DimensionMismatch("parameter group counts do not match the schema")
    vgroups, egroups = classify_elements(g, schema)
    return gac_apply(Tensor(g.X_V), Tensor(g.X_E), vgroups, egroups,
                     incidence_mean(g.n, g.edges), params)
