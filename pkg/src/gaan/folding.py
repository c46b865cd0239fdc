"""Progressive margin folding.

A fold step moves every marginal leaf vertex (and its edge) into its
interior neighbour, then collapses every ring unit left with at most one
branch into a single surrogate vertex. Structure and features are kept
separate: :func:`plan_fold` derives the topology change and a set of sparse
operators, :func:`apply_plan` pushes features (numpy or autograd tensors)
through them. The plan depends only on topology and attributes, so a
model can compute it once per graph and reuse it every epoch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from . import autograd as ag
from .autograd import Tensor
from .graph import SURROGATE_ATTR, AttributedGraph
from .margin import MarginalStructure, RingSystem, find_cycle_basis, get_marginal_structure


@dataclass
class FoldParams:
    alpha: float | Tensor = 1.0
    beta: float | Tensor = 1.0


@dataclass
class RingCollapseParams:
    omega: float | Tensor = 1.0
    theta: float | Tensor = 1.0


@dataclass(frozen=True)
class HyperVertex:
    id: int
    members: frozenset
    born_level: int = 0


def _selection(rows, cols, shape) -> sp.csr_matrix:
    return sp.csr_matrix((np.ones(len(rows)), (np.asarray(rows, dtype=np.int64),
                                               np.asarray(cols, dtype=np.int64))), shape=shape)


def color_refinement(g: AttributedGraph) -> list[int]:
    """Stable Weisfeiler-Lehman colours of ``g``'s vertices.

    Colours are ranks of sorted signatures, hence invariant under vertex
    relabelling and independent of Python's hash seed.
    """
    def rank(sigs):
        table = {s: i for i, s in enumerate(sorted(set(sigs)))}
        return [table[s] for s in sigs]

    ekey = rank([repr(a.key()) for a in g.edge_attrs])
    colors = rank([repr(a.key()) for a in g.vertex_attrs])
    for _ in range(g.n):
        sigs = []
        for v in range(g.n):
            nb = sorted((ekey[e], colors[g.other_end(e, v)]) for e in g.incident_edges(v))
            sigs.append((colors[v], tuple(nb)))
        new = rank(sigs)
        if len(set(new)) == len(set(colors)):
            return new
        colors = new
    return colors


@dataclass
class FoldPlan:
    """Topology change of one fold step plus the operators moving features.

    ``mid`` refers to the graph after leaf trimming and before ring
    collapse. ``merged[k]`` lists the input vertices absorbed into output
    vertex ``k``; ``collapsed`` marks surrogate vertices.
    """

    n_in: int
    m_in: int
    graph: AttributedGraph
    keep_leaf: sp.csr_matrix  # n_mid x n_in
    leaf_v: sp.csr_matrix  # n_mid x n_in
    leaf_e: sp.csr_matrix  # n_mid x m_in
    edge_mid: sp.csr_matrix  # m_mid x m_in
    keep_ring: sp.csr_matrix  # n_out x n_mid
    ring_v: sp.csr_matrix  # n_out x n_mid
    ring_e: sp.csr_matrix  # n_out x m_mid
    edge_out: sp.csr_matrix  # m_out x m_in
    merged: list
    collapsed: list
    folded_leaves: frozenset
    marginal: MarginalStructure
    rings: RingSystem

    @property
    def is_identity(self) -> bool:
        return not self.folded_leaves and not any(self.collapsed)


def should_collapse_ring(g: AttributedGraph, unit) -> bool:
    """True iff at most one edge leaves the ring unit (a vertex set)."""
    unit = set(unit)
    branches = sum(1 for a, b in g.edges if (a in unit) != (b in unit))
    return branches <= 1


def collapse_ring(g: AttributedGraph, unit, rp: RingCollapseParams, members=None, level=0):
    """Surrogate feature and hypervertex for a collapsible ring unit.

    The feature is ``omega * sum(X_V over unit) + theta * sum(X_E over
    edges inside the unit)``.
    """
    assert should_collapse_ring(g, unit), "ring unit has more than one branch"
    unit = sorted(set(unit))
    inside = [e for e, (a, b) in enumerate(g.edges) if a in unit and b in unit]
    feature = rp.omega * g.X_V[unit].sum(axis=0) + rp.theta * g.X_E[inside].sum(axis=0)
    if members is None:
        members = [frozenset([v]) for v in range(g.n)]
    hv = HyperVertex(-1, frozenset().union(*(members[v] for v in unit)), level)
    return np.asarray(feature, dtype=np.float64), hv


def plan_fold(g: AttributedGraph, ms: MarginalStructure | None = None,
              rings: RingSystem | None = None, keys: Sequence | None = None) -> FoldPlan:
    """Work out one fold step on ``g``'s topology.

    ``keys`` orders vertices when two marginal leaves are adjacent (an
    isolated edge): the vertex with the smaller key survives, ties going to
    the smaller id. By default the keys are colour-refinement colours of
    ``g``.
    """
    if rings is None:
        rings = find_cycle_basis(g)
    if ms is None:
        ms = get_marginal_structure(g, rings)
    if keys is None:
        keys = color_refinement(g)
    n, m = g.n, g.m

    # leaf folding, all reads from the input features
    leaves = ms.marginal_leaf_vertices
    folded = {}
    for v in sorted(leaves):
        (e,) = g.incident_edges(v)
        u = g.other_end(e, v)
        if u in leaves and (keys[u], u) > (keys[v], v):
            continue  # v survives the isolated edge
        folded[v] = (u, e)
    mid_vertices = [v for v in range(n) if v not in folded]
    mid_index = {v: i for i, v in enumerate(mid_vertices)}
    removed_edges = {e for _, e in folded.values()}
    mid_edges = [e for e in range(m) if e not in removed_edges]
    n_mid, m_mid = len(mid_vertices), len(mid_edges)
    keep_leaf = _selection(range(n_mid), mid_vertices, (n_mid, n))
    fv = sorted(folded)
    leaf_v = _selection([mid_index[folded[v][0]] for v in fv], fv, (n_mid, n))
    leaf_e = _selection([mid_index[folded[v][0]] for v in fv], [folded[v][1] for v in fv], (n_mid, m))
    edge_mid = _selection(range(m_mid), mid_edges, (m_mid, m))
    mid_pairs = [(mid_index[g.edges[e][0]], mid_index[g.edges[e][1]]) for e in mid_edges]

    # ring collapse, evaluated on the trimmed graph
    units = []
    for vs in rings.unit_vertices:
        unit = {mid_index[v] for v in vs}
        branches = sum(1 for a, b in mid_pairs if (a in unit) != (b in unit))
        if branches <= 1:
            units.append(unit)
    owner = {}
    for k, unit in enumerate(units):
        for v in unit:
            owner[v] = k
    # output vertices ordered by smallest mid id they contain
    groups = {}
    for v in range(n_mid):
        groups.setdefault(("u", owner[v]) if v in owner else ("v", v), []).append(v)
    out_groups = sorted(groups.values(), key=min)
    out_of = {}
    for k, grp in enumerate(out_groups):
        for v in grp:
            out_of[v] = k
    n_out = len(out_groups)
    collapsed = [len(grp) > 1 or grp[0] in owner for grp in out_groups]
    rows_keep, cols_keep, rows_rv, cols_rv = [], [], [], []
    for k, grp in enumerate(out_groups):
        if collapsed[k]:
            rows_rv.extend([k] * len(grp))
            cols_rv.extend(grp)
        else:
            rows_keep.append(k)
            cols_keep.append(grp[0])
    keep_ring = _selection(rows_keep, cols_keep, (n_out, n_mid))
    ring_v = _selection(rows_rv, cols_rv, (n_out, n_mid))
    rows_re, cols_re, out_edges, out_pairs = [], [], [], []
    for j, (a, b) in enumerate(mid_pairs):
        if a in owner and b in owner and owner[a] == owner[b]:
            rows_re.append(out_of[a])
            cols_re.append(j)
        else:
            out_edges.append(mid_edges[j])
            out_pairs.append((out_of[a], out_of[b]))
    ring_e = _selection(rows_re, cols_re, (n_out, m_mid))
    edge_out = _selection(range(len(out_edges)), out_edges, (len(out_edges), m))

    merged = []
    for k, grp in enumerate(out_groups):
        absorbed = [mid_vertices[v] for v in grp]
        absorbed += [w for w, (u, _) in folded.items() if u in absorbed]
        merged.append(sorted(absorbed))
    attrs = [SURROGATE_ATTR if collapsed[k] else g.vertex_attrs[mid_vertices[grp[0]]]
             for k, grp in enumerate(out_groups)]
    new_graph = AttributedGraph(n_out, out_pairs, attrs, [g.edge_attrs[e] for e in out_edges])
    return FoldPlan(
        n_in=n, m_in=m, graph=new_graph,
        keep_leaf=keep_leaf, leaf_v=leaf_v, leaf_e=leaf_e, edge_mid=edge_mid,
        keep_ring=keep_ring, ring_v=ring_v, ring_e=ring_e, edge_out=edge_out,
        merged=merged, collapsed=collapsed, folded_leaves=frozenset(folded),
        marginal=ms, rings=rings,
    )


def apply_plan(plan: FoldPlan, X_V, X_E, fp: FoldParams, rp: RingCollapseParams):
    """Push features through a plan.

    Accepts numpy arrays or :class:`Tensor` inputs/params and returns the
    same kind (tensors whenever anything is a tensor).
    """
    use_tensor = any(isinstance(x, Tensor) for x in (X_V, X_E, fp.alpha, fp.beta, rp.omega, rp.theta))
    if not use_tensor:
        mid = plan.keep_leaf @ X_V + fp.alpha * (plan.leaf_v @ X_V) + fp.beta * (plan.leaf_e @ X_E)
        e_mid = plan.edge_mid @ X_E
        out = plan.keep_ring @ mid + rp.omega * (plan.ring_v @ mid) + rp.theta * (plan.ring_e @ e_mid)
        return np.asarray(out), np.asarray(plan.edge_out @ X_E)
    if plan.is_identity:
        return ag.as_tensor(X_V), ag.as_tensor(X_E)
    X_V, X_E = ag.as_tensor(X_V), ag.as_tensor(X_E)
    mid = ag.spmm(plan.keep_leaf, X_V)
    if plan.folded_leaves:
        mid = mid + fp.alpha * ag.spmm(plan.leaf_v, X_V) + fp.beta * ag.spmm(plan.leaf_e, X_E)
    out = ag.spmm(plan.keep_ring, mid)
    if any(plan.collapsed):
        e_mid = ag.spmm(plan.edge_mid, X_E)
        out = out + rp.omega * ag.spmm(plan.ring_v, mid) + rp.theta * ag.spmm(plan.ring_e, e_mid)
    return out, ag.spmm(plan.edge_out, X_E)


def _next_hypervertices(plan: FoldPlan, prev, level):
    hvs = []
    for k, absorbed in enumerate(plan.merged):
        if len(absorbed) == 1 and not plan.collapsed[k]:
            old = prev[absorbed[0]]
            hvs.append(HyperVertex(k, old.members, old.born_level))
        else:
            hvs.append(HyperVertex(k, frozenset().union(*(prev[v].members for v in absorbed)), level))
    return tuple(hvs)


def identity_hypervertices(n) -> tuple:
    return tuple(HyperVertex(v, frozenset([v]), 0) for v in range(n))


def fold_step(g: AttributedGraph, ms=None, rings=None, fp=None, rp=None,
              hypervertices=None, level=1, keys=None):
    """One folding iteration on a featured graph.

    Returns the folded graph (features included) and its hypervertices.
    With nothing to fold the input graph comes back unchanged.
    """
    fp = fp or FoldParams()
    rp = rp or RingCollapseParams()
    prev = hypervertices or identity_hypervertices(g.n)
    plan = plan_fold(g, ms, rings, keys)
    if plan.is_identity:
        return g, tuple(prev)
    X_V, X_E = apply_plan(plan, g.X_V, g.X_E, fp, rp)
    if isinstance(X_V, Tensor):
        X_V, X_E = X_V.data, X_E.data
    return plan.graph.with_features(X_V, X_E), _next_hypervertices(plan, prev, level)


@dataclass
class PyramidLevel:
    graph: AttributedGraph
    hypervertices: tuple
    marginal: MarginalStructure
    rings: RingSystem


@dataclass
class FoldingPyramid:
    levels: list = field(default_factory=list)

    @property
    def h_max(self) -> int:
        return len(self.levels) - 1

    def vertex_counts(self) -> list[int]:
        return [lv.graph.n for lv in self.levels]

    def fixpoint_level(self) -> int | None:
        """First level from which every later level is a pass-through."""
        for h, lv in enumerate(self.levels):
            if lv.marginal.marginal_leaf_vertices:
                continue
            if any(should_collapse_ring(lv.graph, vs) for vs in lv.rings.unit_vertices):
                continue
            return h
        return None


def member_keys(colors, graph: AttributedGraph, hypervertices) -> list:
    """Relabelling-invariant ordering keys for the vertices of a level."""
    return [(repr(graph.vertex_attrs[k].key()), tuple(sorted(colors[v] for v in hv.members)))
            for k, hv in enumerate(hypervertices)]


def plan_pyramid(g: AttributedGraph, h_max: int) -> list[FoldPlan]:
    """Fold plans for levels ``1..h_max``; features of ``g`` are ignored."""
    colors = color_refinement(g)
    hvs = identity_hypervertices(g.n)
    plans = []
    current = g
    for h in range(1, h_max + 1):
        plan = plan_fold(current, keys=member_keys(colors, current, hvs))
        plans.append(plan)
        if not plan.is_identity:
            hvs = _next_hypervertices(plan, hvs, h)
            current = plan.graph
    return plans


def build_pyramid(g: AttributedGraph, layer_params, feature_fn: Callable | None = None) -> FoldingPyramid:
    """Fold ``g`` once per entry of ``layer_params`` (``(FoldParams, RingCollapseParams)`` pairs).

    ``feature_fn(graph, h)`` transforms the features of level ``h - 1``
    before the fold producing level ``h``; the stored levels keep their
    untransformed features. Once nothing can fold, levels repeat.
    """
    colors = color_refinement(g)
    rings = find_cycle_basis(g)
    hvs = identity_hypervertices(g.n)
    levels = [PyramidLevel(g, hvs, get_marginal_structure(g, rings), rings)]
    current = g
    for h, (fp, rp) in enumerate(layer_params, start=1):
        featured = feature_fn(current, h) if feature_fn is not None else current
        plan = plan_fold(featured, levels[-1].marginal, levels[-1].rings,
                         keys=member_keys(colors, featured, hvs))
        if plan.is_identity:
            current = featured
        else:
            X_V, X_E = apply_plan(plan, featured.X_V, featured.X_E, fp, rp)
            if isinstance(X_V, Tensor):
                X_V, X_E = X_V.data, X_E.data
            current = plan.graph.with_features(X_V, X_E)
            hvs = _next_hypervertices(plan, hvs, h)
        rings = find_cycle_basis(current)
        levels.append(PyramidLevel(current, hvs, get_marginal_structure(current, rings), rings))
    return FoldingPyramid(levels)


def stack_one_hots(g: AttributedGraph) -> AttributedGraph:
    """Place vertex and edge features side by side (width ``d_V + d_E``).

    Folding adds edge rows into vertex rows; with raw one-hot encodings of
    different widths this keeps the two vocabularies in separate columns.
    """
    d_v, d_e = g.X_V.shape[1], g.X_E.shape[1]
    X_V = np.hstack([g.X_V, np.zeros((g.n, d_e))])
    X_E = np.hstack([np.zeros((g.m, d_v)), g.X_E])
    return g.with_features(X_V, X_E)


def expand_provenance(p: FoldingPyramid, level: int, v: int) -> frozenset:
    if not 0 <= level < len(p.levels):
        raise IndexError(f"level {level} outside 0..{p.h_max}")
    hvs = p.levels[level].hypervertices
    if not 0 <= v < len(hvs):
        raise IndexError(f"vertex {v} outside level {level} (n={len(hvs)})")
    return hvs[v].members


def pyramid_to_json(p: FoldingPyramid) -> dict:
    levels = []
    for h, lv in enumerate(p.levels):
        g = lv.graph
        levels.append({
            "level": h,
            "n": g.n,
            "edges": [[int(a), int(b)] for a, b in g.edges],
            "vertex_attrs": [a.to_json() for a in g.vertex_attrs],
            "members": [sorted(int(x) for x in hv.members) for hv in lv.hypervertices],
            "born_level": [hv.born_level for hv in lv.hypervertices],
            "marginal_vertices": sorted(int(v) for v in lv.marginal.marginal_vertices),
            "X_V": g.X_V.tolist(),
        })
    return {"h_max": p.h_max, "levels": levels}


def level_to_dot(p: FoldingPyramid, h: int) -> str:
    lv = p.levels[h]
    g = lv.graph
    marginal = lv.marginal.marginal_vertices
    lines = [f"digraph level{h} {{", "  edge [dir=none];", "  node [style=filled];"]
    for v, hv in enumerate(lv.hypervertices):
        shape = "doublecircle" if g.vertex_attrs[v].key() == SURROGATE_ATTR.key() else "circle"
        fill = "red" if v in marginal else "white"
        tip = ",".join(str(x) for x in sorted(hv.members))
        label = "R" if shape == "doublecircle" else g.vertex_attrs[v].element
        lines.append(f'  {v} [label="{label}{v}", shape={shape}, fillcolor={fill}, tooltip="{{{tip}}}"];')
    for a, b in g.edges:
        lines.append(f"  {a} -> {b};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def pyramid_to_dot(p: FoldingPyramid) -> list[str]:
    return [level_to_dot(p, h) for h in range(len(p.levels))]


def dump_json(p: FoldingPyramid, path) -> None:
    with open(path, "w") as fh:
        json.dump(pyramid_to_json(p), fh, indent=1)
