"""Cycle detection and marginal-structure classification."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .graph import AttributedGraph


@dataclass(frozen=True)
class RingSystem:
    """Fundamental cycle basis of a graph grouped into collapse units.

    ``cycles[i]`` is a closed walk of distinct vertices (first and last are
    adjacent), ``cycle_edges[i]`` the edge ids it uses and ``unit_of[i]`` the
    unit it belongs to. Cycles sharing an edge, directly or transitively, live
    in the same unit.
    """

    cycles: tuple = ()
    cycle_edges: tuple = ()
    unit_of: tuple = ()
    unit_vertices: tuple = ()
    unit_edges: tuple = ()

    @property
    def ring_vertices(self) -> frozenset:
        return frozenset().union(*self.unit_vertices) if self.unit_vertices else frozenset()

    @property
    def ring_edges(self) -> frozenset:
        return frozenset().union(*self.unit_edges) if self.unit_edges else frozenset()

    @property
    def n_units(self) -> int:
        return len(self.unit_vertices)

    def units_of_vertex(self, v) -> list[int]:
        return [u for u, vs in enumerate(self.unit_vertices) if v in vs]


def connected_components(g: AttributedGraph) -> list[int]:
    """Component label per vertex, labels assigned in order of smallest vertex."""
    comp = [-1] * g.n
    label = 0
    for s in range(g.n):
        if comp[s] != -1:
            continue
        comp[s] = label
        stack = [s]
        while stack:
            v = stack.pop()
            for w in g.neighbors(v):
                if comp[w] == -1:
                    comp[w] = label
                    stack.append(w)
        label += 1
    return comp


def find_cycle_basis(g: AttributedGraph) -> RingSystem:
    """Fundamental cycle basis from a BFS spanning forest.

    Roots and traversal follow vertex-id order, so the result is
    deterministic. The basis has ``m - n + c`` cycles.
    """
    parent = [-1] * g.n
    parent_edge = [-1] * g.n
    depth = [-1] * g.n
    tree_edges = set()
    for root in range(g.n):
        if depth[root] != -1:
            continue
        depth[root] = 0
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for e in g.incident_edges(v):
                w = g.other_end(e, v)
                if depth[w] == -1:
                    depth[w] = depth[v] + 1
                    parent[w] = v
                    parent_edge[w] = e
                    tree_edges.add(e)
                    queue.append(w)

    cycles, cycle_edges = [], []
    for e, (u, v) in enumerate(g.edges):
        if e in tree_edges:
            continue
        # walk both endpoints up to their lowest common ancestor
        left, right = [u], [v]
        ledges, redges = [], []
        a, b = u, v
        while a != b:
            if depth[a] >= depth[b]:
                ledges.append(parent_edge[a])
                a = parent[a]
                left.append(a)
            else:
                redges.append(parent_edge[b])
                b = parent[b]
                right.append(b)
        walk = left + right[-2::-1]
        cycles.append(tuple(walk))
        cycle_edges.append(frozenset(ledges + redges + [e]))

    # union-find over cycles sharing an edge
    uf = list(range(len(cycles)))

    def find(i):
        while uf[i] != i:
            uf[i] = uf[uf[i]]
            i = uf[i]
        return i

    owner = {}
    for i, es in enumerate(cycle_edges):
        for e in es:
            if e in owner:
                ri, rj = find(i), find(owner[e])
                if ri != rj:
                    uf[max(ri, rj)] = min(ri, rj)
            else:
                owner[e] = i

    roots = {}
    unit_of = []
    for i in range(len(cycles)):
        r = find(i)
        if r not in roots:
            roots[r] = len(roots)
        unit_of.append(roots[r])
    unit_vertices = [set() for _ in roots]
    unit_edges = [set() for _ in roots]
    for i, u in enumerate(unit_of):
        unit_vertices[u].update(cycles[i])
        unit_edges[u].update(cycle_edges[i])
    # chords whose both ends sit in a unit belong to it as well
    for e, (a, b) in enumerate(g.edges):
        for u, vs in enumerate(unit_vertices):
            if a in vs and b in vs:
                unit_edges[u].add(e)
    return RingSystem(
        cycles=tuple(cycles),
        cycle_edges=tuple(cycle_edges),
        unit_of=tuple(unit_of),
        unit_vertices=tuple(frozenset(s) for s in unit_vertices),
        unit_edges=tuple(frozenset(s) for s in unit_edges),
    )


def ring_edge_flags(g: AttributedGraph) -> list[bool]:
    """True for every edge lying on some cycle (i.e. not a bridge)."""
    on_cycle = set()
    for es in find_cycle_basis(g).cycle_edges:
        on_cycle.update(es)
    return [e in on_cycle for e in range(g.m)]


@dataclass(frozen=True)
class MarginalStructure:
    marginal_leaf_vertices: frozenset = field(default_factory=frozenset)
    marginal_leaf_edges: frozenset = field(default_factory=frozenset)
    marginal_ring_vertices: frozenset = field(default_factory=frozenset)
    marginal_ring_edges: frozenset = field(default_factory=frozenset)

    @property
    def marginal_vertices(self) -> frozenset:
        return self.marginal_leaf_vertices | self.marginal_ring_vertices

    def is_empty(self) -> bool:
        return not (self.marginal_leaf_vertices or self.marginal_ring_vertices)


def get_marginal_structure(g: AttributedGraph, rings: RingSystem | None = None) -> MarginalStructure:
    """Classify vertices and edges of ``g`` as marginal.

    Outside rings a degree-1 vertex is marginal together with its edge.
    Inside a ring unit a degree-2 vertex is marginal, and a unit edge is
    marginal when both of its endpoints are.
    """
    if rings is None:
        rings = find_cycle_basis(g)
    ring_vertices = rings.ring_vertices
    leaf_v, leaf_e = set(), set()
    for v in range(g.n):
        if g.degree(v) == 1:
            assert v not in ring_vertices, "ring vertex with degree 1"
            leaf_v.add(v)
            leaf_e.update(g.incident_edges(v))
    ring_v = {v for v in ring_vertices if g.degree(v) == 2}
    ring_e = set()
    for vs, es in zip(rings.unit_vertices, rings.unit_edges):
        for e in es:
            a, b = g.edges[e]
            if a in ring_v and b in ring_v and a in vs and b in vs:
                ring_e.add(e)
    return MarginalStructure(frozenset(leaf_v), frozenset(leaf_e), frozenset(ring_v), frozenset(ring_e))


def marginal_dot(g: AttributedGraph, ms: MarginalStructure, name="G") -> str:
    """Graphviz source with marginal vertices filled red and marginal edges drawn red."""
    lines = [f"graph {name} {{", "  node [shape=circle, style=filled, fillcolor=white];"]
    for v in range(g.n):
        color = "red" if v in ms.marginal_vertices else "white"
        lines.append(f'  {v} [label="{g.vertex_attrs[v].element}{v}", fillcolor={color}];')
    marginal_edges = ms.marginal_leaf_edges | ms.marginal_ring_edges
    for e, (a, b) in enumerate(g.edges):
        attr = " [color=red]" if e in marginal_edges else ""
        lines.append(f"  {a} -- {b}{attr};")
    lines.append("}")
    return "\n".join(lines) + "\n"
