"""Attributed undirected graphs and the attribute schema used for grouping."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DuplicateEdge, EndpointOutOfRange, GraphError, SelfLoop

ELEMENTS = ("H", "B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I")
# Reserved element label carried by the surrogate vertex of a collapsed ring.
SURROGATE_ELEMENT = "Ring*"
BOND_ORDERS = ("single", "double", "triple", "aromatic")


@dataclass(frozen=True)
class VertexAttr:
    element: str = "C"
    valence: int = 0
    formal_charge: int = 0
    extra: tuple = ()

    def __post_init__(self):
        if self.element not in ELEMENTS and self.element != SURROGATE_ELEMENT:
            raise GraphError(f"element {self.element!r} not in the registered alphabet")
        if self.valence < 0:
            raise GraphError("valence must be non-negative")
        object.__setattr__(self, "extra", tuple(self.extra))

    def key(self) -> tuple:
        return (self.element, self.valence, self.formal_charge) + self.extra

    def to_json(self) -> dict:
        return {
            "element": self.element,
            "valence": self.valence,
            "formal_charge": self.formal_charge,
            "extra": list(self.extra),
        }

    @classmethod
    def from_json(cls, obj) -> "VertexAttr":
        if isinstance(obj, str):
            return cls(obj)
        return cls(
            obj["element"],
            int(obj.get("valence", 0)),
            int(obj.get("formal_charge", 0)),
            tuple(obj.get("extra", ())),
        )


SURROGATE_ATTR = VertexAttr(SURROGATE_ELEMENT)


@dataclass(frozen=True)
class EdgeAttr:
    bond_order: str = "single"
    in_ring: bool = False

    def __post_init__(self):
        if self.bond_order not in BOND_ORDERS:
            raise GraphError(f"bond order {self.bond_order!r} not in {BOND_ORDERS}")

    def key(self) -> tuple:
        return (self.bond_order, bool(self.in_ring))

    def to_json(self) -> dict:
        return {"bond_order": self.bond_order, "in_ring": bool(self.in_ring)}

    @classmethod
    def from_json(cls, obj) -> "EdgeAttr":
        if isinstance(obj, str):
            return cls(obj)
        return cls(obj.get("bond_order", "single"), bool(obj.get("in_ring", False)))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


class AttributedGraph:
    """Undirected simple graph with discrete attributes and dense features.

    Instances are treated as immutable; the ``with_*`` methods return new
    graphs. Feature matrices always have ``n`` and ``m`` rows respectively,
    possibly with zero columns.
    """

    __slots__ = ("n", "edges", "vertex_attrs", "edge_attrs", "X_V", "X_E", "_incident")

    def __init__(self, n, edges, vertex_attrs, edge_attrs, X_V=None, X_E=None):
        self.n = int(n)
        self.edges = tuple(edges)
        self.vertex_attrs = tuple(vertex_attrs)
        self.edge_attrs = tuple(edge_attrs)
        m = len(self.edges)
        self.X_V = _frozen(np.zeros((self.n, 0)) if X_V is None else X_V)
        self.X_E = _frozen(np.zeros((m, 0)) if X_E is None else X_E)
        if self.X_V.ndim != 2 or self.X_V.shape[0] != self.n:
            raise GraphError(f"X_V must have {self.n} rows, got shape {self.X_V.shape}")
        if self.X_E.ndim != 2 or self.X_E.shape[0] != m:
            raise GraphError(f"X_E must have {m} rows, got shape {self.X_E.shape}")
        incident = [[] for _ in range(self.n)]
        for e, (u, v) in enumerate(self.edges):
            incident[u].append(e)
            incident[v].append(e)
        self._incident = tuple(tuple(x) for x in incident)

    @property
    def m(self) -> int:
        return len(self.edges)

    def degree(self, v: int) -> int:
        return len(self._incident[self._check_vertex(v)])

    def incident_edges(self, v: int) -> list[int]:
        return list(self._incident[self._check_vertex(v)])

    def neighbors(self, v: int) -> list[int]:
        out = []
        for e in self._incident[self._check_vertex(v)]:
            a, b = self.edges[e]
            out.append(b if a == v else a)
        return out

    def other_end(self, e: int, v: int) -> int:
        a, b = self.edges[e]
        return b if a == v else a

    def degrees(self) -> np.ndarray:
        return np.array([len(x) for x in self._incident], dtype=np.int64)

    def _check_vertex(self, v):
        if not 0 <= v < self.n:
            raise EndpointOutOfRange(f"vertex {v} out of range for n={self.n}")
        return v

    def with_features(self, X_V, X_E) -> "AttributedGraph":
        return AttributedGraph(self.n, self.edges, self.vertex_attrs, self.edge_attrs, X_V, X_E)

    def relabel(self, perm: Sequence[int]) -> "AttributedGraph":
        """Return the graph with vertex ``v`` renamed to ``perm[v]``.

        Edge order is kept, so edge rows of ``X_E`` stay aligned.
        """
        perm = np.asarray(perm)
        if sorted(perm.tolist()) != list(range(self.n)):
            raise GraphError("perm is not a permutation of the vertex ids")
        inv = np.argsort(perm)
        attrs = [self.vertex_attrs[i] for i in inv]
        edges = [(int(perm[u]), int(perm[v])) for u, v in self.edges]
        return AttributedGraph(self.n, edges, attrs, self.edge_attrs, self.X_V[inv], self.X_E)

    def __repr__(self):
        return (
            f"AttributedGraph(n={self.n}, m={self.m}, d_V={self.X_V.shape[1]}, "
            f"d_E={self.X_E.shape[1]})"
        )

    def to_json(self, labels=None) -> dict:
        obj = {
            "n": self.n,
            "edges": [[int(u), int(v)] for u, v in self.edges],
            "vertex_attrs": [a.to_json() for a in self.vertex_attrs],
            "edge_attrs": [a.to_json() for a in self.edge_attrs],
        }
        if labels is not None:
            obj["labels"] = [None if _is_missing(x) else float(x) for x in labels]
        return obj


def _is_missing(x) -> bool:
    return x is None or (isinstance(x, float) and np.isnan(x))


def build_graph(n, edges, vertex_attrs=None, edge_attrs=None) -> AttributedGraph:
    """Validate an edge list and build an :class:`AttributedGraph`.

    Missing attribute lists default to carbon vertices and single bonds.

    Raises
    ------
    EndpointOutOfRange, SelfLoop, DuplicateEdge
    """
    n = int(n)
    if n < 0:
        raise GraphError("vertex count must be non-negative")
    clean = []
    seen = set()
    for pair in edges:
        u, v = (int(x) for x in pair)
        if not (0 <= u < n and 0 <= v < n):
            raise EndpointOutOfRange(f"edge ({u}, {v}) has an endpoint outside 0..{n - 1}")
        if u == v:
            raise SelfLoop(f"self-loop on vertex {u}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise DuplicateEdge(f"duplicate edge ({u}, {v})")
        seen.add(key)
        clean.append((u, v))
    if vertex_attrs is None:
        vertex_attrs = [VertexAttr() for _ in range(n)]
    if edge_attrs is None:
        edge_attrs = [EdgeAttr() for _ in clean]
    vertex_attrs = [a if isinstance(a, VertexAttr) else VertexAttr.from_json(a) for a in vertex_attrs]
    edge_attrs = [a if isinstance(a, EdgeAttr) else EdgeAttr.from_json(a) for a in edge_attrs]
    if len(vertex_attrs) != n:
        raise GraphError(f"expected {n} vertex attributes, got {len(vertex_attrs)}")
    if len(edge_attrs) != len(clean):
        raise GraphError(f"expected {len(clean)} edge attributes, got {len(edge_attrs)}")
    return AttributedGraph(n, clean, vertex_attrs, edge_attrs)


def degree(g: AttributedGraph, v: int) -> int:
    return g.degree(v)


def incident_edges(g: AttributedGraph, v: int) -> list[int]:
    return g.incident_edges(v)


@dataclass
class AttributeSchema:
    """Frozen map from attribute tuples to group indices.

    Vertex groups are the observed tuples (sorted), then the reserved
    collapsed-ring group, then the reserved unknown group (``p - 1``).
    Edge groups are the observed tuples followed by unknown (``q - 1``).
    """

    vertex_groups: list = field(default_factory=list)
    edge_groups: list = field(default_factory=list)

    def __post_init__(self):
        self.vertex_groups = [tuple(k) for k in self.vertex_groups]
        self.edge_groups = [tuple(k) for k in self.edge_groups]
        self._v = {k: i for i, k in enumerate(self.vertex_groups)}
        self._e = {k: i for i, k in enumerate(self.edge_groups)}

    @classmethod
    def from_graphs(cls, graphs: Iterable[AttributedGraph]) -> "AttributeSchema":
        vkeys, ekeys = set(), set()
        for g in graphs:
            vkeys.update(a.key() for a in g.vertex_attrs)
            ekeys.update(a.key() for a in g.edge_attrs)
        vkeys.discard(SURROGATE_ATTR.key())
        return cls(sorted(vkeys, key=repr), sorted(ekeys, key=repr))

    @property
    def p(self) -> int:
        return len(self.vertex_groups) + 2

    @property
    def q(self) -> int:
        return len(self.edge_groups) + 1

    @property
    def surrogate_group(self) -> int:
        return self.p - 2

    @property
    def unknown_vertex_group(self) -> int:
        return self.p - 1

    @property
    def unknown_edge_group(self) -> int:
        return self.q - 1

    def vertex_index(self, attr: VertexAttr) -> int:
        if attr.element == SURROGATE_ELEMENT:
            return self.surrogate_group
        return self._v.get(attr.key(), self.unknown_vertex_group)

    def edge_index(self, attr: EdgeAttr) -> int:
        return self._e.get(attr.key(), self.unknown_edge_group)

    def to_json(self) -> dict:
        return {"vertex_groups": [list(k) for k in self.vertex_groups],
                "edge_groups": [list(k) for k in self.edge_groups]}

    @classmethod
    def from_json(cls, obj) -> "AttributeSchema":
        def untuple(k):
            return tuple(tuple(x) if isinstance(x, list) else x for x in k)
        return cls([untuple(k) for k in obj["vertex_groups"]],
                   [untuple(k) for k in obj["edge_groups"]])

    def fingerprint(self) -> str:
        import hashlib
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()[:16]


def initial_features(g: AttributedGraph, schema: AttributeSchema) -> AttributedGraph:
    """One-hot vertex and edge group encodings (widths ``p`` and ``q``)."""
    X_V = np.zeros((g.n, schema.p))
    X_V[np.arange(g.n), [schema.vertex_index(a) for a in g.vertex_attrs]] = 1.0
    X_E = np.zeros((g.m, schema.q))
    X_E[np.arange(g.m), [schema.edge_index(a) for a in g.edge_attrs]] = 1.0
    return g.with_features(X_V, X_E)


def graph_from_json(obj) -> tuple[AttributedGraph, list | None]:
    g = build_graph(obj["n"], obj["edges"], obj.get("vertex_attrs"), obj.get("edge_attrs"))
    labels = obj.get("labels")
    if labels is not None:
        labels = [np.nan if x is None else float(x) for x in labels]
    return g, labels


def read_jsonl(path) -> tuple[list[AttributedGraph], list]:
    graphs, labels = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                g, y = graph_from_json(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, GraphError) as exc:
                from .exceptions import ParseError
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            graphs.append(g)
            labels.append(y)
    return graphs, labels


def write_jsonl(path, graphs, labels=None) -> None:
    with open(path, "w") as fh:
        for i, g in enumerate(graphs):
            y = None if labels is None else labels[i]
            fh.write(json.dumps(g.to_json(y)) + "\n")
