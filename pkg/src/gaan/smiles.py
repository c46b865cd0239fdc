"""Parser for a small, bracket-free subset of SMILES.

Supported: organic-subset atoms ``B C N O P S F Cl Br I``, aromatic
``c n o s``, bonds ``- = #``, parenthesised branches and ring-closure digits
``1``-``9``. Hydrogens stay implicit, so graphs are heavy-atom only.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

from .exceptions import SmilesError, UnbalancedParenthesis, UnmatchedRingClosure, UnsupportedSymbol
from .graph import AttributedGraph, EdgeAttr, VertexAttr, build_graph
from .margin import ring_edge_flags

ALIPHATIC = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"}
AROMATIC = {"c": "C", "n": "N", "o": "O", "s": "S"}
BONDS = {"-": "single", "=": "double", "#": "triple"}
# valence contributed on top of the plain degree
BOND_EXCESS = {"single": 0, "double": 1, "triple": 2, "aromatic": 0}


class SmilesSyntaxError(SmilesError):
    """Well-tokenised input that does not form a valid molecule graph."""


@dataclass(frozen=True)
class SmilesToken:
    kind: str  # atom | bond | open_branch | close_branch | ring_closure
    payload: str
    offset: int


def tokenize(s: str) -> list[SmilesToken]:
    tokens = []
    data = s.encode("utf-8")
    i = 0
    while i < len(data):
        ch = chr(data[i]) if data[i] < 128 else None
        two = data[i:i + 2].decode("ascii", errors="replace")
        if two in ("Cl", "Br"):
            tokens.append(SmilesToken("atom", two, i))
            i += 2
            continue
        if ch is None:
            raise UnsupportedSymbol("non-ASCII byte", i)
        if ch in ALIPHATIC or ch in AROMATIC:
            tokens.append(SmilesToken("atom", ch, i))
        elif ch in BONDS:
            tokens.append(SmilesToken("bond", ch, i))
        elif ch == "(":
            tokens.append(SmilesToken("open_branch", ch, i))
        elif ch == ")":
            tokens.append(SmilesToken("close_branch", ch, i))
        elif ch in "123456789":
            tokens.append(SmilesToken("ring_closure", ch, i))
        else:
            raise UnsupportedSymbol(f"unsupported symbol {ch!r}", i)
        i += 1
    return tokens


def parse_smiles(s: str) -> AttributedGraph:
    """Parse ``s`` into a heavy-atom :class:`AttributedGraph`.

    Vertex attributes carry the element and a valence equal to the degree
    plus the declared bond-order excess. Edges between two aromatic atoms
    default to ``aromatic``; ``in_ring`` is set for every edge on a cycle.

    Raises
    ------
    UnbalancedParenthesis, UnmatchedRingClosure, UnsupportedSymbol
        With the byte offset of the problem in ``.position``.
    """
    tokens = tokenize(s)
    if not tokens:
        raise SmilesSyntaxError("empty SMILES", 0)
    elements, aromatic = [], []
    edges, orders = [], []
    seen_pairs = set()
    branch_stack = []
    open_rings = {}  # digit -> (atom, bond order or None, offset)
    prev = None
    pending_bond = None  # (order, offset)

    def add_bond(a, b, order, offset):
        key = (min(a, b), max(a, b))
        if a == b or key in seen_pairs:
            raise SmilesSyntaxError("ring closure duplicates a bond", offset)
        seen_pairs.add(key)
        if order is None:
            order = "aromatic" if aromatic[a] and aromatic[b] else "single"
        edges.append((a, b))
        orders.append(order)

    for tok in tokens:
        if tok.kind == "atom":
            idx = len(elements)
            elements.append(AROMATIC.get(tok.payload, tok.payload))
            aromatic.append(tok.payload in AROMATIC)
            if prev is not None:
                add_bond(prev, idx, pending_bond[0] if pending_bond else None, tok.offset)
            elif pending_bond is not None:
                raise SmilesSyntaxError("bond without a preceding atom", pending_bond[1])
            pending_bond = None
            prev = idx
        elif tok.kind == "bond":
            if pending_bond is not None or prev is None:
                raise SmilesSyntaxError("misplaced bond symbol", tok.offset)
            pending_bond = (BONDS[tok.payload], tok.offset)
        elif tok.kind == "open_branch":
            if prev is None or pending_bond is not None:
                raise SmilesSyntaxError("branch must follow an atom", tok.offset)
            branch_stack.append((prev, tok.offset))
        elif tok.kind == "close_branch":
            if not branch_stack:
                raise UnbalancedParenthesis("unmatched ')'", tok.offset)
            if pending_bond is not None:
                raise SmilesSyntaxError("dangling bond", pending_bond[1])
            prev, _ = branch_stack.pop()
        else:
            if prev is None:
                raise SmilesSyntaxError("ring closure before any atom", tok.offset)
            order = pending_bond[0] if pending_bond else None
            pending_bond = None
            digit = tok.payload
            if digit in open_rings:
                other, other_order, _ = open_rings.pop(digit)
                if order is not None and other_order is not None and order != other_order:
                    raise SmilesSyntaxError("conflicting ring-closure bond orders", tok.offset)
                add_bond(other, prev, order or other_order, tok.offset)
            else:
                open_rings[digit] = (prev, order, tok.offset)
    if pending_bond is not None:
        raise SmilesSyntaxError("dangling bond", pending_bond[1])
    if branch_stack:
        raise UnbalancedParenthesis("unclosed '('", branch_stack[-1][1])
    if open_rings:
        raise UnmatchedRingClosure("unclosed ring bond", min(o for _, _, o in open_rings.values()))

    n = len(elements)
    provisional = build_graph(n, edges)
    in_ring = ring_edge_flags(provisional)
    valence = [provisional.degree(v) for v in range(n)]
    for (a, b), order in zip(edges, orders):
        valence[a] += BOND_EXCESS[order]
        valence[b] += BOND_EXCESS[order]
    return build_graph(
        n,
        edges,
        [VertexAttr(el, val) for el, val in zip(elements, valence)],
        [EdgeAttr(o, r) for o, r in zip(orders, in_ring)],
    )


_BOND_SYMBOL = {"single": "", "double": "=", "triple": "#", "aromatic": ""}


def to_smiles(g: AttributedGraph) -> str:
    """Write a connected heavy-atom graph back to the supported subset.

    Depth-first from vertex 0; non-tree edges become ring closures using the
    lowest free digit. Atoms with an aromatic bond are written lowercase.

    Raises
    ------
    SmilesError
        For disconnected graphs, unsupported aromatic elements or more than
        nine simultaneously open rings.
    """
    if g.n == 0:
        raise SmilesSyntaxError("empty graph", 0)
    aromatic = [any(g.edge_attrs[e].bond_order == "aromatic" for e in g.incident_edges(v))
                for v in range(g.n)]
    lower = {v: k for k, v in AROMATIC.items()}

    def symbol(v):
        el = g.vertex_attrs[v].element
        if not aromatic[v]:
            return el
        if el not in lower:
            raise SmilesSyntaxError(f"element {el} cannot be aromatic in this subset", 0)
        return lower[el]

    def bond(e, a, b):
        order = g.edge_attrs[e].bond_order
        if order == "single" and aromatic[a] and aromatic[b]:
            return "-"
        return _BOND_SYMBOL[order]

    # pass 1: DFS tree, visit order
    order, seen, tree = {}, [False] * g.n, set()
    children = [[] for _ in range(g.n)]
    stack = [(0, -1)]
    while stack:
        v, via = stack.pop()
        if seen[v]:
            continue
        seen[v] = True
        order[v] = len(order)
        if via >= 0:
            tree.add(via)
            children[g.other_end(via, v)].append((via, v))
        for e in reversed(g.incident_edges(v)):
            w = g.other_end(e, v)
            if not seen[w]:
                stack.append((w, e))
    if len(order) != g.n:
        raise SmilesSyntaxError("graph is disconnected", 0)

    # pass 2: emit
    free = list(range(1, 10))
    open_digit = {}
    out = []

    def emit(v):
        out.append(symbol(v))
        closures = sorted((e for e in g.incident_edges(v) if e not in tree),
                          key=lambda e: order[g.other_end(e, v)])
        for e in closures:
            w = g.other_end(e, v)
            if e in open_digit:
                d = open_digit.pop(e)
                out.append(str(d))
                free.append(d)
                free.sort()
            elif order[w] > order[v]:
                if not free:
                    raise SmilesSyntaxError("more than nine open rings", 0)
                d = free.pop(0)
                open_digit[e] = d
                out.append(bond(e, v, w) + str(d))
        kids = sorted(children[v], key=lambda ew: order[ew[1]])
        for i, (e, w) in enumerate(kids):
            last = i == len(kids) - 1
            if not last:
                out.append("(")
            out.append(bond(e, v, w))
            emit(w)
            if not last:
                out.append(")")

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * g.n + 100))
    try:
        emit(0)
    finally:
        sys.setrecursionlimit(limit)
    return "".join(out)
