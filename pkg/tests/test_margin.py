import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaan.graph import build_graph
from gaan.margin import (connected_components, find_cycle_basis, get_marginal_structure,
                         marginal_dot, ring_edge_flags)
from gaan.smiles import parse_smiles

from builders import (brute_force_components, cycle_graph, edge_mask, gf2_rank, path_graph,
                      random_connected_graph, ring_with_pendant, to_networkx)


def _check_basis(g):
    rs = find_cycle_basis(g)
    c = brute_force_components(g.n, g.edges)
    assert len(rs.cycles) == g.m - g.n + c
    masks = [edge_mask(es) for es in rs.cycle_edges]
    assert gf2_rank(masks) == len(masks)
    for walk, es in zip(rs.cycles, rs.cycle_edges):
        assert len(set(walk)) == len(walk) == len(es)
        pairs = {frozenset(g.edges[e]) for e in es}
        ring = {frozenset((walk[i], walk[(i + 1) % len(walk)])) for i in range(len(walk))}
        assert pairs == ring
    return rs


def test_tree_has_no_cycles():
    rs = find_cycle_basis(path_graph(6))
    assert rs.cycles == () and rs.n_units == 0


def test_single_ring():
    rs = _check_basis(cycle_graph(6))
    assert rs.n_units == 1 and rs.unit_vertices[0] == frozenset(range(6))


def test_fused_rings_merge_into_one_unit():
    rs = _check_basis(parse_smiles("c1ccc2ccccc2c1"))
    assert len(rs.cycles) == 2 and rs.n_units == 1


def test_spiro_rings_stay_separate():
    # two rings sharing a vertex but no edge
    rs = _check_basis(parse_smiles("C1CCC12CCC2"))
    assert len(rs.cycles) == 2 and rs.n_units == 2


def test_rings_joined_by_bridge_are_separate():
    rs = _check_basis(parse_smiles("C1CC1C2CC2"))
    assert rs.n_units == 2
    assert rs.units_of_vertex(0) != rs.units_of_vertex(5)


def test_deterministic():
    g = parse_smiles("C1CC2CCC1C2")
    assert find_cycle_basis(g) == find_cycle_basis(g)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 15), st.floats(0.0, 0.5), st.integers(0, 2**31 - 1))
def test_basis_properties_random(n, p, seed):
    g = random_connected_graph(np.random.default_rng(seed), n, p)
    rs = _check_basis(g)
    # ring edges are exactly the non-bridges
    bridges = {frozenset(e) for e in nx.bridges(to_networkx(g))}
    flags = ring_edge_flags(g)
    assert flags == [frozenset(e) not in bridges for e in g.edges]
    # units coincide with the biconnected blocks that contain a cycle
    blocks = [frozenset(b) for b in nx.biconnected_components(to_networkx(g)) if len(b) > 2]
    assert sorted(map(sorted, rs.unit_vertices)) == sorted(map(sorted, blocks))


def test_disconnected_components():
    g = build_graph(7, [(0, 1), (1, 2), (2, 0), (3, 4), (5, 6)])
    comp = connected_components(g)
    assert comp == [0, 0, 0, 1, 1, 2, 2]
    _check_basis(g)


def test_ring_with_pendant_marginals():
    g = ring_with_pendant()
    ms = get_marginal_structure(g)
    assert ms.marginal_leaf_vertices == {6}
    assert ms.marginal_leaf_edges == {6}
    # every ring vertex but the attachment point has degree 2
    assert ms.marginal_ring_vertices == {1, 2, 3, 4, 5}
    # ring edges between two degree-2 ring vertices: 1-2, 2-3, 3-4, 4-5
    assert ms.marginal_ring_edges == {1, 2, 3, 4}
    assert 0 not in ms.marginal_vertices


def test_path_marginals():
    ms = get_marginal_structure(path_graph(5))
    assert ms.marginal_leaf_vertices == {0, 4}
    assert ms.marginal_ring_vertices == frozenset()


def test_isolated_edge_both_marginal():
    ms = get_marginal_structure(path_graph(2))
    assert ms.marginal_leaf_vertices == {0, 1}
    assert ms.marginal_leaf_edges == {0}


def test_fused_ring_junctions_are_internal():
    g = parse_smiles("c1ccc2ccccc2c1")
    ms = get_marginal_structure(g)
    junctions = {v for v in range(g.n) if g.degree(v) == 3}
    assert len(junctions) == 2
    assert ms.marginal_ring_vertices == set(range(g.n)) - junctions


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 15), st.integers(0, 2**31 - 1))
def test_leaf_vertices_are_never_ring_vertices(n, seed):
    g = random_connected_graph(np.random.default_rng(seed), n, 0.2)
    rs = find_cycle_basis(g)
    ms = get_marginal_structure(g, rs)
    assert not (ms.marginal_leaf_vertices & rs.ring_vertices)
    assert ms.marginal_leaf_vertices == {v for v in range(g.n) if g.degree(v) == 1}


def test_marginal_dot_marks_red():
    g = ring_with_pendant()
    dot = marginal_dot(g, get_marginal_structure(g))
    assert dot.startswith("graph G {")
    assert '6 [label="C6", fillcolor=red]' in dot
    assert '0 [label="C0", fillcolor=white]' in dot
    assert "0 -- 6 [color=red];" in dot


@pytest.mark.parametrize("smiles, units", [("C1CC2CC1C2", 1), ("C1CC1CC1CC1", 2), ("CCCC", 0)])
def test_unit_counts(smiles, units):
    assert find_cycle_basis(parse_smiles(smiles)).n_units == units
