import json

import numpy as np
import pytest

from gaan.exceptions import DuplicateEdge, EndpointOutOfRange, GraphError, ParseError, SelfLoop
from gaan.graph import (SURROGATE_ATTR, AttributeSchema, EdgeAttr, VertexAttr, build_graph, degree,
                        incident_edges, initial_features, read_jsonl, write_jsonl)
from gaan.smiles import parse_smiles

from builders import path_graph, star_graph


def test_build_graph_defaults():
    g = build_graph(3, [(0, 1), (1, 2)])
    assert g.n == 3 and g.m == 2
    assert all(a.element == "C" for a in g.vertex_attrs)
    assert all(a.bond_order == "single" for a in g.edge_attrs)
    assert g.X_V.shape == (3, 0) and g.X_E.shape == (2, 0)


@pytest.mark.parametrize("edges, exc", [
    ([(0, 3)], EndpointOutOfRange),
    ([(-1, 0)], EndpointOutOfRange),
    ([(1, 1)], SelfLoop),
    ([(0, 1), (1, 0)], DuplicateEdge),
])
def test_build_graph_rejects(edges, exc):
    with pytest.raises(exc):
        build_graph(3, edges)


def test_errors_are_value_errors():
    with pytest.raises(ValueError):
        build_graph(2, [(0, 0)])


def test_attr_count_mismatch():
    with pytest.raises(GraphError):
        build_graph(2, [(0, 1)], vertex_attrs=[VertexAttr()])


def test_unknown_element_rejected():
    with pytest.raises(GraphError):
        VertexAttr("Xx")
    with pytest.raises(GraphError):
        EdgeAttr("quadruple")


def test_degree_and_incidence():
    g = star_graph(4)
    assert degree(g, 0) == 4
    assert [degree(g, v) for v in range(1, 5)] == [1, 1, 1, 1]
    assert incident_edges(g, 0) == [0, 1, 2, 3]
    assert incident_edges(g, 3) == [2]
    with pytest.raises(IndexError):
        degree(g, 5)


def test_degree_sum_is_twice_edges():
    g = parse_smiles("CC(C)(C)c1ccc(O)cc1")
    assert sum(g.degree(v) for v in range(g.n)) == 2 * g.m


def test_features_are_read_only():
    g = path_graph(3).with_features(np.ones((3, 2)), np.ones((2, 2)))
    with pytest.raises(ValueError):
        g.X_V[0, 0] = 5.0


def test_feature_row_check():
    with pytest.raises(GraphError):
        path_graph(3).with_features(np.ones((2, 1)), np.ones((2, 1)))


def test_relabel_maps_edges_and_attrs():
    g = build_graph(3, [(0, 1), (1, 2)], [VertexAttr("N"), VertexAttr("C"), VertexAttr("O")])
    h = g.relabel([2, 0, 1])
    assert h.edges == ((2, 0), (0, 1))
    assert [a.element for a in h.vertex_attrs] == ["C", "O", "N"]


def test_schema_groups_and_reserved_slots():
    graphs = [parse_smiles("CCO"), parse_smiles("C=O")]
    schema = AttributeSchema.from_graphs(graphs)
    # observed vertex tuples: C/1, C/2, O/1, O/2 ; then surrogate and unknown
    assert schema.p == len(schema.vertex_groups) + 2
    assert schema.vertex_index(SURROGATE_ATTR) == schema.p - 2
    assert schema.vertex_index(VertexAttr("Br", 1)) == schema.p - 1
    assert schema.edge_index(EdgeAttr("triple")) == schema.q - 1
    assert len({schema.vertex_index(a) for g in graphs for a in g.vertex_attrs}) == schema.p - 2


def test_schema_json_round_trip():
    schema = AttributeSchema.from_graphs([parse_smiles("c1ccccc1C(=O)N")])
    back = AttributeSchema.from_json(json.loads(json.dumps(schema.to_json())))
    assert back.vertex_groups == schema.vertex_groups
    assert back.edge_groups == schema.edge_groups
    assert back.fingerprint() == schema.fingerprint()


def test_initial_features_are_one_hot():
    g = parse_smiles("CC(=O)O")
    schema = AttributeSchema.from_graphs([g])
    g0 = initial_features(g, schema)
    assert g0.X_V.shape == (4, schema.p) and g0.X_E.shape == (3, schema.q)
    np.testing.assert_array_equal(g0.X_V.sum(axis=1), 1.0)
    np.testing.assert_array_equal(g0.X_E.sum(axis=1), 1.0)


def test_jsonl_round_trip(tmp_path):
    graphs = [parse_smiles(s) for s in ("CCO", "c1ccccc1", "C#N")]
    labels = [[1.0, None], [0.0, 2.5], [np.nan, 1.0]]
    path = tmp_path / "g.jsonl"
    write_jsonl(path, graphs, labels)
    back, ys = read_jsonl(path)
    for a, b in zip(graphs, back):
        assert a.edges == b.edges
        assert a.vertex_attrs == b.vertex_attrs
        assert a.edge_attrs == b.edge_attrs
    assert ys[0][0] == 1.0 and np.isnan(ys[0][1]) and np.isnan(ys[2][0])


def test_jsonl_bad_line_reports_position(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"n": 2, "edges": [[0, 1]]}\n{"n": 2, "edges": [[0, 0]]}\n')
    with pytest.raises(ParseError, match=":2:"):
        read_jsonl(path)
