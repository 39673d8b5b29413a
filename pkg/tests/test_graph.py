import pytest
from hypothesis import given, strategies as st

from locrad.exceptions import UnknownNode
from locrad.graph import (
    AttributeNode, EdgeKind, SchemaEdge, SchemaGraph, TableNode, k_hop_neighborhood, restrict, validate,
)
from locrad.synthgen import GeneratorParams, generate_schema

from conftest import build_graph, rec


def test_empty_graph_is_valid():
    assert validate(SchemaGraph()) == []


def test_missing_membership_is_reported():
    g = SchemaGraph((TableNode("t"),), (AttributeNode("t.a", "t", rec("a")),), ())
    rules = [v.rule for v in validate(g)]
    assert rules == ["MissingMembership"]


def test_candidate_edge_to_table_is_bad_endpoint():
    g = build_graph({"t": ["a"], "u": ["b"]})
    g = g.with_edges(add=[SchemaEdge("t.a", "u", EdgeKind.CANDIDATE)])
    assert [v.rule for v in validate(g)] == ["BadEndpointKind"]


def test_self_loop_and_dangling_edges():
    g = build_graph({"t": ["a"]})
    g = g.with_edges(add=[SchemaEdge("t.a", "t.a", EdgeKind.CANDIDATE), SchemaEdge("t.a", "x.y", EdgeKind.FOREIGN_KEY)])
    assert sorted(v.rule for v in validate(g)) == ["DanglingEndpoint", "SelfLoop"]


def test_bad_feature_record():
    g = build_graph({"t": ["a"]}, records={"t.a": rec("a", distinct=10, rows=5)})
    assert [v.rule for v in validate(g)] == ["BadFeature"]


def test_zero_hop_neighborhood_is_endpoints():
    g = build_graph({"t": ["a"], "u": ["b"]}, candidates=[("t.a", "u.b")])
    nb = k_hop_neighborhood(g, ("t.a", "u.b"), 0)
    assert nb.nodes == ("t.a", "u.b")
    assert [(e.src, e.dst) for e in nb.edges] == [("t.a", "u.b")]


def test_chain_on_one_side_of_disjoint_anchor():
    # a_i - T1 - b on one side; a_j lives in a separate component
    g = build_graph({"T1": ["ai", "b"], "T2": ["aj"]})
    nb = k_hop_neighborhood(g, ("T1.ai", "T2.aj"), 2)
    assert set(nb.nodes) == {"T1.ai", "T1", "T1.b", "T2.aj", "T2"}
    assert nb.distance["T1.b"] == 2


def test_saturation_reaches_component(chain_graph):
    nb = k_hop_neighborhood(chain_graph, ("A.b_id", "B.id"), 50)
    assert set(nb.nodes) == set(chain_graph.node_ids)


def test_unknown_endpoint_raises(chain_graph):
    with pytest.raises(UnknownNode):
        k_hop_neighborhood(chain_graph, ("A.b_id", "Z.q"), 1)


def test_restrict_is_induced(chain_graph):
    sub = restrict(chain_graph, ["A", "A.id", "A.b_id", "B.id"])
    assert {e.kind for e in sub.edges} == {EdgeKind.MEMBERSHIP, EdgeKind.FOREIGN_KEY, EdgeKind.CANDIDATE}
    assert all(sub.has_node(e.src) and sub.has_node(e.dst) for e in sub.edges)


def test_duplicate_edges_are_dropped():
    g = build_graph({"t": ["a"], "u": ["b"]}, candidates=[("t.a", "u.b"), ("t.a", "u.b")])
    assert len(g.candidate_edges) == 1


@given(seed=st.integers(0, 2**32 - 1), k=st.integers(0, 4))
def test_neighborhood_properties(seed, k):
    g = generate_schema(GeneratorParams(n_tables=10, attrs_per_table=(1, 3), seed=seed))
    assert validate(g) == []
    cands = g.candidate_edges
    if not cands:
        return
    e = cands[seed % len(cands)]
    small = k_hop_neighborhood(g, e, k)
    big = k_hop_neighborhood(g, e, k + 1)
    assert set(small.nodes) <= set(big.nodes)
    assert small == k_hop_neighborhood(g, e, k)
    node_set = set(small.nodes)
    assert all(x.src in node_set and x.dst in node_set for x in small.edges)
    assert list(small.nodes) == sorted(small.nodes)
