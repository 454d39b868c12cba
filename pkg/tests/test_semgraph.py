import pytest
from hypothesis import given, settings, strategies as st

from behavnav.floorplan import GenConfig, generate_floorplan
from behavnav.semgraph import (
    BehaviorCode, NoRoute, Plan, Triplet, UnknownPlace, extract_graph, graph_from_text, graph_to_text,
    place_kind, plan_route, turn_code,
)


REF_PLAN = """S:O1 G:O8
O1 --oor--> C1r
C1r --cf--> H1
H1 --chl--> C2r
C2r --cf--> EO8
EO8 --ior--> O8
"""


def test_reference_listing_edges(reference):
    _, graph = reference
    have = {str(t) for t in graph.triplets}
    for line in ["O1 --oor--> C1r", "O1 --ool--> C1l", "O1 --ooc--> EO3", "EO3 --ior--> O3", "C1r --cf--> H1"]:
        assert line in have


def test_reference_route(reference):
    _, graph = reference
    assert plan_route(graph, "O1", "O8").to_text() == REF_PLAN


def test_same_office_gives_empty_plan(reference):
    _, graph = reference
    assert plan_route(graph, "O4", "O4").triplets == []


def test_unknown_places(reference):
    _, graph = reference
    with pytest.raises(UnknownPlace):
        plan_route(graph, "O1", "O99")
    with pytest.raises(UnknownPlace):
        plan_route(graph, "C1r", "O2")


def test_no_route_when_office_isolated(reference):
    _, graph = reference
    from behavnav.semgraph import SemanticGraph
    cut = SemanticGraph(graph.nodes, tuple(t for t in graph.triplets if t.to != "O8"), graph.meta)
    with pytest.raises(NoRoute):
        plan_route(cut, "O1", "O8")


def test_triplet_parse_round_trip():
    t = Triplet.parse("C2r --cf--> EO8")
    assert (t.frm, t.code, t.to) == ("C2r", BehaviorCode.CF, "EO8")
    assert Triplet.parse(str(t)) == t


@pytest.mark.parametrize("bad", ["O1 --xx--> C1r", "O1 -oor-> C1r", "Q1 --oor--> C1r", "O1 --oor--> C1"])
def test_triplet_parse_rejects(bad):
    with pytest.raises(ValueError):
        Triplet.parse(bad)


def test_place_kinds():
    assert [place_kind(p) for p in ("O3", "EO12", "C4l", "H2")] == ["O", "EO", "C", "H"]
    with pytest.raises(ValueError):
        place_kind("unk")


def test_turn_codes():
    # compass indices: 0 east, 1 north, 2 west, 3 south
    assert turn_code(0, 0) == "c"
    assert turn_code(0, 1) == "l"
    assert turn_code(0, 3) == "r"
    assert turn_code(0, 2) is None


def test_code_families():
    assert BehaviorCode.OOC.family == "oo"
    assert BehaviorCode.CHS.direction == "c"
    assert BehaviorCode.CF.direction is None


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_graph_text_round_trip(seed):
    graph = extract_graph(generate_floorplan(seed, GenConfig(n_corridors=4, n_halls=1)))
    back = graph_from_text(graph_to_text(graph))
    assert back.nodes == graph.nodes
    assert set(back.triplets) == set(graph.triplets)
    assert graph_to_text(back) == graph_to_text(graph)


@given(st.integers(0, 10_000), st.data())
@settings(max_examples=40, deadline=None)
def test_plans_are_chained_and_type_correct(seed, data):
    plan = generate_floorplan(seed, GenConfig(n_corridors=5, n_halls=2))
    graph = extract_graph(plan)
    offices = graph.offices()
    a = data.draw(st.sampled_from(offices))
    b = data.draw(st.sampled_from(offices))
    route = plan_route(graph, a, b)
    edges = set(graph.triplets)
    here = a
    for t in route.triplets:
        assert t in edges and t.frm == here and t.compatible()
        here = t.to
    assert here == b
    assert Plan.from_text(route.to_text()) == route
