import random

import pytest
from hypothesis import given, settings, strategies as st

from gest.core import (
    EXISTS,
    NEXT,
    SAME_ENTITY,
    Edge,
    EventNode,
    GestGraph,
    GraphError,
    Ref,
    Relation,
    canonical_form,
    collapse,
    expand,
    isomorphic,
    lit,
    ref,
    relabel,
    validate,
)
from gest.randgraph import random_graph, shuffled_copy


def watch_story():
    """John says that Daniel bought a watch, with the purchase spelled out in four steps."""
    nodes = [
        EventNode(0, EXISTS, (lit("John"),)),
        EventNode(1, EXISTS, (lit("Daniel"),)),
        EventNode(2, EXISTS, (lit("watch"),)),
        EventNode(3, "enter", (ref(1),), (lit("shop"),)),
        EventNode(4, "choose", (ref(1), ref(2))),
        EventNode(5, "pay", (ref(1),)),
        EventNode(6, "exit", (ref(1),), (lit("shop"),)),
        EventNode(7, "say", (ref(0), ref(4))),
    ]
    edges = [Edge(3, 4, NEXT), Edge(4, 5, NEXT), Edge(5, 6, NEXT), Edge(7, 3, Relation("temporal", "after"))]
    return GestGraph(nodes, edges)


def chain(n):
    nodes = [EventNode(0, EXISTS, (lit("Mary"),))]
    nodes += [EventNode(k, f"a{k}", (ref(0),)) for k in range(1, n + 1)]
    return GestGraph(nodes, [Edge(k, k + 1, NEXT) for k in range(1, n)])


# ---------------------------------------------------------------- types


def test_ref_needs_exactly_one():
    with pytest.raises(ValueError):
        Ref()
    with pytest.raises(ValueError):
        Ref(literal="x", node=1)
    assert ref(3).is_node and not lit("x").is_node


def test_graph_is_immutable():
    g = chain(2)
    with pytest.raises(AttributeError):
        g.nodes = ()
    assert isinstance(g.nodes, tuple)


# ---------------------------------------------------------------- validate


def test_empty_graph_is_valid():
    assert validate(GestGraph()) == []


def test_edge_to_missing_node():
    g = GestGraph([EventNode(0, "a")], [Edge(0, 7, NEXT)])
    (v,) = validate(g)
    assert "0->7" in v and "7" in v


def test_duplicate_id():
    g = GestGraph([EventNode(3, "a"), EventNode(3, "b")])
    (v,) = validate(g)
    assert "3" in v and "duplicate" in v


@pytest.mark.parametrize(
    "g,needle",
    [
        (GestGraph([EventNode(0, "")]), "empty action"),
        (GestGraph([EventNode(0, "a", (ref(5),))]), "missing node 5"),
        (GestGraph([EventNode(0, "a")], [Edge(0, 0, NEXT)]), "self-loop"),
        (GestGraph([EventNode(0, "a"), EventNode(1, "b")], [Edge(0, 1, Relation("temporal", "soon"))]), "temporal label"),
        (GestGraph([EventNode(0, "a"), EventNode(1, "b")], [Edge(0, 1, Relation("causal", "x"))]), "category"),
        (GestGraph([EventNode(0, "a"), EventNode(1, "b")], [Edge(0, 1, Relation("logical", ""))]), "empty relation label"),
        (GestGraph([EventNode(0, "a"), EventNode(1, "b")], [Edge(0, 1, NEXT), Edge(0, 1, NEXT)]), "duplicate edge"),
        (GestGraph([EventNode(-1, "a")]), "non-negative"),
    ],
)
def test_violations(g, needle):
    out = validate(g)
    assert len(out) == 1 and needle in out[0], out


def test_semantic_self_loop_allowed():
    assert validate(GestGraph([EventNode(0, "a")], [Edge(0, 0, SAME_ENTITY)])) == []


def test_nested_reference_must_be_a_port():
    inner = GestGraph([EventNode(0, "x", (ref(9),))])
    good = GestGraph([EventNode(9, EXISTS, (lit("Bob"),)), EventNode(1, "scene", (ref(9),), subgraph=inner)])
    bad = GestGraph([EventNode(9, EXISTS, (lit("Bob"),)), EventNode(1, "scene", subgraph=inner)])
    assert validate(good) == []
    assert any("missing node 9" in v for v in validate(bad))


# ---------------------------------------------------------------- collapse / expand


def test_collapse_two_node_graph():
    g = GestGraph([EventNode(0, "a"), EventNode(1, "b")], [Edge(0, 1, NEXT)])
    c = collapse(g, {0, 1}, "ab")
    assert len(c) == 1 and len(c.nodes[0].subgraph) == 2 and c.edges == ()
    assert validate(c) == []


def test_watch_story_collapse():
    g = watch_story()
    c = collapse(g, {3, 4, 5, 6}, "buy")
    assert validate(c) == []
    buy = next(n for n in c.nodes if n.action == "buy")
    say = next(n for n in c.nodes if n.action == "say")
    assert say.entities[1] == ref(buy.id)
    assert [n.action for n in buy.subgraph.nodes] == ["enter", "choose", "pay", "exit"]
    # the two outer exists nodes it needs become ports
    assert set(buy.referenced_ids()) == {1, 2}
    assert Edge(say.id, buy.id, Relation("temporal", "after")) in c.edges
    e = expand(c, buy.id)
    assert [n.action for n in e.nodes if n.action in ("enter", "choose", "pay", "exit")] == ["enter", "choose", "pay", "exit"]
    assert canonical_form(e) == canonical_form(g)


def test_collapse_dedupes_boundary_edges():
    g = GestGraph(
        [EventNode(0, "a"), EventNode(1, "b"), EventNode(2, "c")],
        [Edge(0, 2, NEXT), Edge(1, 2, NEXT), Edge(0, 1, NEXT)],
    )
    c = collapse(g, {0, 1}, "ab")
    assert len(c.edges) == 1
    assert canonical_form(expand(c, c.nodes[0].id)) == canonical_form(g)


def test_collapse_singleton():
    g = chain(3)
    c = collapse(g, {2}, "wrap")
    assert len(c) == len(g)
    assert isomorphic(expand(c, next(n.id for n in c.nodes if n.action == "wrap")), g)


@pytest.mark.parametrize(
    "nodeset,action",
    [(set(), "x"), ({1, 99}, "x"), ({1}, "")],
)
def test_collapse_errors(nodeset, action):
    with pytest.raises(GraphError):
        collapse(chain(3), nodeset, action)


def test_collapse_requires_connected():
    g = GestGraph([EventNode(k, "e") for k in range(4)], [Edge(k, k + 1, NEXT) for k in range(3)])
    with pytest.raises(GraphError):
        collapse(g, {0, 3}, "x")


def test_collapse_connected_through_shared_entity():
    g = GestGraph([EventNode(0, EXISTS, (lit("x"),)), EventNode(1, "a", (ref(0),)), EventNode(2, "b", (ref(0),))])
    c = collapse(g, {1, 2}, "ab")
    assert validate(c) == []


def test_expand_leaf_is_error():
    with pytest.raises(GraphError):
        expand(chain(2), 1)


def test_nested_collapse_twice():
    g = chain(5)
    c1 = collapse(g, {1, 2}, "first")
    f = next(n.id for n in c1.nodes if n.action == "first")
    c2 = collapse(c1, {f, 3}, "second")
    assert validate(c2) == []
    s = next(n.id for n in c2.nodes if n.action == "second")
    back = expand(expand(c2, s), f)
    assert canonical_form(back) == canonical_form(g)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 3))
def test_expand_inverts_collapse(seed, size):
    rng = random.Random(seed)
    g = random_graph(rng, 4, 10, extra_edges=0.5)
    events = [n.id for n in g.nodes if n.action != EXISTS]
    start = rng.randrange(len(events))
    chosen = events[start : start + size]
    try:
        c = collapse(g, chosen, "summary")
    except GraphError:
        return  # not connected
    assert validate(c) == []
    assert len(c.edges) <= len(g.edges)
    new = next(n.id for n in c.nodes if n.action == "summary")
    e = expand(c, new)
    assert validate(e) == []
    assert canonical_form(e) == canonical_form(g)


# ---------------------------------------------------------------- canonical form


def test_canonical_form_ignores_numbering():
    g = watch_story()
    h, _ = shuffled_copy(g, random.Random(4))
    assert canonical_form(g) == canonical_form(h)


def test_canonical_form_detects_extra_node():
    g = watch_story()
    h = GestGraph(g.nodes + (EventNode(99, "smile"),), g.edges)
    assert canonical_form(g) != canonical_form(h)


def test_same_degree_sequence_not_isomorphic():
    # directed path a->b->c versus a->b, c->b: both have degree sequence (1, 2, 1)
    n = [EventNode(k, "e") for k in range(3)]
    path = GestGraph(n, [Edge(0, 1, NEXT), Edge(1, 2, NEXT)])
    sink = GestGraph(n, [Edge(0, 1, NEXT), Edge(2, 1, NEXT)])
    assert not isomorphic(path, sink)


def test_symmetric_graph_canonical():
    # a directed 4-cycle of identical nodes: every rotation is an automorphism
    n = [EventNode(k, "e") for k in range(4)]
    cyc = GestGraph(n, [Edge(k, (k + 1) % 4, NEXT) for k in range(4)])
    other = relabel(cyc, {0: 2, 1: 0, 2: 3, 3: 1})
    assert canonical_form(cyc) == canonical_form(other)


def test_canonical_sensitive_to_reference_order():
    a = GestGraph([EventNode(0, EXISTS, (lit("x"),)), EventNode(1, EXISTS, (lit("y"),)), EventNode(2, "give", (ref(0), ref(1)))])
    b = GestGraph([EventNode(0, EXISTS, (lit("x"),)), EventNode(1, EXISTS, (lit("y"),)), EventNode(2, "give", (ref(1), ref(0)))])
    assert canonical_form(a) != canonical_form(b)


def test_relabel_rejects_collisions():
    with pytest.raises(GraphError):
        relabel(chain(2), {1: 2})


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6), st.booleans())
def test_canonical_form_invariant_under_shuffle(seed, nested):
    rng = random.Random(seed)
    g = random_graph(rng, nested=nested)
    assert validate(g) == []
    h, _ = shuffled_copy(g, rng)
    assert canonical_form(g) == canonical_form(h)


def brute_isomorphic(g, h):
    from itertools import permutations

    if len(g) != len(h):
        return False
    for perm in permutations(h.ids):
        m = dict(zip(g.ids, perm))
        if repr(sorted(map(repr, relabel(g, m).nodes))) == repr(sorted(map(repr, h.nodes))) and \
                {e.key for e in relabel(g, m).edges} == {e.key for e in h.edges}:
            return True
    return False


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_canonical_form_matches_brute_force(seed):
    rng = random.Random(seed)
    g = random_graph(rng, 3, 5)
    h = random_graph(rng, len(g), len(g))
    if rng.random() < 0.5:
        h, _ = shuffled_copy(g, rng)
    assert (canonical_form(g) == canonical_form(h)) == brute_isomorphic(g, h)
