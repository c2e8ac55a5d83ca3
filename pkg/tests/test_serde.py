import random
import warnings

import pytest
from hypothesis import given, settings, strategies as st

from gest.core import EXISTS, NEXT, Edge, EventNode, GestGraph, Relation, canonical_form, collapse, lit, ref, validate
from gest.parser import parse_text
from gest.randgraph import random_graph
from gest.serde import (
    V1,
    V2,
    GestSyntaxError,
    SerializedGest,
    delete_chars,
    format_for_path,
    from_text,
    fuzz_recovery_rate,
    normalized,
    recovers,
    repair,
    same_graph,
    serialize,
    sniff_format,
    to_v1,
    to_v2,
)

PLAYGROUND = "John is in the playground. Bob is in the office. John picked up the football. Bob went to the kitchen."


def quiet(fn, *a, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fn(*a, **kw)


def small():
    return GestGraph(
        [
            EventNode(0, EXISTS, (lit("John"),)),
            EventNode(1, EXISTS, (lit("football"),)),
            EventNode(2, "pick_up", (ref(0), ref(1)), (lit("playground"),), (), {"verb": "pick_up"}),
            EventNode(3, "move_to", (ref(0),), (lit("kitchen"),), (lit("this evening"),)),
        ],
        [Edge(2, 3, NEXT)],
    )


# ---------------------------------------------------------------- V1


def test_v1_text():
    assert to_v1(small()).text == (
        "n0 : exists ( John )\n"
        "n1 : exists ( football )\n"
        "n2 : pick_up ( n0, n1 ) @ playground { verb=pick_up }\n"
        "n3 : move_to ( n0 ) @ kitchen # this evening\n"
        "e : n2 -temporal:next-> n3\n"
    )


def test_v1_quotes_awkward_tokens():
    g = GestGraph(
        [
            EventNode(0, "say:loud", (lit("n7"), lit("a, b"), lit(" pad"), lit("")), (), (), {"k=1": "x;y", "q": '"'}),
            EventNode(1, "b"),
        ],
        [Edge(0, 1, Relation("spatial", "left of"))],
    )
    text = to_v1(g).text
    assert '"n7"' in text and '"a, b"' in text and '"say:loud"' in text and '"left of"' in text
    back = from_text(text)
    assert same_graph(back, g)


def test_v1_nested_block():
    g = collapse(parse_text(PLAYGROUND), [5, 6], "scene")
    text = to_v1(g).text
    assert "[[" in text and "]]" in text and "\n  b : " in text
    assert same_graph(from_text(text), g)


@pytest.mark.parametrize(
    "text,line",
    [
        ("n0 : exists ( John", 1),
        ("n0 : exists ( John )\nn0 : exists ( Bob )", 2),
        ("n0 : exists ( John )\ne : n0 -temporal:next-> n4", 2),
        ("x0 : exists ( John )", 1),
        ("n0 : a ( n1 )", 1),
        ("n0 : a\nn1 : b\ne : n0 -temporal:soon-> n1", 3),
    ],
)
def test_v1_strict_errors(text, line):
    with pytest.raises(GestSyntaxError) as exc:
        from_text(text, repair_text=False)
    assert exc.value.line == line


def test_from_text_warns_on_repair():
    with pytest.warns(UserWarning, match="repaired"):
        g = from_text("n0 : exists ( John\nn1 : move_to ( n0 ) @ kitchen")
    assert [n.action for n in g.nodes] == ["exists", "move_to"]


def test_serialized_value():
    sg = serialize(small(), V2)
    assert isinstance(sg, SerializedGest) and sg.format == V2
    assert canonical_form(from_text(sg)) == canonical_form(small())


def test_formats_by_path_and_content():
    assert format_for_path("a/b.gest") == V1
    assert format_for_path("a/b.gest2") == V2
    assert sniff_format(to_v2(small()).text) == V2
    assert sniff_format(to_v1(small()).text) == V1
    assert canonical_form(from_text(to_v2(small()).text)) == canonical_form(small())


# ---------------------------------------------------------------- V2


def test_v2_text():
    text = to_v2(parse_text(PLAYGROUND)).text
    first = text.splitlines()[0]
    assert first.startswith("[ <John> | is_in | @ playground")
    assert " NEXT " in first
    assert "[ <John> | pick_up | <football> @ playground { verb=pick_up } ]" in text


def test_v2_disambiguates_identical_nodes():
    g = GestGraph(
        [EventNode(0, "wave"), EventNode(1, "wave"), EventNode(2, "wave")],
        [Edge(0, 1, NEXT), Edge(1, 2, NEXT)],
    )
    text = to_v2(g).text
    assert "%" in text
    assert canonical_form(from_text(text, V2)) == canonical_form(g)


def test_v2_isolated_nodes_and_other_categories():
    g = GestGraph(
        [EventNode(0, "a"), EventNode(1, "b"), EventNode(2, "c")],
        [Edge(0, 1, Relation("spatial", "on_top"))],
    )
    text = to_v2(g).text
    assert "spatial:on_top" in text and "[ | c | ]" in text
    assert canonical_form(from_text(text, V2)) == canonical_form(g)


def test_v2_strict_error():
    with pytest.raises(GestSyntaxError):
        from_text("[ <John> | go | ] NEXT", V2, repair_text=False)


# ---------------------------------------------------------------- round trips


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6), st.booleans())
def test_v1_roundtrip_id_exact(seed, nested):
    g = random_graph(random.Random(seed), nested=nested)
    back = from_text(to_v1(g).text, V1, repair_text=False)
    assert back == normalized(g)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6), st.booleans())
def test_v2_roundtrip_isomorphic(seed, nested):
    g = random_graph(random.Random(seed), nested=nested)
    back = from_text(to_v2(g).text, V2, repair_text=False)
    assert validate(back) == []
    assert canonical_form(back) == canonical_form(g)


def test_serialization_is_deterministic():
    g = random_graph(random.Random(3), nested=True)
    assert to_v1(g).text == to_v1(normalized(g)).text
    assert to_v2(g).text == to_v2(g).text


# ---------------------------------------------------------------- repair


@pytest.mark.parametrize(
    "broken,expected",
    [
        # missing closing paren
        ("n0 : exists ( John\nn1 : move_to ( n0 ) @ kitchen\n",
         "n0 : exists ( John )\nn1 : move_to ( n0 ) @ kitchen\n"),
        # unterminated quote
        ('n0 : exists ( "New York )\n', 'n0 : exists ( New York )\n'),
        # two records on one line
        ("n0 : exists ( John ) n1 : exists ( Bob )\n", "n0 : exists ( John )\nn1 : exists ( Bob )\n"),
        # misspelled temporal label is snapped
        ("n0 : a\nn1 : b\ne : n0 -temporal:nxt-> n1\n", "n0 : a\nn1 : b\ne : n0 -temporal:next-> n1\n"),
        # edge to a missing node is dropped
        ("n0 : a\ne : n0 -temporal:next-> n9\n", "n0 : a\n"),
        # dangling reference dropped from the entity list
        ("n0 : a ( n5, x )\n", "n0 : a ( x )\n"),
        # duplicate id renumbered
        ("n0 : a\nn0 : b\n", "n0 : a\nn1 : b\n"),
        # unclosed nested block
        ("n0 : a\nn2 : s [[\n  n1 : b\n", "n0 : a\nn2 : s [[\n  n1 : b\n]]\n"),
    ],
)
def test_v1_repair_examples(broken, expected):
    fixed, actions = repair(broken, V1)
    assert actions
    assert fixed == expected


def test_repair_is_idempotent_on_valid_text():
    text = to_v1(small()).text
    assert repair(text, V1) == (text, [])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([V1, V2]))
def test_repair_idempotent(seed, fmt):
    rng = random.Random(seed)
    g = random_graph(rng, nested=rng.random() < 0.3)
    broken = delete_chars(serialize(g, fmt).text, rng, 3)
    once, _ = repair(broken, fmt)
    assert repair(once, fmt)[0] == once
    from_text(once, fmt, repair_text=False)


@settings(max_examples=150, deadline=None)
@given(st.text(alphabet='n0123e:()[]{}@#,;=<>-|% "abc\n', max_size=80), st.sampled_from([V1, V2]))
def test_repair_output_always_parses(text, fmt):
    fixed, _ = repair(text, fmt)
    from_text(fixed, fmt, repair_text=False)


def test_v2_repair_recovers_merged_line():
    g = parse_text(PLAYGROUND)
    text = to_v2(g).text
    broken = text.replace(" NEXT ", " NXT ", 1)
    back = quiet(from_text, broken, V2)
    assert canonical_form(back) == canonical_form(g)


def test_recovers_requires_node_count():
    g = small()
    assert recovers(g, to_v1(g).text)
    assert not recovers(g, "n0 : exists ( John )\n")


def test_fuzz_rate_v1():
    rng = random.Random(11)
    graphs = [random_graph(rng) for _ in range(100)]
    assert fuzz_recovery_rate(graphs, random.Random(5), V1) >= 0.9


def test_fuzz_rate_v2_reported():
    rng = random.Random(11)
    graphs = [random_graph(rng) for _ in range(60)]
    assert fuzz_recovery_rate(graphs, random.Random(5), V2) > 0.6
