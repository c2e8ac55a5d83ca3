"""Random valid GEST graphs for property tests and benchmarks."""

from __future__ import annotations

import random

from .core import EXISTS, TEMPORAL_LABELS, Edge, EventNode, GestGraph, GraphError, Relation, collapse, lit, ref, relabel

PEOPLE = ("John", "Mary", "Bob", "Sandra", "Daniel", "Fred", "Julie", "Emily")
OBJECTS = ("football", "apple", "milk", "phone", "cup", "backpack", "notebook", "bag")
PLACES = ("kitchen", "office", "playground", "garden", "bathroom", "bedroom", "hallway", "park")
ACTIONS = ("move_to", "is_in", "pick_up", "drop", "give")
TIMES = ("yesterday", "this morning", "this afternoon", "this evening")
OTHER_RELATIONS = (
    Relation("spatial", "on_top"),
    Relation("spatial", "behind"),
    Relation("spatial", "left_of"),
    Relation("logical", "and"),
    Relation("logical", "cause"),
)


def random_graph(
    rng: random.Random,
    n_min: int = 3,
    n_max: int = 10,
    distinct_labels: bool = False,
    nested: bool = False,
    extra_edges: float = 0.3,
) -> GestGraph:
    """A valid graph with ``n_min..n_max`` top-level nodes.

    With ``distinct_labels`` every node gets its own action token, so node
    similarity alone identifies each node.
    """
    n = rng.randint(n_min, n_max)
    n_exists = rng.randint(1, max(1, n // 3))
    if n_exists == n:
        n_exists = n - 1
    names = rng.sample(PEOPLE + OBJECTS, n_exists)
    nodes = [EventNode(k, EXISTS, (lit(name),)) for k, name in enumerate(names)]
    events = []
    for k in range(n_exists, n):
        action = f"act{k}_{rng.randrange(10**6)}" if distinct_labels else rng.choice(ACTIONS)
        who = rng.sample(range(n_exists), rng.randint(1, min(2, n_exists)))
        ents = tuple(ref(w) for w in who)
        if rng.random() < 0.3:
            ents += (lit(rng.choice(OBJECTS)),)
        locs = (lit(rng.choice(PLACES)),) if rng.random() < 0.7 else ()
        tfs = (lit(rng.choice(TIMES)),) if rng.random() < 0.2 else ()
        props = {"verb": action} if rng.random() < 0.3 else {}
        nodes.append(EventNode(k, action, ents, locs, tfs, props))
        events.append(k)
    edges = []
    seen = set()

    def add(a, b, rel):
        if (a, b, rel) not in seen and a != b:
            seen.add((a, b, rel))
            edges.append(Edge(a, b, rel))

    for a, b in zip(events, events[1:]):
        add(a, b, Relation("temporal", rng.choice(("next", "next", "same_time", "meanwhile"))))
    ids = list(range(n))
    n_extra = int(round(extra_edges * n))
    for _ in range(n_extra):
        a, b = rng.sample(ids, 2)
        if rng.random() < 0.5:
            add(a, b, Relation("temporal", rng.choice(TEMPORAL_LABELS)))
        else:
            add(a, b, rng.choice(OTHER_RELATIONS))
    g = GestGraph(nodes, edges)
    if nested and len(events) >= 3:
        start = rng.randrange(len(events) - 1)
        chunk = events[start : start + rng.randint(2, 3)]
        try:
            g = collapse(g, chunk, "scene")
        except GraphError:  # chunk pinned by a cross reference; keep the flat graph
            pass
    return g


def shuffled_copy(g: GestGraph, rng: random.Random):
    """Renumber and reorder ``g``; returns ``(copy, mapping old -> new)``."""
    ids = g.ids
    new = list(range(len(ids)))
    rng.shuffle(new)
    mapping = dict(zip(ids, new))
    h = relabel(g, mapping)
    nodes = list(h.nodes)
    edges = list(h.edges)
    rng.shuffle(nodes)
    rng.shuffle(edges)
    return GestGraph(nodes, edges), mapping
