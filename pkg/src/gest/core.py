"""GEST data model: event nodes, typed edges, validation, collapse/expand.

Graphs are immutable values. Every operation returns a new graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence

CATEGORIES = ("temporal", "spatial", "logical", "semantic")
TEMPORAL_LABELS = ("next", "same_time", "meanwhile", "before", "after", "during", "overlaps")
REF_SLOTS = ("entities", "locations", "timeframes")
EXISTS = "exists"


class GraphError(ValueError):
    """Raised when a graph operation's precondition does not hold."""


@dataclass(frozen=True)
class Ref:
    """Either a literal string or a reference to another node of the same graph."""

    literal: Optional[str] = None
    node: Optional[int] = None

    def __post_init__(self):
        if (self.literal is None) == (self.node is None):
            raise ValueError("Ref needs exactly one of literal / node")

    @property
    def is_node(self) -> bool:
        return self.node is not None

    def __repr__(self):
        return f"Ref(node={self.node})" if self.is_node else f"Ref({self.literal!r})"


def lit(text: str) -> Ref:
    return Ref(literal=text)


def ref(node_id: int) -> Ref:
    return Ref(node=node_id)


@dataclass(frozen=True)
class Relation:
    category: str
    label: str

    def __str__(self):
        return f"{self.category}:{self.label}"


NEXT = Relation("temporal", "next")
SAME_TIME = Relation("temporal", "same_time")
MEANWHILE = Relation("temporal", "meanwhile")
SAME_ENTITY = Relation("semantic", "same_entity")


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    relation: Relation

    @property
    def key(self):
        return (self.src, self.dst, self.relation.category, self.relation.label)


@dataclass(frozen=True)
class Anchor:
    """Records that ``holder.<slot>[index]`` pointed at ``target`` before a collapse."""

    holder: int
    slot: str
    index: int
    target: int


@dataclass(frozen=True)
class EventNode:
    id: int
    action: str
    entities: tuple = ()
    locations: tuple = ()
    timeframes: tuple = ()
    properties: Mapping[str, str] = field(default_factory=dict)
    subgraph: Optional["GestGraph"] = None
    # Only set on nodes produced by collapse(); lets expand() undo it exactly.
    boundary: tuple = ()
    anchors: tuple = ()

    def refs(self) -> Iterator[tuple]:
        """Yield ``(slot, index, Ref)`` over entities, locations and timeframes."""
        for slot in REF_SLOTS:
            for k, r in enumerate(getattr(self, slot)):
                yield slot, k, r

    def referenced_ids(self) -> list:
        return [r.node for _, _, r in self.refs() if r.is_node]


@dataclass(frozen=True)
class GestGraph:
    nodes: tuple = ()
    edges: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))

    def __len__(self):
        return len(self.nodes)

    @property
    def ids(self) -> list:
        return [n.id for n in self.nodes]

    def node_map(self) -> dict:
        return {n.id: n for n in self.nodes}

    def node(self, node_id: int) -> EventNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise GraphError(f"unknown node id {node_id}")

    def next_id(self) -> int:
        return max(self.ids, default=-1) + 1


def node_name(node: EventNode, nodes: Mapping[int, EventNode] = None) -> str:
    """Short phrase for a node: the entity literal for simple exists nodes, else the action."""
    if node.action == EXISTS and len(node.entities) == 1 and not node.entities[0].is_node:
        return node.entities[0].literal
    return node.action


# --------------------------------------------------------------------------
# validation


def _check_relation(rel: Relation) -> Optional[str]:
    if rel.category not in CATEGORIES:
        return f"unknown relation category {rel.category!r}"
    if not rel.label:
        return "empty relation label"
    if rel.category == "temporal" and rel.label not in TEMPORAL_LABELS:
        return f"unknown temporal label {rel.label!r}"
    return None


def validate(g: GestGraph, ports: Iterable[int] = (), _where: str = "") -> list:
    """Return a list of human-readable invariant violations (empty means valid)."""
    out = []
    seen = set()
    for n in g.nodes:
        if n.id in seen:
            out.append(f"{_where}node {n.id}: duplicate id {n.id}")
        seen.add(n.id)
        if not isinstance(n.id, int) or n.id < 0:
            out.append(f"{_where}node {n.id}: id must be a non-negative integer")
    allowed = seen | set(ports)
    nodes = g.node_map()

    for n in g.nodes:
        if not n.action:
            out.append(f"{_where}node {n.id}: empty action")
        for slot, k, r in n.refs():
            if r.is_node and r.node not in allowed:
                out.append(f"{_where}node {n.id}: {slot}[{k}] references missing node {r.node}")
        if n.subgraph is None:
            if n.boundary or n.anchors:
                out.append(f"{_where}node {n.id}: boundary/anchors without subgraph")
            continue
        inner_ids = set(n.subgraph.ids)
        sub_ports = set(n.referenced_ids())
        out.extend(validate(n.subgraph, sub_ports, f"{_where}node {n.id} > "))
        for e in n.boundary:
            ends = (e.src in inner_ids, e.dst in inner_ids)
            outer = e.dst if ends[0] else e.src
            if ends[0] == ends[1] or outer not in seen:
                out.append(
                    f"{_where}node {n.id}: boundary edge {e.src}->{e.dst} must join the subgraph to this graph"
                )
        for a in n.anchors:
            holder = nodes.get(a.holder)
            ok = (
                holder is not None
                and a.slot in REF_SLOTS
                and 0 <= a.index < len(getattr(holder, a.slot))
                and getattr(holder, a.slot)[a.index].node == n.id
                and a.target in inner_ids
            )
            if not ok:
                out.append(f"{_where}node {n.id}: anchor {a.holder}.{a.slot}[{a.index}] does not resolve")

    keys = set()
    for e in g.edges:
        tag = f"{_where}edge {e.src}->{e.dst} ({e.relation})"
        for end in (e.src, e.dst):
            if end not in seen:
                out.append(f"{tag}: missing node {end}")
        if e.src == e.dst and e.relation.category != "semantic":
            out.append(f"{tag}: self-loop on non-semantic relation")
        problem = _check_relation(e.relation)
        if problem:
            out.append(f"{tag}: {problem}")
        if e.key in keys:
            out.append(f"{tag}: duplicate edge")
        keys.add(e.key)
    return out


# --------------------------------------------------------------------------
# hierarchy


def _remap_ref(r: Ref, mapping: Mapping[int, int]) -> Ref:
    if r.is_node and r.node in mapping:
        return Ref(node=mapping[r.node])
    return r


def _with_refs(node: EventNode, fn: Callable[[str, int, Ref], Ref]) -> EventNode:
    changes = {}
    for slot in REF_SLOTS:
        values = getattr(node, slot)
        changes[slot] = tuple(fn(slot, k, r) for k, r in enumerate(values))
    return replace(node, **changes)


def _connected(members: Sequence[int], g: GestGraph) -> bool:
    parent = {m: m for m in members}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        parent[find(a)] = find(b)

    for e in g.edges:
        if e.src in parent and e.dst in parent:
            union(e.src, e.dst)
    by_target = {}
    for n in g.nodes:
        if n.id not in parent:
            continue
        for t in n.referenced_ids():
            if t in parent:
                union(n.id, t)
            by_target.setdefault(t, []).append(n.id)
    for holders in by_target.values():
        for h in holders[1:]:
            union(holders[0], h)
    return len({find(m) for m in members}) == 1


def collapse(g: GestGraph, nodeset: Iterable[int], summary_action: str) -> GestGraph:
    """Replace ``nodeset`` by a single node whose subgraph is the induced subgraph."""
    members = set(nodeset)
    if not members:
        raise GraphError("empty nodeset")
    if not summary_action:
        raise GraphError("empty summary action")
    nodes = g.node_map()
    unknown = sorted(members - set(nodes))
    if unknown:
        raise GraphError(f"unknown node id {unknown[0]}")
    order = [n.id for n in g.nodes if n.id in members]
    if not _connected(order, g):
        raise GraphError("nodeset is not connected")
    for n in g.nodes:
        if n.id in members or n.subgraph is None:
            continue
        pinned = set(n.referenced_ids()) | {e.src for e in n.boundary} | {e.dst for e in n.boundary}
        pinned |= {a.holder for a in n.anchors}
        if pinned & members:
            raise GraphError(f"nodeset contains ids pinned by the nested subgraph of node {n.id}")

    new_id = g.next_id()
    inner_nodes = [nodes[i] for i in order]

    ports = []
    for n in inner_nodes:
        for t in n.referenced_ids():
            if t not in members and t not in ports:
                ports.append(t)

    inner_edges, boundary, outer_edges = [], [], []
    for e in g.edges:
        s_in, d_in = e.src in members, e.dst in members
        if s_in and d_in:
            inner_edges.append(e)
        elif s_in or d_in:
            boundary.append(e)
        else:
            outer_edges.append(e)

    seen = {e.key for e in outer_edges}
    for e in boundary:
        moved = Edge(new_id if e.src in members else e.src, new_id if e.dst in members else e.dst, e.relation)
        if moved.key not in seen:
            seen.add(moved.key)
            outer_edges.append(moved)

    anchors = []
    rebuilt = []
    inserted = False
    for n in g.nodes:
        if n.id in members:
            if not inserted:
                rebuilt.append(None)
                inserted = True
            continue

        def redirect(slot, k, r, holder=n.id):
            if r.is_node and r.node in members:
                anchors.append(Anchor(holder, slot, k, r.node))
                return Ref(node=new_id)
            return r

        rebuilt.append(_with_refs(n, redirect))

    summary = EventNode(
        id=new_id,
        action=summary_action,
        entities=tuple(Ref(node=p) for p in ports),
        subgraph=GestGraph(inner_nodes, inner_edges),
        boundary=tuple(boundary),
        anchors=tuple(anchors),
    )
    rebuilt[rebuilt.index(None)] = summary
    return GestGraph(rebuilt, outer_edges)


def _entry_node(sub: GestGraph) -> int:
    has_incoming = {e.dst for e in sub.edges if e.relation.category == "temporal"}
    for n in sorted(sub.nodes, key=lambda n: n.id):
        if n.action != EXISTS and n.id not in has_incoming:
            return n.id
    return min(sub.ids)


def expand(g: GestGraph, node_id: int) -> GestGraph:
    """Inline the subgraph of ``node_id`` back into ``g`` (inverse of :func:`collapse`)."""
    c = g.node(node_id)
    if c.subgraph is None or not c.subgraph.nodes:
        raise GraphError(f"node {node_id} has no subgraph")
    sub = c.subgraph

    outside = set(g.ids) - {node_id}
    fresh = max(set(g.ids) | set(sub.ids)) + 1
    mapping = {}
    for i in sub.ids:
        if i in outside:
            mapping[i] = fresh
            fresh += 1
    m = lambda i: mapping.get(i, i)  # noqa: E731

    inner_nodes = [_with_refs(replace(n, id=m(n.id)), lambda s, k, r: _remap_ref(r, mapping)) for n in sub.nodes]
    inner_ids = {n.id for n in inner_nodes}
    inner_edges = [Edge(m(e.src), m(e.dst), e.relation) for e in sub.edges]
    boundary = [
        Edge(m(e.src) if e.src in sub.ids else e.src, m(e.dst) if e.dst in sub.ids else e.dst, e.relation)
        for e in c.boundary
    ]
    anchors = {(a.holder, a.slot, a.index): m(a.target) for a in c.anchors}
    entry = m(_entry_node(sub))

    covered = set()
    for e in boundary:
        if e.src in inner_ids:
            covered.add((node_id, e.dst, e.relation))
        else:
            covered.add((e.src, node_id, e.relation))

    edges, keys = [], set()

    def add(e):
        if e.key not in keys:
            keys.add(e.key)
            edges.append(e)

    for e in g.edges:
        if node_id not in (e.src, e.dst):
            add(e)
        elif (e.src, e.dst, e.relation) not in covered:
            add(Edge(entry if e.src == node_id else e.src, entry if e.dst == node_id else e.dst, e.relation))
    for e in inner_edges + boundary:
        add(e)

    rebuilt = []
    for n in g.nodes:
        if n.id == node_id:
            rebuilt.extend(inner_nodes)
            continue

        def restore(slot, k, r, holder=n.id):
            if r.is_node and r.node == node_id:
                return Ref(node=anchors.get((holder, slot, k), entry))
            return r

        rebuilt.append(_with_refs(n, restore))
    return GestGraph(rebuilt, edges)


# --------------------------------------------------------------------------
# canonical form (individualization-refinement; meant for small graphs)


def _lit_token(text: str) -> str:
    return repr(text)


def _anon_slot(r: Ref, local: set, outer: Mapping[int, str]) -> str:
    if not r.is_node:
        return "L" + _lit_token(r.literal)
    if r.node in local:
        return "N"
    return "O" + outer.get(r.node, "?")


def _initial_signature(n: EventNode, local: set, outer: Mapping[int, str]):
    slots = tuple(tuple(_anon_slot(r, local, outer) for r in getattr(n, s)) for s in REF_SLOTS)
    props = tuple(sorted(n.properties.items()))
    sub = _canon(n.subgraph, {})[0] if n.subgraph is not None else ""
    bnd = tuple(sorted(str(e.relation) for e in n.boundary))
    return (n.action, slots, props, sub, bnd, len(n.anchors))


def _rank(signatures: Mapping[int, object]) -> dict:
    distinct = sorted(set(signatures.values()))
    index = {s: k for k, s in enumerate(distinct)}
    return {i: index[s] for i, s in signatures.items()}


class _Structure:
    def __init__(self, g: GestGraph, outer: Mapping[int, str]):
        self.g = g
        self.nodes = g.node_map()
        local = set(self.nodes)
        self.base = _rank({i: _initial_signature(n, local, outer) for i, n in self.nodes.items()})
        self.out_adj = {i: [] for i in self.nodes}
        self.in_adj = {i: [] for i in self.nodes}
        for e in g.edges:
            if e.src in self.nodes and e.dst in self.nodes:
                self.out_adj[e.src].append((str(e.relation), e.dst))
                self.in_adj[e.dst].append((str(e.relation), e.src))
        self.ref_out = {i: [] for i in self.nodes}
        self.ref_in = {i: [] for i in self.nodes}
        for n in g.nodes:
            for slot, k, r in n.refs():
                if r.is_node and r.node in self.nodes:
                    self.ref_out[n.id].append((slot, k, r.node))
                    self.ref_in[r.node].append((slot, k, n.id))
            for e in n.boundary:
                other = e.dst if e.src not in local else e.src
                if e.src in local and e.dst in local:
                    continue
                if other in self.nodes:
                    self.ref_in[other].append(("boundary", str(e.relation), n.id))

    def refine(self, colors: dict) -> dict:
        while True:
            sig = {}
            for i in self.nodes:
                sig[i] = (
                    colors[i],
                    tuple(sorted((r, colors[j]) for r, j in self.out_adj[i])),
                    tuple(sorted((r, colors[j]) for r, j in self.in_adj[i])),
                    tuple((s, k, colors[j]) for s, k, j in self.ref_out[i]),
                    tuple(sorted((s, str(k), colors[j]) for s, k, j in self.ref_in[i])),
                )
            new = _rank(sig)
            if len(set(new.values())) == len(set(colors.values())):
                return new
            colors = new

    def swap_is_automorphism(self, u: int, v: int) -> bool:
        for i in (u, v):
            n = self.nodes[i]
            if n.subgraph is not None or n.boundary or n.anchors:
                return False
        for n in self.g.nodes:
            if n.subgraph is not None and ({u, v} & (set(n.referenced_ids()) | {a.holder for a in n.anchors})):
                return False
            if any(e.src in (u, v) or e.dst in (u, v) for e in n.boundary):
                return False
        sw = {u: v, v: u}
        s = lambda i: sw.get(i, i)  # noqa: E731
        edges = {(e.src, e.dst, str(e.relation)) for e in self.g.edges}
        if {(s(a), s(b), r) for a, b, r in edges} != edges:
            return False
        for n in self.g.nodes:
            img = self.nodes[s(n.id)]
            for slot in REF_SLOTS:
                a = [(r.node if r.node is None else s(r.node), r.literal) for r in getattr(n, slot)]
                b = [(r.node, r.literal) for r in getattr(img, slot)]
                if a != b:
                    return False
        return self.base[u] == self.base[v]


def _render(g: GestGraph, order: Sequence[int], outer: Mapping[int, str], depth: int) -> str:
    label = {i: k for k, i in enumerate(order)}
    nodes = g.node_map()
    scope = dict(outer)
    scope.update({i: f"{depth}.{k}" for i, k in label.items()})

    def slot_text(r: Ref) -> str:
        if not r.is_node:
            return "L" + _lit_token(r.literal)
        if r.node in label:
            return f"N{label[r.node]}"
        return "O" + outer.get(r.node, "?")

    parts = []
    for i in order:
        n = nodes[i]
        slots = ";".join(",".join(slot_text(r) for r in getattr(n, s)) for s in REF_SLOTS)
        props = ",".join(f"{_lit_token(k)}={_lit_token(v)}" for k, v in sorted(n.properties.items()))
        text = f"{label[i]}:{_lit_token(n.action)}[{slots}]{{{props}}}"
        if n.subgraph is not None:
            sub_text, sub_order = _canon(n.subgraph, scope, depth + 1)
            sub_label = {j: k for k, j in enumerate(sub_order)}
            bnd = sorted(
                (
                    f"i{sub_label[e.src]}" if e.src in sub_label else f"o{label.get(e.src, '?')}",
                    f"i{sub_label[e.dst]}" if e.dst in sub_label else f"o{label.get(e.dst, '?')}",
                    str(e.relation),
                )
                for e in n.boundary
            )
            anc = sorted((label.get(a.holder, -1), a.slot, a.index, sub_label.get(a.target, -1)) for a in n.anchors)
            text += f"<<{sub_text}|{bnd}|{anc}>>"
        parts.append(text)
    edges = sorted((label[e.src], label[e.dst], str(e.relation)) for e in g.edges)
    return " ".join(parts) + " || " + " ".join(f"{a}>{b}:{r}" for a, b, r in edges)


def _canon(g: GestGraph, outer: Mapping[int, str], depth: int = 0):
    if not g.nodes:
        return "", []
    st = _Structure(g, outer)
    best = [None, None]

    def search(colors):
        colors = st.refine(colors)
        cells = {}
        for i, c in colors.items():
            cells.setdefault(c, []).append(i)
        open_cells = [(len(m), c) for c, m in cells.items() if len(m) > 1]
        if not open_cells:
            order = sorted(colors, key=colors.get)
            text = _render(g, order, outer, depth)
            if best[0] is None or text < best[0]:
                best[0], best[1] = text, order
            return
        _, c = min(open_cells)
        reps = []
        for v in sorted(cells[c]):
            if not any(st.swap_is_automorphism(v, r) for r in reps):
                reps.append(v)
        for v in reps:
            search(_rank({i: (col, 0 if i == v else 1) for i, col in colors.items()}))

    search(dict(st.base))
    return best[0], best[1]


def canonical_form(g: GestGraph) -> str:
    """String identical for graphs that differ only by node numbering and list order."""
    return _canon(g, {})[0]


def _canon_relabel(g: GestGraph, outer: Mapping[int, str], depth: int, start: int):
    _, order = _canon(g, outer, depth)
    mapping = {old: start + k for k, old in enumerate(order or [])}
    h = relabel(g, mapping)
    scope = dict(outer)
    scope.update({start + k: f"{depth}.{k}" for k in range(len(mapping))})
    nodes = []
    for n in sorted(h.nodes, key=lambda n: n.id):
        if n.subgraph is not None:
            sub, inner = _canon_relabel(n.subgraph, scope, depth + 1, start + len(g))
            im = lambda i: inner.get(i, i)  # noqa: E731
            n = replace(
                n,
                subgraph=sub,
                boundary=tuple(sorted((Edge(im(e.src), im(e.dst), e.relation) for e in n.boundary), key=lambda e: e.key)),
                anchors=tuple(sorted((replace(a, target=im(a.target)) for a in n.anchors),
                                     key=lambda a: (a.holder, a.slot, a.index, a.target))),
            )
        nodes.append(replace(n, properties=dict(sorted(n.properties.items()))))
    return GestGraph(nodes, sorted(h.edges, key=lambda e: e.key)), mapping


def canonical_relabel(g: GestGraph) -> GestGraph:
    """Copy of ``g`` numbered in canonical order, so isomorphic graphs come out equal."""
    return _canon_relabel(g, {}, 0, 0)[0]


def isomorphic(g1: GestGraph, g2: GestGraph) -> bool:
    return len(g1) == len(g2) and len(g1.edges) == len(g2.edges) and canonical_form(g1) == canonical_form(g2)


def relabel(g: GestGraph, mapping: Mapping[int, int]) -> GestGraph:
    """Rename top-level node ids (refs, edges and anchors follow).

    Inner ids of a nested subgraph that would collide with a new outer id are
    renumbered too, since an inner id shadows the outer one.
    """
    m = lambda i: mapping.get(i, i)  # noqa: E731
    new_outer = {m(i) for i in g.ids}
    if len(new_outer) != len(g.ids):
        raise GraphError("relabel mapping merges node ids")
    nodes = []
    for n in g.nodes:
        n2 = _with_refs(replace(n, id=m(n.id)), lambda s, k, r: _remap_ref(r, mapping))
        if n.subgraph is not None:
            sub, boundary, anchors = n.subgraph, n.boundary, n.anchors
            clash = sorted(set(sub.ids) & new_outer)
            if clash:
                fresh = max(new_outer | set(sub.ids) | set(g.ids)) + 1
                inner_map = {i: fresh + k for k, i in enumerate(clash)}
                inner = set(sub.ids)
                sub = relabel(sub, inner_map)
                im = lambda i: inner_map.get(i, i)  # noqa: E731
                boundary = tuple(
                    Edge(im(e.src) if e.src in inner else e.src, im(e.dst) if e.dst in inner else e.dst, e.relation)
                    for e in boundary
                )
                anchors = tuple(replace(a, target=im(a.target)) for a in anchors)
            inner = set(sub.ids)
            boundary = tuple(
                Edge(e.src if e.src in inner else m(e.src), e.dst if e.dst in inner else m(e.dst), e.relation)
                for e in boundary
            )
            anchors = tuple(replace(a, holder=m(a.holder)) for a in anchors)
            # subgraph refs into this graph are ports; rename them too
            port_map = {k: v for k, v in mapping.items() if k not in inner}
            n2 = replace(n2, subgraph=_rename_ports(sub, port_map), boundary=boundary, anchors=anchors)
        nodes.append(n2)
    return GestGraph(nodes, [Edge(m(e.src), m(e.dst), e.relation) for e in g.edges])


def _rename_ports(sub: GestGraph, port_map: Mapping[int, int]) -> GestGraph:
    if not port_map:
        return sub
    nodes = []
    for n in sub.nodes:
        n2 = _with_refs(n, lambda s, k, r: _remap_ref(r, port_map))
        if n.subgraph is not None:
            deeper = {k: v for k, v in port_map.items() if k not in set(n.subgraph.ids)}
            n2 = replace(n2, subgraph=_rename_ports(n.subgraph, deeper))
        nodes.append(n2)
    return GestGraph(nodes, sub.edges)
