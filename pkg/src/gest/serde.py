"""Text serializations of GEST graphs.

V1 (``.gest``) is line oriented and reference based::

    n0 : exists ( John )
    n2 : pick_up ( n0, n1 ) @ playground { verb=pick_up }
    e : n2 -temporal:next-> n3

Nested subgraphs follow their node line inside ``[[`` / ``]]``; inside a
block, ``b :`` lines are boundary edges and ``a :`` lines are anchors.

V2 (``.gest2``) is edge centric: every clause writes both endpoints in full,
with references inlined as the referenced node's phrase in angle brackets::

    [ <John> | pick_up | <football> @ playground ] NEXT [ <Bob> | move_to | @ kitchen ]

Tokens holding punctuation are written as JSON strings.  See
``docs/grammar.md`` for the EBNF.
"""

from __future__ import annotations

import difflib
import json
import re
import warnings
from dataclasses import dataclass, replace

from .core import (
    CATEGORIES,
    REF_SLOTS,
    TEMPORAL_LABELS,
    Anchor,
    Edge,
    EventNode,
    GestGraph,
    Ref,
    Relation,
    canonical_relabel,
    node_name,
    validate,
)

V1, V2 = "v1", "v2"
EXTENSIONS = {".gest": V1, ".gest2": V2}


class GestSyntaxError(ValueError):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


@dataclass(frozen=True)
class SerializedGest:
    format: str
    text: str


def format_for_path(path) -> str:
    for ext, fmt in EXTENSIONS.items():
        if str(path).endswith(ext):
            return fmt
    return V1


def sniff_format(text: str) -> str:
    """V2 when the first non-blank line opens a clause, else V1."""
    for line in text.splitlines():
        line = line.strip()
        if line:
            return V2 if line.startswith("[") else V1
    return V1


# --------------------------------------------------------------------------
# tokens

_V1_SPECIAL = set('()[]{},@#;=:"\\<>-')
_V2_SPECIAL = set('[]|,@#{};=<>%"\\')
_REF = re.compile(r"^n\d+$")
_BARE_REL = re.compile(r"^[A-Za-z0-9_]+$")


def _quote(text: str, special, no_space=False) -> str:
    if no_space and any(ch.isspace() for ch in text):
        return json.dumps(text, ensure_ascii=False)
    if text and text == text.strip() and "\n" not in text and not (set(text) & special) and not _REF.match(text):
        return text
    return json.dumps(text, ensure_ascii=False)


def _rel_token(text: str) -> str:
    return text if _BARE_REL.match(text) else json.dumps(text, ensure_ascii=False)


def _tokenize(text: str, special, line=0, split_ws=False):
    """Split into ``(kind, value)`` pairs: 'sym', 'text' (stripped run) or 'str'."""
    out, k, n = [], 0, len(text)
    buf = []

    def flush():
        run = "".join(buf)
        out.extend(("text", w) for w in (run.split() if split_ws else [run.strip()]) if w)
        buf.clear()

    while k < n:
        ch = text[k]
        if ch == '"':
            flush()
            try:
                value, end = json.JSONDecoder().raw_decode(text, k)
            except json.JSONDecodeError as exc:
                raise GestSyntaxError(line, f"bad quoted string ({exc.msg})") from None
            out.append(("str", value))
            k = end
            continue
        if ch in special:
            flush()
            out.append(("sym", ch))
        else:
            buf.append(ch)
        k += 1
    flush()
    return out


# --------------------------------------------------------------------------
# normalized comparison


def normalized(g: GestGraph) -> GestGraph:
    """Same graph with nodes, edges, boundary and anchors in a fixed order."""
    nodes = []
    for n in sorted(g.nodes, key=lambda n: n.id):
        if n.subgraph is not None:
            n = replace(
                n,
                subgraph=normalized(n.subgraph),
                boundary=tuple(sorted(n.boundary, key=lambda e: e.key)),
                anchors=tuple(sorted(n.anchors, key=lambda a: (a.holder, a.slot, a.index, a.target))),
            )
        nodes.append(replace(n, properties=dict(sorted(n.properties.items()))))
    return GestGraph(nodes, sorted(g.edges, key=lambda e: e.key))


def same_graph(g1: GestGraph, g2: GestGraph) -> bool:
    """Id-exact equality, ignoring list order."""
    return normalized(g1) == normalized(g2)


# --------------------------------------------------------------------------
# V1 writer


def _v1_item(r: Ref) -> str:
    return f"n{r.node}" if r.is_node else _quote(r.literal, _V1_SPECIAL)


def _v1_node_line(n: EventNode) -> str:
    parts = [f"n{n.id} : {_quote(n.action, _V1_SPECIAL)}"]
    if n.entities:
        parts.append("( " + ", ".join(_v1_item(r) for r in n.entities) + " )")
    if n.locations:
        parts.append("@ " + ", ".join(_v1_item(r) for r in n.locations))
    if n.timeframes:
        parts.append("# " + ", ".join(_v1_item(r) for r in n.timeframes))
    if n.properties:
        props = "; ".join(
            f"{_quote(k, _V1_SPECIAL)}={_quote(v, _V1_SPECIAL)}" for k, v in sorted(n.properties.items())
        )
        parts.append("{ " + props + " }")
    return " ".join(parts)


def _v1_rel(rel: Relation) -> str:
    return f"-{_rel_token(rel.category)}:{_rel_token(rel.label)}->"


def _v1_lines(g: GestGraph, depth: int) -> list:
    pad = "  " * depth
    out = []
    for n in sorted(g.nodes, key=lambda n: n.id):
        line = pad + _v1_node_line(n)
        if n.subgraph is None:
            out.append(line)
            continue
        out.append(line + " [[")
        out.extend(_v1_lines(n.subgraph, depth + 1))
        inner = pad + "  "
        for e in sorted(n.boundary, key=lambda e: e.key):
            out.append(f"{inner}b : n{e.src} {_v1_rel(e.relation)} n{e.dst}")
        for a in sorted(n.anchors, key=lambda a: (a.holder, a.slot, a.index, a.target)):
            out.append(f"{inner}a : n{a.holder}.{a.slot}[{a.index}] -> n{a.target}")
        out.append(pad + "]]")
    for e in sorted(g.edges, key=lambda e: e.key):
        out.append(f"{pad}e : n{e.src} {_v1_rel(e.relation)} n{e.dst}")
    return out


def to_v1(g: GestGraph) -> SerializedGest:
    lines = _v1_lines(g, 0)
    return SerializedGest(V1, "\n".join(lines) + ("\n" if lines else ""))


# --------------------------------------------------------------------------
# V1 reader

_REL_PART = r'(?:"(?:[^"\\]|\\.)*"|[A-Za-z0-9_]+)'
_EDGE_RE = re.compile(rf"^([eb])\s*:\s*n(\d+)\s+-({_REL_PART}):({_REL_PART})->\s+n(\d+)$")
_ANCHOR_RE = re.compile(r"^a\s*:\s*n(\d+)\.(entities|locations|timeframes)\[(\d+)\]\s*->\s*n(\d+)$")
_NODE_HEAD = re.compile(r"^n(\d+)\s*:(.*)$", re.S)


def _rel_value(tok: str) -> str:
    return json.loads(tok) if tok.startswith('"') else tok


def _parse_items(tokens, k, stop, line):
    """Comma separated items from ``tokens[k]`` up to a symbol in ``stop``."""
    items = []
    expect_item = True
    while k < len(tokens) and not (tokens[k][0] == "sym" and tokens[k][1] in stop):
        kind, value = tokens[k]
        if kind == "sym":
            if value != ",":
                raise GestSyntaxError(line, f"unexpected {value!r}")
            if expect_item:
                raise GestSyntaxError(line, "empty item")
            expect_item = True
        else:
            if not expect_item:
                raise GestSyntaxError(line, "missing comma")
            if kind == "text" and _REF.match(value):
                items.append(Ref(node=int(value[1:])))
            else:
                items.append(Ref(literal=value))
            expect_item = False
        k += 1
    if items and expect_item:
        raise GestSyntaxError(line, "trailing comma")
    return items, k


def _parse_v1_node(rest: str, node_id: int, line: int):
    """Parse everything after ``n<id> :``; returns ``(EventNode, opens_block)``."""
    tokens = _tokenize(rest, _V1_SPECIAL, line)
    opens = False
    if len(tokens) >= 2 and tokens[-1] == ("sym", "[") and tokens[-2] == ("sym", "["):
        opens = True
        tokens = tokens[:-2]
    if not tokens or tokens[0][0] == "sym":
        raise GestSyntaxError(line, "missing action")
    action = tokens[0][1]
    fields = {"entities": (), "locations": (), "timeframes": ()}
    props = {}
    k = 1
    seen = set()
    while k < len(tokens):
        kind, value = tokens[k]
        if kind != "sym" or value in seen:
            raise GestSyntaxError(line, f"unexpected {value!r}")
        seen.add(value)
        if value == "(":
            items, k = _parse_items(tokens, k + 1, {")", "@", "#", "{", "("}, line)
            if k >= len(tokens) or tokens[k][1] != ")":
                raise GestSyntaxError(line, "unclosed '('")
            fields["entities"] = tuple(items)
            k += 1
        elif value in "@#":
            items, k = _parse_items(tokens, k + 1, {"@", "#", "{", "(", ")", "}"}, line)
            if not items:
                raise GestSyntaxError(line, f"empty {value!r} group")
            fields["locations" if value == "@" else "timeframes"] = tuple(items)
        elif value == "{":
            k += 1
            while k < len(tokens) and tokens[k] != ("sym", "}"):
                if k + 2 >= len(tokens) or tokens[k][0] == "sym" or tokens[k + 1] != ("sym", "="):
                    raise GestSyntaxError(line, "bad property")
                key = tokens[k][1]
                if tokens[k + 2][0] == "sym":
                    raise GestSyntaxError(line, "bad property value")
                props[key] = tokens[k + 2][1]
                k += 3
                if k < len(tokens) and tokens[k] == ("sym", ";"):
                    k += 1
            if k >= len(tokens):
                raise GestSyntaxError(line, "unclosed '{'")
            k += 1
        else:
            raise GestSyntaxError(line, f"unexpected {value!r}")
    node = EventNode(node_id, action, fields["entities"], fields["locations"], fields["timeframes"], props)
    return node, opens


class _Scope:
    def __init__(self, head=None, line=0):
        self.head = head  # EventNode owning this block
        self.line = line
        self.nodes = []
        self.edges = []
        self.boundary = []
        self.anchors = []

    def graph(self):
        return GestGraph(self.nodes, self.edges)


def _parse_v1_strict(text: str, lines: dict = None) -> GestGraph:
    """``lines`` (if given) collects the source line of every node and edge, keyed by scope path."""
    stack = [_Scope()]
    lines = {} if lines is None else lines
    for lineno, raw in enumerate(text.split("\n"), 1):
        line = raw.strip()
        if not line:
            continue
        scope = stack[-1]
        if line == "]]":
            if len(stack) == 1:
                raise GestSyntaxError(lineno, "unmatched ']]'")
            stack.pop()
            head = scope.head
            stack[-1].nodes[-1] = replace(
                head, subgraph=scope.graph(), boundary=tuple(scope.boundary), anchors=tuple(scope.anchors)
            )
            continue
        m = _EDGE_RE.match(line)
        if m:
            kind, a, cat, lab, b = m.groups()
            edge = Edge(int(a), int(b), Relation(_rel_value(cat), _rel_value(lab)))
            path = tuple(sc.head.id for sc in stack[1:])
            lines.setdefault((path, "edge", edge.src, edge.dst), lineno)
            if kind == "b":
                if len(stack) == 1:
                    raise GestSyntaxError(lineno, "boundary edge outside a block")
                scope.boundary.append(edge)
            else:
                scope.edges.append(edge)
            continue
        m = _ANCHOR_RE.match(line)
        if m:
            if len(stack) == 1:
                raise GestSyntaxError(lineno, "anchor outside a block")
            h, slot, idx, t = m.groups()
            scope.anchors.append(Anchor(int(h), slot, int(idx), int(t)))
            continue
        m = _NODE_HEAD.match(line)
        if not m:
            raise GestSyntaxError(lineno, "unrecognized line")
        node, opens = _parse_v1_node(m.group(2), int(m.group(1)), lineno)
        key = (tuple(sc.head.id for sc in stack[1:]), "node", node.id)
        if key in lines:
            lines.setdefault(key + ("dup",), lineno)
        else:
            lines[key] = lineno
        scope.nodes.append(node)
        if opens:
            stack.append(_Scope(node, lineno))
    if len(stack) > 1:
        raise GestSyntaxError(stack[-1].line, "unclosed '[['")
    return stack[0].graph()


# --------------------------------------------------------------------------
# V2 writer

_V2_REL_TEMPORAL = {lab.upper(): lab for lab in TEMPORAL_LABELS}


def _v2_names(g: GestGraph) -> dict:
    """Globally unique phrase per node (keyed by ``(scope path, id)``)."""
    entries = []

    def walk(graph, path):
        for n in sorted(graph.nodes, key=lambda n: n.id):
            entries.append(((path, n.id), node_name(n)))
            if n.subgraph is not None:
                walk(n.subgraph, path + (n.id,))

    walk(g, ())
    counts = {}
    for _, base in entries:
        counts[base] = counts.get(base, 0) + 1
    seen = {}
    names = {}
    for key, base in entries:
        if counts[base] > 1:
            seen[base] = seen.get(base, 0) + 1
            names[key] = (base, seen[base])
        else:
            names[key] = (base, 0)
    return names


def _v2_ref_name(name) -> str:
    base, k = name
    return f"<{_quote(base, _V2_SPECIAL, True)}{'%' + str(k) if k else ''}>"


def _v2_rel(rel: Relation) -> str:
    if rel.category == "temporal" and rel.label in TEMPORAL_LABELS:
        return rel.label.upper()
    return f"{_rel_token(rel.category)}:{_rel_token(rel.label)}"


class _V2Writer:
    def __init__(self, g):
        self.names = _v2_names(g)

    def name_of(self, path, node_id):
        # a reference resolves in the innermost enclosing scope that holds the id
        for k in range(len(path), -1, -1):
            key = (path[:k], node_id)
            if key in self.names:
                return self.names[key]
        return (f"?{node_id}", 0)

    def item(self, r, path):
        if r.is_node:
            return _v2_ref_name(self.name_of(path, r.node))
        return _quote(r.literal, _V2_SPECIAL, True)

    def desc(self, n, path):
        ents = list(n.entities)
        subj = self.item(ents[0], path) if ents else ""
        parts = [f"[ {subj} |" if subj else "[ |", f"{_quote(n.action, _V2_SPECIAL, True)} |"]
        if len(ents) > 1:
            parts.append(", ".join(self.item(r, path) for r in ents[1:]))
        if n.locations:
            parts.append("@ " + ", ".join(self.item(r, path) for r in n.locations))
        if n.timeframes:
            parts.append("# " + ", ".join(self.item(r, path) for r in n.timeframes))
        if n.properties:
            parts.append(
                "{ "
                + "; ".join(f"{_quote(k, _V2_SPECIAL, True)}={_quote(v, _V2_SPECIAL, True)}" for k, v in sorted(n.properties.items()))
                + " }"
            )
        if n.subgraph is not None:
            inner = path + (n.id,)
            clauses = self.clauses(n.subgraph, inner)
            # sorted by text so that re-reading (which renumbers) reproduces the order
            extra = [
                f"BOUNDARY {_v2_ref_name(self.name_of(inner, e.src))} {_v2_rel(e.relation)} "
                f"{_v2_ref_name(self.name_of(inner, e.dst))}"
                for e in n.boundary
            ]
            extra += [
                f"ANCHOR {_v2_ref_name(self.name_of(path, a.holder))} {a.slot} {a.index} "
                f"{_v2_ref_name(self.name_of(inner, a.target))}"
                for a in n.anchors
            ]
            clauses += sorted(extra)
            parts.append("[[ " + " ;; ".join(clauses) + " ]]")
        _, k = self.names[(path, n.id)]
        return " ".join(parts) + " ]" + (f"%{k}" if k else "")

    def clauses(self, g, path):
        nodes = g.node_map()
        out, touched = [], set()
        for e in sorted(g.edges, key=lambda e: e.key):
            touched.update((e.src, e.dst))
            out.append(f"{self.desc(nodes[e.src], path)} {_v2_rel(e.relation)} {self.desc(nodes[e.dst], path)}")
        for n in sorted(g.nodes, key=lambda n: n.id):
            if n.id not in touched:
                out.append(self.desc(n, path))
        return out


def to_v2(g: GestGraph, canonical: bool = False) -> SerializedGest:
    """Edge-centric text in id order.

    With ``canonical`` the graph is renumbered first, so the text depends only
    on the graph up to isomorphism (repair uses this to stay idempotent).
    """
    if canonical:
        g = canonical_relabel(g)
    lines = _V2Writer(g).clauses(g, ())
    return SerializedGest(V2, "\n".join(lines) + ("\n" if lines else ""))


# --------------------------------------------------------------------------
# V2 reader


@dataclass
class _RawDesc:
    subject: object
    action: str
    objects: list
    locations: list
    timeframes: list
    props: dict
    suffix: int
    scope: object  # nested _RawScope or None

    def base(self):
        if self.action == "exists" and self.subject is not None and not self.objects and self.subject[0] == "lit":
            return self.subject[1]
        return self.action

    def name(self):
        return (self.base(), self.suffix)


@dataclass
class _RawScope:
    clauses: list


class _V2Parser:
    def __init__(self, text, line=0, lenient=False):
        self.lenient = lenient
        self.toks = _tokenize(text.replace("\n", " \x00 "), _V2_SPECIAL | {"\x00"}, line, split_ws=True)
        self.k = 0
        self.line = line

    def err(self, reason):
        raise GestSyntaxError(self.line, reason)

    def peek(self, off=0):
        j = self.k + off
        return self.toks[j] if j < len(self.toks) else (None, None)

    def take(self):
        t = self.peek()
        self.k += 1
        return t

    def sym(self, ch):
        if self.peek() != ("sym", ch):
            self.err(f"expected {ch!r}")
        self.k += 1

    def scope(self, nested):
        clauses = []
        while True:
            while self.peek() in (("sym", "\x00"), ("sym", ";")):
                self.k += 1
            t = self.peek()
            if t == (None, None):
                if nested:
                    self.err("unclosed '[['")
                return _RawScope(clauses)
            if nested and t == ("sym", "]") and self.peek(1) == ("sym", "]"):
                self.k += 2
                return _RawScope(clauses)
            clauses.append(self.clause())
            t = self.peek()
            if t[0] is not None and t not in (("sym", "\x00"), ("sym", ";")) and not (
                nested and t == ("sym", "]")
            ):
                self.err("clause not terminated")

    def ref(self):
        self.sym("<")
        kind, value = self.take()
        if kind not in ("text", "str"):
            self.err("bad reference")
        suffix = 0
        if self.peek() == ("sym", "%"):
            self.k += 1
            suffix = self.suffix()
        self.sym(">")
        return ("ref", (value, suffix))

    def suffix(self):
        if self.lenient and not (self.peek()[0] == "text" and self.peek()[1].isdigit()):
            return 0  # number lost; the name is matched up later
        return self.int_text()

    def int_text(self):
        kind, value = self.take()
        if kind != "text" or not value.isdigit():
            self.err("expected a number")
        return int(value)

    def item(self):
        t = self.peek()
        if t == ("sym", "<"):
            return self.ref()
        if t[0] in ("text", "str"):
            self.k += 1
            return ("lit", t[1])
        self.err("expected an item")

    def items(self, stop):
        out = []
        if self.peek()[0] == "sym" and self.peek()[1] in stop:
            return out
        out.append(self.item())
        while self.peek() == ("sym", ","):
            self.k += 1
            out.append(self.item())
        return out

    def desc(self):
        self.sym("[")
        subject = None
        if self.peek() != ("sym", "|"):
            subject = self.item()
        self.sym("|")
        kind, action = self.take()
        if kind not in ("text", "str") or not action:
            self.err("missing action")
        self.sym("|")
        objects = self.items({"@", "#", "{", "[", "]"})
        locs, tfs, props, scope = [], [], {}, None
        if self.peek() == ("sym", "@"):
            self.k += 1
            locs = self.items({"#", "{", "[", "]"})
        if self.peek() == ("sym", "#"):
            self.k += 1
            tfs = self.items({"{", "[", "]"})
        if self.peek() == ("sym", "{"):
            self.k += 1
            while self.peek() != ("sym", "}"):
                kk, key = self.take()
                if kk not in ("text", "str"):
                    self.err("bad property")
                self.sym("=")
                kv, value = self.take()
                if kv not in ("text", "str"):
                    self.err("bad property value")
                props[key] = value
                if self.peek() == ("sym", ";"):
                    self.k += 1
            self.k += 1
        if self.peek() == ("sym", "[") and self.peek(1) == ("sym", "["):
            self.k += 2
            scope = self.scope(nested=True)
        self.sym("]")
        suffix = 0
        if self.peek() == ("sym", "%"):
            self.k += 1
            suffix = self.suffix()
        if subject is None and objects:
            self.err("objects without a subject")
        return _RawDesc(subject, action, objects, locs, tfs, props, suffix, scope)

    def rel(self):
        kind, value = self.take()
        if kind == "text" and ":" not in value:
            if value not in _V2_REL_TEMPORAL:
                hit = _snap(value, list(TEMPORAL_LABELS)) if self.lenient else None
                if hit is None:
                    self.err(f"unknown relation {value!r}")
                value = hit.upper()
            return Relation("temporal", _V2_REL_TEMPORAL[value])
        if kind == "str":
            cat = value
            kind, value = self.take()
            if kind != "text" or not value.startswith(":"):
                self.err("bad relation")
            rest = value[1:]
        elif kind == "text":
            cat, _, rest = value.partition(":")
        else:
            self.err("expected a relation")
        if not rest:
            kind, rest = self.take()
            if kind != "str":
                self.err("bad relation")
        if not cat or not rest:
            self.err("bad relation")
        if self.lenient and cat not in CATEGORIES:
            cat = _snap(cat, list(CATEGORIES)) or cat
        return Relation(cat, rest)

    def clause(self):
        t = self.peek()
        if t == ("text", "BOUNDARY"):
            self.k += 1
            a = self.ref()
            r = self.rel()
            b = self.ref()
            return ("boundary", a[1], r, b[1])
        if t == ("text", "ANCHOR"):
            self.k += 1
            h = self.ref()
            kind, slot = self.take()
            if kind != "text" or slot not in REF_SLOTS:
                self.err("bad anchor")
            index = self.int_text()
            tgt = self.ref()
            return ("anchor", h[1], slot, index, tgt[1])
        left = self.desc()
        t = self.peek()
        if t[0] in ("text", "str"):
            r = self.rel()
            right = self.desc()
            return ("edge", left, r, right)
        return ("node", left)


def _clause_descs(c):
    if c[0] == "node":
        return [c[1]]
    if c[0] == "edge":
        return [c[1], c[3]]
    return []


class _V2Names:
    """Name lookup; in lenient mode unknown names snap to a close known one."""

    def __init__(self, ids, lenient, actions):
        self.ids = ids
        self.lenient = lenient
        self.actions = actions
        self._keys = {f"{b}%{k}": (b, k) for b, k in ids}

    def get(self, name):
        if name in self.ids:
            return self.ids[name]
        if not self.lenient:
            raise GestSyntaxError(0, f"reference to unknown node {name[0]!r}")
        hit = difflib.get_close_matches(f"{name[0]}%{name[1]}", list(self._keys), n=2, cutoff=0.75)
        if len(hit) == 1 or (len(hit) == 2 and self._keys[hit[0]][0] != self._keys[hit[1]][0]):
            self.actions.append(f"snapped reference {name[0]!r} to {self._keys[hit[0]][0]!r}")
            return self.ids[self._keys[hit[0]]]
        self.actions.append(f"dropped reference to unknown node {name[0]!r}")
        return None


def _merge_corrupted(variants, winner, actions) -> dict:
    """Map one-off names that look like a damaged copy of another description onto it."""
    totals = {name: sum(n for n, _ in bucket.values()) for name, bucket in variants.items()}
    bases = {}
    for b, k in variants:
        bases.setdefault(b, set()).add(k)
    alias = {}
    for name in variants:
        base, k = name
        if totals[name] != 1:
            continue
        if k == 0 and bases[base] - {0}:
            pool = [(base, j) for j in bases[base] if j]
        elif len(bases) > 1 and k == 0 and len(bases[base]) == 1:
            close = difflib.get_close_matches(base, [b for b in bases if b != base], n=3, cutoff=0.75)
            pool = [(b, j) for b in close for j in bases[b]]
        else:
            continue
        pool = [p for p in pool if p not in alias]
        if not pool:
            continue
        mine = repr(winner[name])
        scored = sorted(
            ((difflib.SequenceMatcher(None, mine, repr(winner[p])).ratio(), p) for p in pool), reverse=True
        )
        if scored[0][0] >= 0.8 and (len(scored) == 1 or scored[1][0] < scored[0][0]):
            alias[name] = scored[0][1]
            actions.append(f"merged damaged description {base!r} into {scored[0][1][0]!r}")
    return alias


def _v2_build(root: _RawScope, lenient: bool = False, actions=None) -> GestGraph:
    """Assemble a graph; ``lenient`` resolves conflicts by vote and drops what cannot resolve."""
    actions = actions if actions is not None else []
    variants = {}

    def count(scope):
        for c in scope.clauses:
            for d in _clause_descs(c):
                bucket = variants.setdefault(d.name(), {})
                key = repr(d)
                n, first = bucket.get(key, (0, d))
                bucket[key] = (n + 1, first)
                if d.scope is not None:
                    count(d.scope)

    count(root)
    winner = {}
    for name, bucket in variants.items():
        if len(bucket) > 1:
            if not lenient:
                raise GestSyntaxError(0, f"conflicting descriptions for {name[0]!r}")
            actions.append(f"resolved conflicting descriptions for {name[0]!r} by majority")
        # most frequent variant; ties go to the first seen
        best = max(bucket.values(), key=lambda nv: nv[0])
        winner[name] = best[1]

    alias = _merge_corrupted(variants, winner, actions) if lenient else {}
    owner, order = {}, []

    def place(scope, sid):
        for c in scope.clauses:
            for d in _clause_descs(c):
                name = alias.get(d.name(), d.name())
                if name in owner:
                    continue
                owner[name] = sid
                order.append(name)
                w = winner[name]
                if w.scope is not None:
                    place(w.scope, name)

    place(root, None)
    ids = {name: k for k, name in enumerate(order)}
    for name, target in alias.items():
        ids[name] = ids[target]
    names = _V2Names(ids, lenient, actions)

    def resolve_all(items):
        out = []
        for kind, value in items:
            if kind == "lit":
                out.append(Ref(literal=value))
            else:
                nid = names.get(value)
                if nid is not None:
                    out.append(Ref(node=nid))
        return tuple(out)

    def build(scope, sid):
        nodes, edges, boundary, anchors = [], [], [], []
        for name in order:
            if owner[name] != sid:
                continue
            d = winner[name]
            head = [d.subject] if d.subject is not None else []
            node = EventNode(
                names.ids[name],
                d.action,
                resolve_all(head + list(d.objects)),
                resolve_all(d.locations),
                resolve_all(d.timeframes),
                dict(d.props),
            )
            if d.scope is not None:
                sub, bnd, anc = build(d.scope, name)
                node = replace(node, subgraph=sub, boundary=tuple(bnd), anchors=tuple(anc))
            nodes.append(node)
        nested = {names.ids[n] for n in order if owner[n] == sid}
        for c in scope.clauses:
            if c[0] == "edge":
                a, b = names.ids[c[1].name()], names.ids[c[3].name()]
                if lenient and not (a in nested and b in nested):
                    actions.append("dropped edge between different scopes")
                    continue
                edges.append(Edge(a, b, c[2]))
            elif c[0] == "boundary":
                a, b = names.get(c[1]), names.get(c[3])
                if a is not None and b is not None:
                    boundary.append(Edge(a, b, c[2]))
            elif c[0] == "anchor":
                h, t = names.get(c[1]), names.get(c[4])
                if h is not None and t is not None:
                    anchors.append(Anchor(h, c[2], c[3], t))
        return GestGraph(nodes, edges), boundary, anchors

    g, bnd, anc = build(root, None)
    if bnd or anc:
        if not lenient:
            raise GestSyntaxError(0, "BOUNDARY/ANCHOR outside a nested block")
        actions.append("dropped BOUNDARY/ANCHOR outside a nested block")
    return g


def _parse_v2_line(line: str, lineno: int, lenient: bool = False) -> list:
    p = _V2Parser(line, lineno, lenient)
    return p.scope(nested=False).clauses


def _parse_v2_strict(text: str) -> GestGraph:
    clauses = []
    for lineno, line in enumerate(text.split("\n"), 1):
        if line.strip():
            clauses.extend(_parse_v2_line(line, lineno))
    return _v2_build(_RawScope(clauses))


# --------------------------------------------------------------------------
# public reader


_PROBLEM = re.compile(r"^((?:node \d+ > )*)(?:node (\d+)(: duplicate)?|edge (\d+)->(\d+))")


def _problem_line(problem: str, lines: dict) -> int:
    m = _PROBLEM.match(problem)
    if not m:
        return 0
    path = tuple(int(x) for x in re.findall(r"\d+", m.group(1)))
    if m.group(2) is not None:
        key = (path, "node", int(m.group(2)))
        if m.group(3):
            key += ("dup",)
    else:
        key = (path, "edge", int(m.group(4)), int(m.group(5)))
    return lines.get(key, 0)


def _strict(text: str, fmt: str) -> GestGraph:
    """Parse and validate; validation problems are reported at their source line (V1) or line 0."""
    lines = {}
    g = _parse_v1_strict(text, lines) if fmt == V1 else _parse_v2_strict(text)
    problems = validate(g)
    if problems:
        raise GestSyntaxError(_problem_line(problems[0], lines), problems[0])
    return g


def from_text(s, format: str = None, repair_text: bool = True) -> GestGraph:
    """Parse serialized text; malformed input goes through :func:`repair` first.

    Without ``format`` the dialect is guessed from the first line.
    """
    if isinstance(s, SerializedGest):
        text, fmt = s.text, s.format
    else:
        text, fmt = s, format or sniff_format(s)
    try:
        return _strict(text, fmt)
    except GestSyntaxError:
        if not repair_text:
            raise
    fixed, actions = repair(text, fmt)
    if actions:
        warnings.warn("repaired GEST text: " + "; ".join(actions), stacklevel=2)
    return _strict(fixed, fmt)


def serialize(g: GestGraph, format: str = V1) -> SerializedGest:
    return to_v1(g) if format == V1 else to_v2(g)


# --------------------------------------------------------------------------
# repair


def _quote_spans(line: str):
    spans, k = [], 0
    while True:
        a = line.find('"', k)
        if a < 0:
            return spans
        b = a + 1
        while b < len(line):
            if line[b] == "\\":
                b += 2
                continue
            if line[b] == '"':
                break
            b += 1
        if b >= len(line):
            return spans + [(a, None)]
        spans.append((a, b + 1))
        k = b + 1


def _fix_quotes(line: str, actions, lineno):
    spans = _quote_spans(line)
    if spans and spans[-1][1] is None:
        a = spans[-1][0]
        actions.append(f"line {lineno}: removed unmatched quote")
        line = line[:a] + line[a + 1 :]
    return line


def _outside_quotes(line: str):
    mask = [True] * len(line)
    for a, b in _quote_spans(line):
        for k in range(a, b if b is not None else len(line)):
            mask[k] = False
    return mask


_SPLIT_POINT = re.compile(r"(?<=[)}\w\"\]])\s*(?=(?:n\d+\s*:(?!\S*->)\s|[eb]\s*:\s*n\d+\s|a\s*:\s*n\d+\.))")


def _split_merged(line: str):
    mask = _outside_quotes(line)
    cuts = [m.start() for m in _SPLIT_POINT.finditer(line) if m.start() > 0 and mask[m.start()]]
    out, prev = [], 0
    for c in cuts:
        out.append(line[prev:c])
        prev = c
    out.append(line[prev:])
    return [p for p in (x.strip() for x in out) if p]


def _balance(text: str, pairs, group_markers, actions, lineno):
    """Drop unmatched closers; close openers before the next group marker or at line end."""
    mask = _outside_quotes(text)
    out, stack = [], []
    closers = {c: o for o, c in pairs}
    openers = dict(pairs)
    for k, ch in enumerate(text):
        if not mask[k]:
            out.append(ch)
            continue
        if ch in group_markers and stack:
            while stack:
                out.append(" " + openers[stack.pop()] + " ")
                actions.append(f"line {lineno}: closed unbalanced bracket")
        if ch in openers:
            stack.append(ch)
        elif ch in closers:
            if not stack or stack[-1] != closers[ch]:
                actions.append(f"line {lineno}: dropped stray {ch!r}")
                continue
            stack.pop()
        out.append(ch)
    while stack:
        out.append(" " + openers[stack.pop()])
        actions.append(f"line {lineno}: closed unbalanced bracket")
    return "".join(out)


def _snap(value, choices):
    value = value.strip().lower()
    if value in choices:
        return value
    hit = difflib.get_close_matches(value, choices, n=1, cutoff=0.5)
    return hit[0] if hit else None


def _lenient_relation(text: str):
    core = text.strip().strip("->").strip()
    if ":" in core:
        cat, _, lab = core.partition(":")
    else:
        cat, lab = "", core
        for c in CATEGORIES:
            if core.lower().startswith(c):
                cat, lab = c, core[len(c) :]
                break
    try:
        cat = json.loads(cat) if cat.strip().startswith('"') else cat.strip(" -")
        lab = json.loads(lab) if lab.strip().startswith('"') else lab.strip(" ->")
    except json.JSONDecodeError:
        return None
    cat = _snap(cat, list(CATEGORIES)) if cat else "temporal"
    if cat is None or not lab:
        return None
    if cat == "temporal":
        lab = _snap(lab, list(TEMPORAL_LABELS))
        if lab is None:
            return None
    return Relation(cat, lab)


_LENIENT_EDGE = re.compile(r"^(?:([eb])\s*:?\s*|:\s*)?n?(\d+)\s+(.*?)\s*n?(\d+)$")
_LENIENT_ANCHOR = re.compile(
    r"^a\s*:?\s*n?(\d+)\s*\.?\s*(entities|locations|timeframes)\s*\[?\s*(\d+)\s*\]?\s*-?>?\s*n?(\d+)$"
)
_LENIENT_NODE = re.compile(r"^n?(\d*)\s*:?\s*(.*)$", re.S)


def _looks_like_edge(line: str) -> bool:
    mask = _outside_quotes(line)
    if any(line[k : k + 2] == "->" and mask[k] for k in range(len(line) - 1)):
        return True
    if re.match(r"^[eb]\s*:?\s*n?\d+\s", line):
        return True
    return bool(re.match(r"^:\s*n\d+\s+-", line))


class _RepScope:
    def __init__(self, head=None):
        self.head = head
        self.nodes = []
        self.edges = []
        self.boundary = []
        self.anchors = []


def _lenient_v1(text: str, actions):
    lines = []
    for lineno, raw in enumerate(text.split("\n"), 1):
        if not raw.strip():
            continue
        pieces = _split_merged(raw.strip())
        if len(pieces) > 1:
            actions.append(f"line {lineno}: split merged line")
        lines.extend((lineno, p) for p in pieces)

    stack = [_RepScope()]
    for lineno, line in lines:
        scope = stack[-1]
        if re.fullmatch(r"\]\]?", line):
            if len(stack) == 1:
                actions.append(f"line {lineno}: dropped unmatched ']]'")
            else:
                stack.pop()
                stack[-1].nodes.append((scope.head, scope))
            continue
        line = _fix_quotes(line, actions, lineno)
        if line.startswith("a") and any(f".{slot}" in line for slot in REF_SLOTS):
            m = _LENIENT_ANCHOR.match(line)
            if m and len(stack) > 1:
                h, slot, idx, t = m.groups()
                scope.anchors.append(Anchor(int(h), slot, int(idx), int(t)))
            else:
                actions.append(f"line {lineno}: dropped malformed anchor")
            continue
        if _looks_like_edge(line):
            m = _LENIENT_EDGE.match(line)
            rel = _lenient_relation(m.group(3)) if m else None
            if rel is None:
                actions.append(f"line {lineno}: dropped malformed edge")
                continue
            edge = Edge(int(m.group(2)), int(m.group(4)), rel)
            strict = _EDGE_RE.match(line)
            if not strict:
                actions.append(f"line {lineno}: normalized edge syntax")
            elif (_rel_value(strict.group(3)), _rel_value(strict.group(4))) != (rel.category, rel.label):
                actions.append(f"line {lineno}: relation {strict.group(3)}:{strict.group(4)} read as {rel}")
            if m.group(1) == "b" and len(stack) > 1:
                scope.boundary.append(edge)
            else:
                scope.edges.append(edge)
            continue
        m = _LENIENT_NODE.match(line)
        digits, rest = m.group(1), m.group(2)
        opens = bool(re.search(r"\[\[?\s*$", rest)) and not rest.rstrip().endswith("]")
        if opens:
            rest = re.sub(r"\[\[?\s*$", "", rest)
        rest = _balance(rest, (("(", ")"), ("{", "}")), {"@", "#"}, actions, lineno)
        try:
            node, _ = _parse_v1_node(rest, int(digits) if digits else -1, lineno)
        except GestSyntaxError as exc:
            node = _salvage_node(rest, int(digits) if digits else -1, lineno)
            if node is None:
                actions.append(f"line {lineno}: dropped malformed line ({exc.reason})")
                if opens:
                    stack.append(_RepScope(None))
                continue
            actions.append(f"line {lineno}: salvaged malformed node line")
        if not digits:
            actions.append(f"line {lineno}: node without id")
        if opens:
            stack.append(_RepScope(node))
        else:
            scope.nodes.append((node, None))
    while len(stack) > 1:
        scope = stack.pop()
        actions.append("closed unterminated '[[' block")
        stack[-1].nodes.append((scope.head, scope))
    return stack[0]


def _salvage_node(rest: str, node_id: int, line: int):
    """Keep the action and any well-formed groups of a broken node line."""
    try:
        tokens = _tokenize(rest, _V1_SPECIAL, line)
    except GestSyntaxError:
        return None
    if not tokens or tokens[0][0] == "sym":
        return None
    # retry with each trailing portion removed until it parses
    cut = rest
    while cut:
        idx = max(cut.rfind(c) for c in "(@#{")
        if idx <= 0:
            break
        cut = cut[:idx]
        try:
            node, _ = _parse_v1_node(cut, node_id, line)
            return node
        except GestSyntaxError:
            continue
    return EventNode(node_id, tokens[0][1])


def _fix_scope(scope: _RepScope, ports, outer_ids, actions, path="") -> tuple:
    """Resolve duplicates and dangling references; returns (GestGraph, boundary, anchors)."""
    raw = [(n, sub) for n, sub in scope.nodes if n is not None]
    if len(raw) != len(scope.nodes):
        actions.append(f"{path}dropped block without a node line")
    if any(not n.action for n, _ in raw):
        actions.append(f"{path}dropped node without an action")
        raw = [(n, sub) for n, sub in raw if n.action]
    taken = set()
    fresh = max([n.id for n, _ in raw] + [-1]) + 1
    fixed = []
    for n, sub in raw:
        if n.id < 0 or n.id in taken:
            if n.id >= 0:
                actions.append(f"{path}renumbered duplicate node n{n.id} to n{fresh}")
            else:
                actions.append(f"{path}assigned id n{fresh}")
            n = replace(n, id=fresh)
            fresh += 1
        taken.add(n.id)
        fixed.append((n, sub))
    allowed = taken | set(ports)

    nodes = []
    for n, sub in fixed:
        changes = {}
        for slot in REF_SLOTS:
            vals = getattr(n, slot)
            keep = tuple(r for r in vals if not r.is_node or r.node in allowed)
            if len(keep) != len(vals):
                actions.append(f"{path}dropped dangling reference from n{n.id}.{slot}")
            changes[slot] = keep
        n = replace(n, **changes)
        if sub is not None:
            g, bnd, anc = _fix_scope(sub, set(n.referenced_ids()), taken, actions, f"{path}n{n.id} > ")
            n = replace(n, subgraph=g, boundary=tuple(bnd), anchors=tuple(anc))
        nodes.append(n)

    edges, keys = [], set()
    for e in scope.edges:
        if e.src not in taken or e.dst not in taken:
            actions.append(f"{path}dropped edge n{e.src}->n{e.dst} with undefined endpoint")
        elif e.src == e.dst and e.relation.category != "semantic":
            actions.append(f"{path}dropped self-loop n{e.src}")
        elif e.key in keys:
            actions.append(f"{path}dropped duplicate edge n{e.src}->n{e.dst}")
        else:
            keys.add(e.key)
            edges.append(e)

    boundary = []
    for e in scope.boundary:
        ok = (e.src in taken) != (e.dst in taken) and (e.src in outer_ids or e.dst in outer_ids)
        if ok:
            boundary.append(e)
        else:
            actions.append(f"{path}dropped invalid boundary edge")
    anchors = [a for a in scope.anchors if a.target in taken]
    if len(anchors) != len(scope.anchors):
        actions.append(f"{path}dropped invalid anchor")
    return GestGraph(nodes, edges), boundary, anchors


def _drop_bad_anchors(g: GestGraph, actions) -> GestGraph:
    nodes = g.node_map()
    out = []
    for n in g.nodes:
        if n.anchors:
            keep = []
            for a in n.anchors:
                h = nodes.get(a.holder)
                vals = getattr(h, a.slot, ()) if h is not None else ()
                if a.index < len(vals) and vals[a.index].node == n.id:
                    keep.append(a)
                else:
                    actions.append(f"dropped unresolved anchor on n{n.id}")
            n = replace(n, anchors=tuple(keep))
        if n.subgraph is not None:
            n = replace(n, subgraph=_drop_bad_anchors(n.subgraph, actions))
        out.append(n)
    return GestGraph(out, g.edges)


def _repair_v1(text: str):
    actions = []
    try:
        g = _strict(text, V1)
        return to_v1(g).text, actions
    except GestSyntaxError:
        pass
    root = _lenient_v1(text, actions)
    g, _, _ = _fix_scope(root, (), set(), actions)
    g = _drop_bad_anchors(g, actions)
    return to_v1(g).text, actions


def _top_level_descs(line: str):
    """Substrings of ``line`` that look like complete ``[ ... ]`` descriptions."""
    mask = _outside_quotes(line)
    out, depth, start = [], 0, None
    for k, ch in enumerate(line):
        if not mask[k]:
            continue
        if ch == "[":
            if depth == 0:
                start = k
            depth += 1
        elif ch == "]" and depth:
            depth -= 1
            if depth == 0:
                end = k + 1
                m = re.match(r"%\d+", line[end:])
                out.append(line[start : end + (m.end() if m else 0)])
    return out


def _lenient_v2_line(line: str, lineno: int, actions):
    try:
        return _parse_v2_line(line, lineno, lenient=True)
    except GestSyntaxError:
        pass
    fixed = _balance(line, (("[", "]"), ("{", "}"), ("<", ">")), set(), actions, lineno)
    try:
        clauses = _parse_v2_line(fixed, lineno, lenient=True)
        actions.append(f"line {lineno}: balanced brackets")
        return clauses
    except GestSyntaxError as exc:
        reason = exc.reason
    # keep whichever node descriptions still parse on their own
    clauses = []
    for piece in _top_level_descs(fixed):
        try:
            clauses.extend(c for c in _parse_v2_line(piece, lineno, lenient=True) if c[0] == "node")
        except GestSyntaxError:
            continue
    actions.append(f"line {lineno}: dropped malformed clause ({reason}), kept {len(clauses)} description(s)")
    return clauses


def _as_rep_scope(g: GestGraph, boundary=(), anchors=(), head=None) -> _RepScope:
    scope = _RepScope(head)
    for n in g.nodes:
        sub = None
        if n.subgraph is not None:
            sub = _as_rep_scope(n.subgraph, n.boundary, n.anchors, n)
        scope.nodes.append((n, sub))
    scope.edges = list(g.edges)
    scope.boundary = list(boundary)
    scope.anchors = list(anchors)
    return scope


def _repair_v2(text: str):
    actions = []
    try:
        return to_v2(_strict(text, V2), canonical=True).text, actions
    except GestSyntaxError:
        pass
    clauses = []
    for lineno, raw in enumerate(text.split("\n"), 1):
        line = raw.strip()
        if line:
            clauses.extend(_lenient_v2_line(_fix_quotes(line, actions, lineno), lineno, actions))
    g = _v2_build(_RawScope(clauses), lenient=True, actions=actions)
    g, _, _ = _fix_scope(_as_rep_scope(g), (), set(), actions)
    g = _drop_bad_anchors(g, actions)
    return to_v2(g, canonical=True).text, actions


def repair(text: str, format: str = V1):
    """Return ``(repaired_text, actions)``; the result always parses under ``format``."""
    return _repair_v1(text) if format == V1 else _repair_v2(text)


# --------------------------------------------------------------------------
# fuzzing


def delete_chars(text: str, rng, max_deletions: int = 3) -> str:
    k = rng.randint(1, max_deletions)
    chars = list(text)
    for _ in range(min(k, len(chars))):
        del chars[rng.randrange(len(chars))]
    return "".join(chars)


def recovers(original: GestGraph, corrupted: str, format: str = V1) -> bool:
    """Parsed (after repair) into a valid graph keeping every node of the original."""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            g = from_text(corrupted, format)
    except GestSyntaxError:
        return False
    return not validate(g) and len(g) == len(original)


def fuzz_recovery_rate(graphs, rng, format: str = V1, max_deletions: int = 3) -> float:
    ok = 0
    for g in graphs:
        text = serialize(g, format).text
        ok += recovers(g, delete_chars(text, rng, max_deletions), format)
    return ok / max(1, len(graphs))
