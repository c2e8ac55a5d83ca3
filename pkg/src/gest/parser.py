"""Ground-truth GEST construction from controlled-grammar stories and timed SVO lists.

Supported story grammar (one clause per sentence, optional timeframe prefix or
suffix, optional "Then" / "After that" / "Following that" / "Afterwards"):

    SUBJ (went|moved|travelled|traveled|journeyed) [back] to the L
    SUBJ (is|are) in the L
    SUBJ (is|are) (no longer|not) in the L             -> negated=true
    SUBJ (is|are) either in the L1 or the L2          -> two locations, indefinite=true
    SUBJ (picked up|got|grabbed|took) DET O [there]   (also "picked it up")
    SUBJ (dropped|discarded|put down|left) DET O [there]
    SUBJ (gave|handed|passed) DET O to NAME           (also "gave NAME the O")

SUBJ is a capitalized name, "A and B", or a pronoun he/she/they. O may be "it".
DET is one of the/a/an/his/her/their. Sentences ending in '?' are questions
and are skipped.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional, Sequence

from .core import NEXT, MEANWHILE, SAME_TIME, SAME_ENTITY, Edge, EventNode, GestGraph, lit, ref

TIMEFRAMES = ("yesterday", "this morning", "this afternoon", "this evening")
TIMEFRAME_RANK = {t: k for k, t in enumerate(TIMEFRAMES)}

MOVE_VERBS = {"went": "go", "moved": "move", "travelled": "travel", "traveled": "travel", "journeyed": "journey"}
TAKE_VERBS = {"picked up": "pick_up", "got": "get", "grabbed": "grab", "took": "take"}
DROP_VERBS = {"dropped": "drop", "discarded": "discard", "put down": "put_down", "left": "leave"}
GIVE_VERBS = {"gave": "give", "handed": "hand", "passed": "pass"}

ACTION_MOVE = "move_to"
ACTION_IS_IN = "is_in"
ACTION_PICK = "pick_up"
ACTION_DROP = "drop"
ACTION_GIVE = "give"


class ParseError(ValueError):
    pass


class UnparsableSentence(ParseError):
    def __init__(self, index, reason):
        super().__init__(f"sentence {index}: {reason}")
        self.index = index
        self.reason = reason


class UnresolvedPronoun(ParseError):
    def __init__(self, index, pronoun=""):
        super().__init__(f"sentence {index}: cannot resolve pronoun {pronoun!r}")
        self.index = index
        self.pronoun = pronoun


@dataclass
class Story:
    sentences: list
    id: str = ""

    @classmethod
    def from_text(cls, text: str, id: str = "") -> "Story":
        parts = re.findall(r"[^.?]*[.?]", text)
        rest = re.sub(r"[^.?]*[.?]", "", text).strip()
        if rest:
            parts.append(rest)
        return cls([p.strip() for p in parts if p.strip()], id)

    def text(self) -> str:
        return " ".join(self.sentences)


@dataclass(frozen=True)
class TimedSvo:
    subject: str
    verb: str
    object: str = ""
    start: float = 0.0
    end: float = 0.0

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"SVO starts after it ends: {self}")


@dataclass(frozen=True)
class AliasAnnotation:
    sentence: int
    surface: str
    resolution: str  # existing entity key, or "new"
    story: str = ""


@dataclass
class WorldState:
    last_location: dict = field(default_factory=dict)
    holdings: dict = field(default_factory=dict)
    timeframe_cursor: Optional[str] = None


@dataclass(frozen=True)
class Mention:
    sentence: int
    surface: str
    actor: Optional[str] = None


# --------------------------------------------------------------------------
# data files


def _data_path(name):
    return resources.files("gest") / "data" / name


def read_personal_objects(path=None) -> frozenset:
    text = open(path, encoding="utf-8").read() if path else _data_path("personal_objects.txt").read_text()
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip() and not w.startswith("#"))


def read_name_genders(path=None) -> dict:
    text = open(path, encoding="utf-8").read() if path else _data_path("names.tsv").read_text()
    out = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        name, gender = line.split("\t")[:2]
        out[name.strip()] = gender.strip().lower()
    return out


DEFAULT_PERSONAL_OBJECTS = read_personal_objects()
NAME_GENDERS = read_name_genders()


def read_babi(path) -> list:
    """Stories from a bAbI task file; numbering restarts at 1 for a new story.

    Question lines (tab-separated answers) are kept as sentences ending in '?'
    so sentence indices match the file, and are skipped when building graphs.
    """
    stories, current = [], None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            num, _, body = line.partition(" ")
            if not num.isdigit():
                raise ParseError(f"bad bAbI line: {line!r}")
            if int(num) == 1 or current is None:
                current = Story([], id=str(len(stories)))
                stories.append(current)
            current.sentences.append(body.split("\t")[0].strip())
    return stories


def read_story_file(path) -> list:
    """bAbI-numbered file, or free text holding one story."""
    text = open(path, encoding="utf-8").read()
    first = next((ln for ln in text.splitlines() if ln.strip()), "")
    if re.match(r"^\d+ ", first):
        return read_babi(path)
    return [Story.from_text(text)]


def read_svo_jsonl(path) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(
                    TimedSvo(rec["subject"], rec["verb"], rec.get("object", "") or "", float(rec["start"]), float(rec["end"]))
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ParseError(f"{path}:{lineno}: bad SVO record ({exc})") from exc
    return out


def read_aliases(path) -> dict:
    """story id -> list of AliasAnnotation."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                a = AliasAnnotation(int(rec["sentence"]), rec["surface"], rec["resolution"], str(rec.get("story", "")))
            except (KeyError, ValueError, TypeError) as exc:
                raise ParseError(f"{path}:{lineno}: bad alias record ({exc})") from exc
            out.setdefault(a.story, []).append(a)
    return out


# --------------------------------------------------------------------------
# entities


class EntityResolver:
    """Maps surface mentions to entity keys.

    Same-name mentions share an entity, except personal objects (one per
    owner) and mentions annotated as "new".  Hand-offs re-assign owners.
    """

    def __init__(self, aliases: Iterable[AliasAnnotation] = (), personal_objects=DEFAULT_PERSONAL_OBJECTS):
        self.aliases = {(a.sentence, a.surface.lower()): a.resolution for a in aliases}
        self.personal = frozenset(p.lower() for p in personal_objects)
        self.surface = {}  # key -> surface
        self.by_surface = {}  # lowercase surface -> [key, ...]
        self.owner = {}

    def _new(self, surface, key=None):
        bucket = self.by_surface.setdefault(surface.lower(), [])
        if key is None:
            key = surface if not bucket and surface not in self.surface else f"{surface}#{len(bucket) + 1}"
            while key in self.surface:
                key += "'"
        self.surface[key] = surface
        bucket.append(key)
        return key

    def resolve(self, sentence: int, surface: str, actor: Optional[str] = None) -> str:
        low = surface.lower()
        alias = self.aliases.get((sentence, low))
        if alias == "new":
            key = self._new(surface)
        elif alias:
            key = alias if alias in self.surface else self._new(surface, alias)
        else:
            bucket = self.by_surface.get(low, [])
            if low in self.personal and actor is not None:
                owned = [k for k in bucket if self.owner.get(k) == actor]
                free = [k for k in bucket if self.owner.get(k) is None]
                key = owned[-1] if owned else free[-1] if free else self._new(surface)
            else:
                key = bucket[-1] if bucket else self._new(surface)
        if low in self.personal and actor is not None and self.owner.get(key) is None:
            self.owner[key] = actor
        return key

    def transfer(self, key: str, new_owner: str):
        self.owner[key] = new_owner


def resolve_entities(mentions: Sequence[Mention], aliases: Iterable[AliasAnnotation] = (),
                     personal_objects=DEFAULT_PERSONAL_OBJECTS, transfers: dict = None) -> list:
    """Entity key per mention.  ``transfers`` maps a mention position to a new owner."""
    res = EntityResolver(aliases, personal_objects)
    out = []
    for k, m in enumerate(mentions):
        key = res.resolve(m.sentence, m.surface, m.actor)
        out.append(key)
        if transfers and k in transfers:
            res.transfer(key, transfers[k])
    return out


# --------------------------------------------------------------------------
# chronological sort

_TF_PREFIX = re.compile(r"^(yesterday|this morning|this afternoon|this evening)\s*,?\s+", re.I)
_TF_SUFFIX = re.compile(r"\s+(yesterday|this morning|this afternoon|this evening)\s*(?=[.?]$)", re.I)


def timeframe_of(sentence: str) -> Optional[str]:
    m = _TF_PREFIX.search(sentence) or _TF_SUFFIX.search(sentence)
    return m.group(1).lower() if m else None


def _chrono_ranks(sentences) -> list:
    ranks, rank = [], -1
    for sent in sentences:
        tf = timeframe_of(sent)
        if tf is not None:
            rank = TIMEFRAME_RANK[tf]
        ranks.append(rank)
    return ranks


def chronological_order(sentences) -> list:
    """Sentence indices in chronological order; untimed sentences take the running rank."""
    ranks = _chrono_ranks(sentences)
    return sorted(range(len(sentences)), key=lambda k: (ranks[k], k))


def sort_chronologically(s: Story) -> Story:
    return Story([s.sentences[k] for k in chronological_order(s.sentences)], s.id)


# --------------------------------------------------------------------------
# sentence grammar

_NAME = r"[A-Z][a-z]+"
_NP = r"[a-z]+(?: [a-z]+)*?"
_DET = r"(?:the|a|an|his|her|their)"
_LEAD = re.compile(r"^(?:then|after that|afterwards|following that|later)\s*,?\s+", re.I)
_SUBJ = re.compile(rf"^(?P<subj>{_NAME}(?:(?:, {_NAME})*,? and {_NAME})?|he|she|they)\s+(?P<rest>.*)$", re.I)


def _alt(words):
    return "|".join(sorted((re.escape(w) for w in words), key=len, reverse=True))


_PATTERNS = [
    ("move", re.compile(rf"^(?P<verb>{_alt(MOVE_VERBS)})(?: back)? to the (?P<loc>{_NP})$")),
    ("neg", re.compile(rf"^(?:is|are) (?:no longer|not) in the (?P<loc>{_NP})$")),
    ("either", re.compile(rf"^(?:is|are) either in the (?P<loc>{_NP}) or the (?P<loc2>{_NP})$")),
    ("is_in", re.compile(rf"^(?:is|are) in the (?P<loc>{_NP})$")),
    ("take", re.compile(rf"^(?:(?P<verb>{_alt(TAKE_VERBS)}) {_DET} (?P<obj>{_NP})|(?P<verb2>picked|got|grabbed|took) (?P<it>it)(?: up)?)(?: there)?$")),
    ("drop", re.compile(rf"^(?:(?P<verb>{_alt(DROP_VERBS)}) (?:{_DET} (?P<obj>{_NP})|(?P<it>it))|(?P<verb2>put) (?P<it2>it) down)(?: there)?$")),
    ("give", re.compile(rf"^(?P<verb>{_alt(GIVE_VERBS)}) (?:{_DET} (?P<obj>{_NP})|(?P<it>it)) to (?P<rcpt>{_NAME})$")),
    ("give_dat", re.compile(rf"^(?P<verb>{_alt(GIVE_VERBS)}) (?P<rcpt>{_NAME}) {_DET} (?P<obj>{_NP})$")),
]

_IT_VERBS = {"picked": "pick_up", "got": "get", "grabbed": "grab", "took": "take", "put": "put_down"}


@dataclass
class Clause:
    kind: str
    subjects: list  # surface names, or a pronoun
    verb: str = ""
    obj: Optional[str] = None
    recipient: Optional[str] = None
    locations: list = field(default_factory=list)
    timeframe: Optional[str] = None
    pronoun: Optional[str] = None


def parse_sentence(sentence: str, index: int = 0) -> Optional[Clause]:
    """Clause for a declarative sentence, ``None`` for a question."""
    s = sentence.strip()
    if s.endswith("?"):
        return None
    if not s.endswith("."):
        raise UnparsableSentence(index, "sentence must end with '.' or '?'")
    tf = timeframe_of(s)
    body = _TF_PREFIX.sub("", s[:-1].strip())
    body = _TF_SUFFIX.sub("", body + ".")[:-1].strip()
    body = _LEAD.sub("", body).strip()
    m = _SUBJ.match(body)
    if not m:
        raise UnparsableSentence(index, "no subject")
    subj, rest = m.group("subj"), m.group("rest").strip()
    pronoun = subj.lower() if subj.lower() in ("he", "she", "they") else None
    subjects = [] if pronoun else [x for x in re.split(r",?\s+and\s+|,\s*", subj) if x]
    for kind, pat in _PATTERNS:
        pm = pat.match(rest)
        if not pm:
            continue
        g = pm.groupdict()
        c = Clause(kind, subjects, timeframe=tf, pronoun=pronoun)
        verb = g.get("verb") or g.get("verb2")
        if kind == "move":
            c.verb = MOVE_VERBS[verb]
            c.locations = [g["loc"]]
        elif kind in ("neg", "is_in"):
            c.verb = "be"
            c.locations = [g["loc"]]
        elif kind == "either":
            c.verb = "be"
            c.locations = [g["loc"], g["loc2"]]
        else:
            table = {"take": TAKE_VERBS, "drop": DROP_VERBS}.get(kind, GIVE_VERBS)
            c.verb = table.get(verb) or _IT_VERBS.get(verb, verb)
            c.obj = "it" if g.get("it") or g.get("it2") else g["obj"]
            c.recipient = g.get("rcpt")
            if kind == "give_dat":
                c.kind = "give"
        return c
    raise UnparsableSentence(index, f"no grammar rule matches {rest!r}")


# --------------------------------------------------------------------------
# story -> graph


class _Builder:
    def __init__(self, resolver, location_nodes, same_entity_edges):
        self.res = resolver
        self.location_nodes = location_nodes
        self.same_entity_edges = same_entity_edges
        self.nodes = []
        self.edges = []
        self.exists = {}  # entity key -> node id
        self.world = WorldState()
        self.single_subjects = []  # most recent last
        self.group_subjects = []
        self.last_object = None
        self.mentions = {}  # entity key -> event node ids

    def _add(self, **kw):
        node = EventNode(id=len(self.nodes), **kw)
        self.nodes.append(node)
        return node.id

    def entity(self, key):
        if key not in self.exists:
            self.exists[key] = self._add(action="exists", entities=(lit(self.res.surface[key]),))
        return self.exists[key]

    def _subjects(self, c: Clause, index):
        if c.pronoun == "they":
            if not self.group_subjects:
                raise UnresolvedPronoun(index, "they")
            keys = self.group_subjects[-1]
        elif c.pronoun:
            want = "m" if c.pronoun == "he" else "f"
            for key in reversed(self.single_subjects):
                gender = NAME_GENDERS.get(self.res.surface[key])
                if gender in (None, want):
                    keys = [key]
                    break
            else:
                raise UnresolvedPronoun(index, c.pronoun)
        else:
            keys = [self.res.resolve(index, s) for s in c.subjects]
        if len(keys) == 1:
            self.single_subjects.append(keys[0])
        else:
            self.group_subjects.append(list(keys))
        return keys

    def _locations(self, names):
        if self.location_nodes:
            return tuple(ref(self.entity(self.res.resolve(-1, n))) for n in names)
        return tuple(lit(n) for n in names)

    def add_clause(self, c: Clause, index):
        subjects = self._subjects(c, index)
        ents = [ref(self.entity(k)) for k in subjects]
        props = {"verb": c.verb}
        obj_key = None
        actor = subjects[0]
        if c.obj is not None:
            if c.obj == "it":
                if self.last_object is None:
                    raise UnresolvedPronoun(index, "it")
                obj_key = self.last_object
            else:
                obj_key = self.res.resolve(index, c.obj, actor)
            self.last_object = obj_key
            ents.append(ref(self.entity(obj_key)))
        if c.recipient is not None:
            rcpt = self.res.resolve(index, c.recipient)
            ents.append(ref(self.entity(rcpt)))

        if c.kind in ("move", "is_in", "neg", "either"):
            action = ACTION_MOVE if c.kind == "move" else ACTION_IS_IN
            locs = list(c.locations)
            if c.kind == "neg":
                props["negated"] = "true"
            if c.kind == "either":
                props["indefinite"] = "true"
            for k in subjects:
                if c.kind == "neg":
                    self.world.last_location.pop(k, None)
                else:
                    self.world.last_location[k] = tuple(locs)
        else:
            action = {"take": ACTION_PICK, "drop": ACTION_DROP, "give": ACTION_GIVE}[c.kind]
            locs = []
            for k in subjects:
                for loc in self.world.last_location.get(k, ()):
                    if loc not in locs:
                        locs.append(loc)
            if c.kind == "take":
                self.world.holdings[obj_key] = actor
            elif c.kind == "drop":
                self.world.holdings.pop(obj_key, None)
            else:
                self.world.holdings[obj_key] = rcpt
                self.res.transfer(obj_key, rcpt)

        if c.timeframe:
            self.world.timeframe_cursor = c.timeframe
        tfs = (lit(self.world.timeframe_cursor),) if self.world.timeframe_cursor else ()
        nid = self._add(
            action=action, entities=tuple(ents), locations=self._locations(locs), timeframes=tfs, properties=props
        )
        for r in ents:
            self.mentions.setdefault(r.node, []).append(nid)
        return nid

    def finish(self, events):
        for a, b in zip(events, events[1:]):
            self.edges.append(Edge(a, b, NEXT))
        if self.same_entity_edges:
            for holders in self.mentions.values():
                for a, b in zip(holders, holders[1:]):
                    e = Edge(a, b, SAME_ENTITY)
                    if e not in self.edges:
                        self.edges.append(e)
        return GestGraph(self.nodes, self.edges)


def parse_story(s: Story, aliases: Iterable[AliasAnnotation] = (), personal_objects=DEFAULT_PERSONAL_OBJECTS,
                location_nodes: bool = False, same_entity_edges: bool = False, sort: bool = True) -> GestGraph:
    """Build the GEST of a controlled-grammar story.

    Alias sentence indices refer to the story as given (before sorting).
    """
    order = chronological_order(s.sentences) if sort else range(len(s.sentences))
    indexed = [(k, s.sentences[k]) for k in order]
    builder = _Builder(EntityResolver(aliases, personal_objects), location_nodes, same_entity_edges)
    events = []
    for k, sent in indexed:
        clause = parse_sentence(sent, k)
        if clause is None:
            continue
        events.append(builder.add_clause(clause, k))
    return builder.finish(events)


def parse_text(text: str, **kw) -> GestGraph:
    return parse_story(Story.from_text(text), **kw)


# --------------------------------------------------------------------------
# timed SVOs -> graph


def _fmt_time(x: float) -> str:
    return f"{x:g}"


def temporal_relation(a: TimedSvo, b: TimedSvo, margin: float):
    if abs(a.start - b.start) <= margin and abs(a.end - b.end) <= margin:
        return SAME_TIME
    if b.start < a.end and a.start < b.end:
        return MEANWHILE
    return NEXT


def svos_to_gest(svos: Sequence[TimedSvo], same_time_margin: float = 1.0, all_pairs: bool = False,
                 personal_objects=DEFAULT_PERSONAL_OBJECTS, aliases: Iterable[AliasAnnotation] = ()) -> GestGraph:
    """One event node per SVO (plus exists nodes for subjects/objects), linked in start order."""
    if not svos:
        raise ParseError("no SVOs")
    if same_time_margin < 0:
        raise ParseError("margin must be non-negative")
    ordered = sorted(enumerate(svos), key=lambda t: (t[1].start, t[1].end, t[0]))
    res = EntityResolver(aliases, personal_objects)
    nodes, exists, events = [], {}, []

    def entity(key):
        if key not in exists:
            exists[key] = len(nodes)
            nodes.append(EventNode(len(nodes), "exists", (lit(res.surface[key]),)))
        return exists[key]

    for k, svo in ordered:
        subj = res.resolve(k, svo.subject)
        ents = [ref(entity(subj))]
        if svo.object:
            ents.append(ref(entity(res.resolve(k, svo.object, subj))))
        nid = len(nodes)
        nodes.append(
            EventNode(
                nid,
                "_".join(svo.verb.lower().split()),
                tuple(ents),
                properties={"start": _fmt_time(svo.start), "end": _fmt_time(svo.end)},
            )
        )
        events.append((nid, svo))

    edges = []
    for (a, sa), (b, sb) in zip(events, events[1:]):
        edges.append(Edge(a, b, temporal_relation(sa, sb, same_time_margin)))
    if all_pairs:
        for x in range(len(events)):
            for y in range(x + 2, len(events)):
                (a, sa), (b, sb) = events[x], events[y]
                rel = temporal_relation(sa, sb, same_time_margin)
                if rel != NEXT:
                    edges.append(Edge(a, b, rel))
    return GestGraph(nodes, edges)
