"""Pair evaluation: corpora, pair construction, metric scoring, statistics and fusion."""

from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import asdict, dataclass, field, replace
from itertools import combinations
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import textmetrics
from .core import GestGraph, canonical_form
from .matching import AffinityConfig, GestScorer
from .parser import NAME_GENDERS, TIMEFRAMES, parse_text
from .serde import from_text, to_v1

FISHER_INF = math.inf


class HarnessError(ValueError):
    pass


# --------------------------------------------------------------------------
# corpus and pairs


@dataclass
class CorpusItem:
    group: str
    name: str
    text: str = ""
    graph: Optional[GestGraph] = None

    @property
    def key(self) -> str:
        return f"{self.group}/{self.name}"


@dataclass
class PairRecord:
    id: str
    item_a: CorpusItem
    item_b: CorpusItem
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise HarnessError(f"pair {self.id}: label must be 0 or 1")


def _pair(a: CorpusItem, b: CorpusItem, label: int) -> PairRecord:
    return PairRecord(f"{a.key}|{b.key}", a, b, label)


def _groups(corpus: Sequence[CorpusItem]) -> dict:
    out = {}
    for item in corpus:
        out.setdefault(item.group, []).append(item)
    return out


def build_pairs(corpus: Sequence[CorpusItem], n_negatives: int, seed: int = 0, n_positives: Optional[int] = None):
    """Within-group pairs are positives, a uniform sample of cross-group pairs are negatives.

    ``n_positives`` optionally subsamples the positives (same seed).
    """
    if n_negatives < 1:
        raise HarnessError("n_negatives must be at least 1")
    items = sorted(corpus, key=lambda it: it.key)
    if len({it.key for it in items}) != len(items):
        raise HarnessError("corpus item keys must be unique")
    positives = [_pair(a, b, 1) for a, b in combinations(items, 2) if a.group == b.group]
    cross = [(a, b) for a, b in combinations(items, 2) if a.group != b.group]
    if len(cross) < n_negatives:
        raise HarnessError(f"only {len(cross)} cross-group pairs available, {n_negatives} requested")
    rng = random.Random(seed)
    if n_positives is not None:
        if n_positives > len(positives):
            raise HarnessError(f"only {len(positives)} positive pairs available, {n_positives} requested")
        positives = sorted(rng.sample(positives, n_positives), key=lambda p: p.id)
    negatives = [_pair(a, b, 0) for a, b in sorted(rng.sample(cross, n_negatives), key=lambda ab: (ab[0].key, ab[1].key))]
    return positives + negatives


# --------------------------------------------------------------------------
# statistics


@dataclass
class MetricReport:
    correlation: float
    accuracy: float
    fisher: float
    auc_pr: float
    threshold: float
    train_accuracy: float


@dataclass
class EvalReport:
    metrics: dict
    n_positive: int
    n_negative: int
    seed: int = 0
    split: float = 0.5
    notes: dict = field(default_factory=dict)

    def to_json(self) -> str:
        def clean(x):
            if isinstance(x, float) and math.isinf(x):
                return "inf"
            return x

        data = asdict(self)
        data["metrics"] = {m: {k: clean(v) for k, v in r.items()} for m, r in data["metrics"].items()}
        return json.dumps(data, indent=2, sort_keys=True)

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json() + "\n", encoding="utf-8")
        with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "correlation", "accuracy", "fisher", "auc_pr", "threshold"])
            for name, r in sorted(self.metrics.items()):
                w.writerow([name, f"{r.correlation:.6f}", f"{r.accuracy:.6f}", f"{r.fisher:.6f}", f"{r.auc_pr:.6f}", f"{r.threshold:.6f}"])


def pearson(x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    sx, sy = x.std(), y.std()
    if sx == 0 or sy == 0:
        return 0.0
    return float(((x - x.mean()) * (y - y.mean())).mean() / (sx * sy))


def fisher_score(scores, labels) -> float:
    s, y = np.asarray(scores, float), np.asarray(labels)
    pos, neg = s[y == 1], s[y == 0]
    if len(pos) == 0 or len(neg) == 0:
        return 0.0
    num = (pos.mean() - neg.mean()) ** 2
    # a constant class has zero variance; np.var can leave rounding residue
    den = sum(0.0 if np.ptp(v) == 0 else float(v.var()) for v in (pos, neg))
    if den == 0:
        return FISHER_INF if num > 0 else 0.0
    return float(num / den)


def auc_pr(scores, labels) -> float:
    """Trapezoidal area under precision-recall, one point per distinct score."""
    s, y = np.asarray(scores, float), np.asarray(labels)
    n_pos = int((y == 1).sum())
    if n_pos == 0:
        return 0.0
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    tp = fp = 0
    points = []
    k = 0
    while k < len(s):
        j = k
        while j < len(s) and s[j] == s[k]:
            tp += int(y[j] == 1)
            fp += int(y[j] == 0)
            j += 1
        points.append((tp / n_pos, tp / (tp + fp)))
        k = j
    area = 0.0
    prev_r, prev_p = 0.0, points[0][1]
    for r, p in points:
        area += (r - prev_r) * (p + prev_p) / 2.0
        prev_r, prev_p = r, p
    return float(area)


def accuracy_at(scores, labels, threshold) -> float:
    s, y = np.asarray(scores, float), np.asarray(labels)
    if len(s) == 0:
        return 0.0
    return float(((s >= threshold).astype(int) == y).mean())


def best_threshold(scores, labels):
    """Threshold maximizing accuracy of ``score >= t``; ties go to the lower threshold."""
    s, y = np.asarray(scores, float), np.asarray(labels)
    candidates = sorted(set(s.tolist())) + [math.inf]
    best_t, best_acc = candidates[0], -1.0
    for t in candidates:
        acc = accuracy_at(s, y, t)
        if acc > best_acc:
            best_t, best_acc = t, acc
    return best_t, best_acc


def stratified_split(pairs: Sequence[PairRecord], fraction: float = 0.5, seed: int = 0):
    """Deterministic per-label split into ``(train, test)`` lists."""
    rng = random.Random(seed)
    train, test = [], []
    for label in (1, 0):
        group = sorted((p for p in pairs if p.label == label), key=lambda p: p.id)
        rng.shuffle(group)
        cut = int(round(fraction * len(group)))
        train += group[:cut]
        test += group[cut:]
    return train, test


def evaluate_metric(pairs, scores: Mapping[str, float], split: float = 0.5, seed: int = 0, threshold: Optional[float] = None) -> MetricReport:
    missing = [p.id for p in pairs if p.id not in scores]
    if missing:
        raise HarnessError(f"no score for pair {missing[0]}")
    labels = [p.label for p in pairs]
    values = [scores[p.id] for p in pairs]
    train, test = stratified_split(pairs, split, seed)
    tr_s, tr_y = [scores[p.id] for p in train], [p.label for p in train]
    if threshold is None:
        threshold, train_acc = best_threshold(tr_s, tr_y)
    else:
        train_acc = accuracy_at(tr_s, tr_y, threshold)
    held_out = test or train
    acc = accuracy_at([scores[p.id] for p in held_out], [p.label for p in held_out], threshold)
    return MetricReport(
        correlation=pearson(values, labels),
        accuracy=acc,
        fisher=fisher_score(values, labels),
        auc_pr=auc_pr(values, labels),
        threshold=float(threshold),
        train_accuracy=train_acc,
    )


def evaluate(pairs, scores: Mapping, split: float = 0.5, seed: int = 0, threshold: Optional[float] = None) -> EvalReport:
    """``scores`` is ``{metric: {pair id: score}}`` or a single ``{pair id: score}`` map."""
    if scores and all(isinstance(v, (int, float)) for v in scores.values()):
        scores = {"score": scores}
    metrics = {name: evaluate_metric(pairs, s, split, seed, threshold) for name, s in sorted(scores.items())}
    n_pos = sum(p.label for p in pairs)
    return EvalReport(metrics, n_pos, len(pairs) - n_pos, seed, split)


# --------------------------------------------------------------------------
# metrics over pairs


def _graph(item: CorpusItem, cache: dict) -> GestGraph:
    if item.graph is not None:
        return item.graph
    if item.key not in cache:
        cache[item.key] = parse_text(item.text)
    return cache[item.key]


def score_pairs(pairs, metrics=("gest", "bleu4", "rouge_l"), emb=None, cfg: AffinityConfig = None) -> dict:
    """``{metric: {pair id: score}}``; text metrics are symmetrized."""
    out = {m: {} for m in metrics}
    scorer = GestScorer(emb, cfg) if "gest" in metrics else None
    if scorer is not None and emb is None:
        raise HarnessError("the gest metric needs an embedding table")
    cache = {}
    text_fns = {"bleu4": textmetrics.bleu4_sym, "rouge_l": textmetrics.rouge_l_sym}
    for p in sorted(pairs, key=lambda p: p.id):
        for m in metrics:
            if m == "gest":
                out[m][p.id] = scorer.similarity(_graph(p.item_a, cache), _graph(p.item_b, cache))
            elif m in text_fns:
                out[m][p.id] = text_fns[m](p.item_a.text, p.item_b.text)
            else:
                raise HarnessError(f"unknown metric {m!r}")
    return out


def read_external_scores(path) -> dict:
    """Sidecar scores: JSON lines ``{"pair", "metric", "score"}`` or ``pair<TAB>metric<TAB>score``."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                if line.startswith("{"):
                    rec = json.loads(line)
                    pid, metric, score = rec["pair"], rec["metric"], float(rec["score"])
                else:
                    pid, metric, score = line.split("\t")
                    score = float(score)
            except (ValueError, KeyError) as exc:
                raise HarnessError(f"{path}:{lineno}: bad score record ({exc})") from None
            out.setdefault(metric, {})[pid] = score
    return out


# --------------------------------------------------------------------------
# fusion


@dataclass
class FusionModel:
    w0: float
    w1: float
    w2: float
    fallback: Optional[str] = None

    def __call__(self, m1, m2):
        return self.w0 + self.w1 * np.asarray(m1, float) + self.w2 * np.asarray(m2, float)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def fit_fusion(labels, m1, m2) -> FusionModel:
    """Least-squares fit of the label on ``(1, m1, m2)``."""
    y = np.asarray(labels, float)
    a, b = np.asarray(m1, float), np.asarray(m2, float)
    if len(y) < 2 or len(set(y.tolist())) < 2:
        raise HarnessError("fusion needs at least two training pairs with both labels")
    X = np.column_stack([np.ones_like(a), a, b])
    if np.linalg.matrix_rank(X) == 3:
        w, *_ = np.linalg.lstsq(X, y, rcond=None)
        return FusionModel(*map(float, w))
    # singular: keep the better single metric
    acc1 = best_threshold(a, y)[1]
    acc2 = best_threshold(b, y)[1]
    use_first = acc1 >= acc2
    m = a if use_first else b
    Xs = np.column_stack([np.ones_like(m), m])
    if np.linalg.matrix_rank(Xs) == 2:
        w0, w, = np.linalg.lstsq(Xs, y, rcond=None)[0]
    else:
        w0, w = float(y.mean()), 0.0
    if use_first:
        return FusionModel(float(w0), float(w), 0.0, fallback="m1")
    return FusionModel(float(w0), 0.0, float(w), fallback="m2")


def fuse_and_evaluate(pairs, s1: Mapping[str, float], s2: Mapping[str, float], split: float = 0.5, seed: int = 0):
    """Fit on the training split; report the fused score as a third metric."""
    train, _ = stratified_split(pairs, split, seed)
    model = fit_fusion([p.label for p in train], [s1[p.id] for p in train], [s2[p.id] for p in train])
    fused = dict(zip([p.id for p in pairs], model([s1[p.id] for p in pairs], [s2[p.id] for p in pairs]).tolist()))
    return model, evaluate(pairs, {"m1": s1, "m2": s2, "fused": fused}, split, seed)


# --------------------------------------------------------------------------
# synthetic corpus

_PEOPLE = ("John", "Mary", "Bob", "Sandra", "Daniel", "Fred", "Julie", "Emily", "Bill", "Jessica", "Jeff", "Lily")
_OBJECTS = ("football", "apple", "milk", "book", "ball", "box", "watch", "key")
_PLACES = ("kitchen", "office", "playground", "garden", "bathroom", "bedroom", "hallway", "park")
_SYNONYMS = {
    "move": ("went", "moved", "travelled", "journeyed"),
    "take": ("picked up", "got", "grabbed", "took"),
    "drop": ("dropped", "discarded", "put down", "left"),
    "give": ("gave", "handed", "passed"),
}


@dataclass(frozen=True)
class _Event:
    kind: str  # move, is_in, take, drop, give
    actors: tuple
    obj: str = ""
    place: str = ""
    recipient: str = ""

    def participants(self):
        return set(self.actors) | {x for x in (self.obj, self.recipient) if x}


def _plan(rng: random.Random, max_nodes: int = 10):
    """Random coherent event list whose graph has 3..max_nodes nodes."""
    while True:
        actors = rng.sample(_PEOPLE, rng.randint(1, 3))
        objs = rng.sample(_OBJECTS, rng.randint(0, 2))
        events, where, held = [], {}, {}
        budget = rng.randint(2, 5)
        pair = tuple(actors[:2]) if len(actors) >= 2 and rng.random() < 0.3 else None
        if pair:
            place = rng.choice(_PLACES)
            events.append(_Event(rng.choice(("move", "is_in")), pair, place=place))
            for a in pair:
                where[a] = place
        while len(events) < budget:
            a = rng.choice(actors)
            mine = [o for o, h in held.items() if h == a]
            free = [o for o in objs if o not in held]
            options = ["move"]
            if a in where and free:
                options.append("take")
            if mine:
                options.append("drop")
                if len(actors) > 1:
                    options.append("give")
            kind = rng.choice(options)
            if kind == "move":
                place = rng.choice([p for p in _PLACES if p != where.get(a)])
                events.append(_Event(rng.choice(("move", "is_in")), (a,), place=place))
                where[a] = place
            elif kind == "take":
                o = rng.choice(free)
                events.append(_Event("take", (a,), obj=o))
                held[o] = a
            elif kind == "drop":
                o = rng.choice(mine)
                events.append(_Event("drop", (a,), obj=o))
                del held[o]
            else:
                o = rng.choice(mine)
                r = rng.choice([x for x in actors if x != a])
                events.append(_Event("give", (a,), obj=o, recipient=r))
                held[o] = r
        entities = set()
        for e in events:
            entities |= e.participants()
        if 3 <= len(entities) + len(events) <= max_nodes:
            return events


def _subject(actors, pronoun):
    if pronoun:
        if len(actors) > 1:
            return "They"
        return "He" if NAME_GENDERS.get(actors[0]) == "m" else "She"
    return " and ".join(actors)


_CONNECTIVES = ("Then", "After that", "Afterwards", "Following that", "Later")
_IT_FORMS = {"take": ("picked it up", "got it", "grabbed it", "took it"), "drop": ("dropped it", "put it down", "discarded it", "left it")}


def _sentence(e: _Event, rng: random.Random, pronoun: bool, it: bool = False, back: bool = False) -> str:
    subj = _subject(e.actors, pronoun)
    plural = len(e.actors) > 1
    if e.kind == "is_in":
        return f"{subj} {'are' if plural else 'is'} in the {e.place}."
    verb = rng.choice(_SYNONYMS[e.kind])
    if e.kind == "move":
        return f"{subj} {verb}{' back' if back else ''} to the {e.place}."
    if e.kind == "give":
        if it:
            return f"{subj} {verb} it to {e.recipient}."
        if rng.random() < 0.5:
            return f"{subj} {verb} {e.recipient} the {e.obj}."
        return f"{subj} {verb} the {e.obj} to {e.recipient}."
    there = " there" if rng.random() < 0.3 else ""
    if it:
        return f"{subj} {rng.choice(_IT_FORMS[e.kind])}{there}."
    return f"{subj} {verb} the {e.obj}{there}."


def _timeframes(n_events: int, rng: random.Random):
    """Non-decreasing timeframe label per event, in consecutive blocks."""
    k = rng.randint(2, min(len(TIMEFRAMES), n_events))
    labels = sorted(rng.sample(range(len(TIMEFRAMES)), k))
    cuts = sorted(rng.sample(range(1, n_events), k - 1))
    out, block = [], 0
    for j in range(n_events):
        if block < len(cuts) and j == cuts[block]:
            block += 1
        out.append(TIMEFRAMES[labels[block]])
    return out


def _with_timeframe(text: str, tf: str, rng: random.Random) -> str:
    if rng.random() < 0.5:
        return f"{tf[0].upper()}{tf[1:]}, {text[0].lower() if text.startswith(('He ', 'She ', 'They ')) else text[0]}{text[1:]}"
    return f"{text[:-1]} {tf}."


def _render(events, rng: random.Random, timeframes=None) -> str:
    """One paraphrase of a plan.

    Words vary through the grammar's synonyms, pronouns and connectives.  With
    timeframes, whole timeframe blocks are shuffled; chronological sorting in
    the parser restores the original event order, so every variant parses to
    the same graph.
    """
    sentences = []
    prev, last_obj, visited = None, None, {}
    for j, e in enumerate(events):
        gendered = len(e.actors) > 1 or NAME_GENDERS.get(e.actors[0]) in ("m", "f")
        pron = prev is not None and prev.actors == e.actors and gendered and rng.random() < 0.7
        it = bool(e.obj) and e.obj == last_obj and rng.random() < 0.6
        back = e.kind == "move" and e.place in visited.get(e.actors, ()) and rng.random() < 0.5
        text = _sentence(e, rng, pron, it, back)
        lead = prev is not None and rng.random() < 0.3
        if lead:
            text = f"{rng.choice(_CONNECTIVES)} {text[0].lower() if pron else text[0]}{text[1:]}"
        if timeframes:
            # every sentence carries its timeframe so sorting is unambiguous
            text = f"{text[:-1]} {timeframes[j]}." if lead else _with_timeframe(text, timeframes[j], rng)
        sentences.append(text)
        if e.obj:
            last_obj = e.obj
        if e.place:
            visited.setdefault(e.actors, set()).add(e.place)
        prev = e
    if not timeframes:
        return " ".join(sentences)
    blocks = {}
    for tf, text in zip(timeframes, sentences):
        blocks.setdefault(tf, []).append(text)
    order = list(blocks)
    rng.shuffle(order)
    return " ".join(t for tf in order for t in blocks[tf])


def _structure(g: GestGraph) -> str:
    """Canonical form ignoring node properties (the surface verb lives there)."""
    return canonical_form(GestGraph([replace(n, properties={}) for n in g.nodes], g.edges))


def generate_synthetic_corpus(n_groups: int, variants_per_group=3, seed: int = 0, with_graphs: bool = True,
                              timed_fraction: float = 0.5):
    """Groups of paraphrased stories; one random event plan per group.

    ``variants_per_group`` is an int or one count per group.  A share
    ``timed_fraction`` of the plans carry timeframes, which lets their variants
    differ in sentence order.  Every variant parses to the same graph up to the
    ``verb`` property.
    """
    if n_groups < 2:
        raise HarnessError("need at least two groups")
    counts = [variants_per_group] * n_groups if isinstance(variants_per_group, int) else list(variants_per_group)
    if len(counts) != n_groups:
        raise HarnessError("one variant count per group expected")
    rng = random.Random(seed)
    corpus = []
    for g in range(n_groups):
        events = _plan(rng)
        tfs = _timeframes(len(events), rng) if len(events) > 1 and rng.random() < timed_fraction else None
        reference = None
        texts = []
        for _ in range(20 * counts[g]):
            if len(texts) == counts[g]:
                break
            text = _render(events, rng, tfs)
            if text in texts:
                continue
            shape = _structure(parse_text(text))
            if reference is None:
                reference = shape
            if shape == reference:
                texts.append(text)
        while len(texts) < counts[g]:  # plan too small to vary
            texts.append(texts[-1])
        for k, text in enumerate(texts):
            graph = parse_text(text) if with_graphs else None
            corpus.append(CorpusItem(f"g{g:03d}", f"v{k}", text, graph))
    return corpus


# --------------------------------------------------------------------------
# corpus files


def write_corpus(corpus: Sequence[CorpusItem], root, graphs: bool = True):
    root = Path(root)
    for item in corpus:
        d = root / item.group
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{item.name}.txt").write_text(item.text + "\n", encoding="utf-8")
        if graphs and item.graph is not None:
            (d / f"{item.name}.gest").write_text(to_v1(item.graph).text, encoding="utf-8")


def read_corpus(root) -> list:
    """``<group>/<item>.txt`` plus optional ``<group>/<item>.gest``."""
    root = Path(root)
    if not root.is_dir():
        raise HarnessError(f"corpus directory {root} not found")
    out = []
    for d in sorted(p for p in root.iterdir() if p.is_dir()):
        for txt in sorted(d.glob("*.txt")):
            gest = txt.with_suffix(".gest")
            graph = from_text(gest.read_text(encoding="utf-8")) if gest.exists() else None
            out.append(CorpusItem(d.name, txt.stem, txt.read_text(encoding="utf-8").strip(), graph))
    if not out:
        raise HarnessError(f"no items under {root}")
    return out
