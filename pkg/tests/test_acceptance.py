"""Acceptance criteria, one test per criterion.

Each check prints a single ``[PASS]``/``[FAIL]`` line.  Run directly for the
summary without pytest: ``python3 tests/test_acceptance.py``.
"""

import random
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fixtures import disjoint_error_fixture  # noqa: E402
from parser_cases import CASES  # noqa: E402

from gest.core import canonical_form, validate  # noqa: E402
from gest.embed import load_default_embeddings  # noqa: E402
from gest.harness import build_pairs, fuse_and_evaluate, evaluate, generate_synthetic_corpus, score_pairs  # noqa: E402
from gest.matching import GestScorer, brute_force_match, build_affinity, spectral_match  # noqa: E402
from gest.parser import Story, chronological_order, parse_text  # noqa: E402
from gest.randgraph import random_graph, shuffled_copy  # noqa: E402
from gest.serde import V1, V2, from_text, fuzz_recovery_rate, normalized, to_v1, to_v2  # noqa: E402
from gest.textmetrics import bleu, rouge_l  # noqa: E402

EMB = load_default_embeddings()


def c1_self_similarity():
    rng = random.Random(101)
    scorer = GestScorer(EMB)
    t0 = time.perf_counter()
    worst = max(abs(scorer.similarity(g, g) - 1.0) for g in (random_graph(rng, 3, 10) for _ in range(200)))
    dt = time.perf_counter() - t0
    return worst <= 1e-6 and dt < 30, f"max |f_hat - 1| = {worst:.2e} over 200 graphs in {dt:.1f}s"


def c2_symmetry():
    rng = random.Random(102)
    scorer = GestScorer(EMB)
    bad = 0
    for _ in range(200):
        g1, g2 = random_graph(rng), random_graph(rng)
        bad += scorer.similarity(g1, g2) != scorer.similarity(g2, g1)
    return bad == 0, f"{bad}/200 pairs differ"


def c3_oracle():
    rng = random.Random(103)
    t0 = time.perf_counter()
    sm_total = bf_total = 0.0
    exceeded, worst = 0, 1.0
    for _ in range(100):
        M = build_affinity(random_graph(rng, 4, 4), random_graph(rng, 4, 4), EMB)
        sm, bf = spectral_match(M).raw_score, brute_force_match(M).raw_score
        sm_total += sm
        bf_total += bf
        exceeded += sm > bf * (1 + 1e-12)
        if bf > 0:
            worst = min(worst, sm / bf)
    dt = time.perf_counter() - t0
    ratio = sm_total / bf_total
    ok = ratio >= 0.95 and exceeded == 0 and dt < 60
    return ok, f"aggregate ratio {ratio:.4f}, worst pair {worst:.4f}, {exceeded} above oracle, {dt:.1f}s"


def c4_isomorphism():
    rng = random.Random(104)
    scorer = GestScorer(EMB)
    hits = 0
    for _ in range(100):
        g = random_graph(rng, distinct_labels=True)
        h, mapping = shuffled_copy(g, rng)
        hits += dict(scorer.match(g, h).node_pairs) == mapping
    return hits >= 99, f"{hits}/100 permutations recovered"


def c5_parser():
    n_sent = sum(len(Story.from_text(s).sentences) for _, s, _ in CASES)
    errors = 0
    for _, story, expected in CASES:
        try:
            g = parse_text(story)
            errors += bool(validate(g)) or canonical_form(g) != canonical_form(from_text(expected.strip()))
        except Exception:
            errors += 1
    patterns = {"move", "take", "drop", "give", "neg", "either", "pronoun", "conj", "tf"}
    covered = {tag.split("/")[0] for tag, _, _ in CASES}
    ok = errors == 0 and n_sent >= 50 and patterns <= covered
    return ok, f"{len(CASES)} stories, {n_sent} sentences, {errors} mismatches"


def c6_location():
    g = parse_text("John is in the playground. Bob is in the office. John picked up the football. Bob went to the kitchen.")
    (pick,) = [n for n in g.nodes if n.action == "pick_up"]
    where = [r.literal for r in pick.locations]
    return where == ["playground"], f"pick_up located at {where}"


def c7_sort():
    sentences = [
        "This evening Mary went to the park.",
        "Yesterday Bill went to the school.",
        "This morning Mary went to the office.",
        "This afternoon Bill went to the kitchen.",
        "Yesterday Mary went to the garden.",
    ]
    order = chronological_order(sentences)
    # both yesterday sentences keep their relative order
    return order == [1, 4, 2, 3, 0], f"order {order}"


def c8_serialization():
    rng = random.Random(108)
    v1 = v2 = 0
    for k in range(200):
        g = random_graph(rng, nested=k % 4 == 0)
        v1 += from_text(to_v1(g).text, V1, repair_text=False) == normalized(g)
        v2 += canonical_form(from_text(to_v2(g).text, V2, repair_text=False)) == canonical_form(g)
    frng = random.Random(11)
    graphs = [random_graph(frng) for _ in range(100)]
    rate = fuzz_recovery_rate(graphs, random.Random(5), V1)
    rate2 = fuzz_recovery_rate(graphs, random.Random(5), V2)
    ok = v1 == 200 and v2 == 200 and rate >= 0.9
    return ok, f"V1 {v1}/200, V2 {v2}/200, V1 repair {rate:.0%} (V2 repair {rate2:.0%}, reported)"


def c9_separation():
    t0 = time.perf_counter()
    corpus = generate_synthetic_corpus(30, 3, seed=0)
    pairs = build_pairs(corpus, 174, seed=0)
    scores = score_pairs(pairs, ("gest", "bleu4"), EMB)
    rep = evaluate(pairs, scores)
    dt = time.perf_counter() - t0
    g, b = rep.metrics["gest"].auc_pr, rep.metrics["bleu4"].auc_pr
    return g > b and dt < 300, f"AUC-PR gest {g:.4f} vs bleu4 {b:.4f} ({len(pairs)} pairs, {dt:.1f}s)"


def c10_fusion():
    pairs, m1, m2 = disjoint_error_fixture()
    _, rep = fuse_and_evaluate(pairs, m1, m2)
    auc = {k: r.auc_pr for k, r in rep.metrics.items()}
    return auc["fused"] > max(auc["m1"], auc["m2"]), f"AUC-PR fused {auc['fused']:.4f}, m1 {auc['m1']:.4f}, m2 {auc['m2']:.4f}"


def c11_metrics():
    rng = random.Random(111)
    alphabet = "abcdefghij"
    bad = 0
    for _ in range(50):
        s = " ".join("".join(rng.choices(alphabet, k=rng.randint(1, 6))) for _ in range(rng.randint(1, 12)))
        bad += abs(bleu(s, s) - 1.0) > 1e-12 or abs(rouge_l(s, s) - 1.0) > 1e-12
    disjoint = bleu("mary went home", "john took apples"), rouge_l("mary went home", "john took apples")
    zero = all(abs(v) < 1e-6 for v in disjoint)
    return bad == 0 and zero, f"{bad}/50 self-scores off one, disjoint bleu {disjoint[0]:.1e} rouge {disjoint[1]:.1e}"


def c12_pair_counts():
    counts = [3] * 22 + [2] + [1] * 7
    pairs = build_pairs(generate_synthetic_corpus(30, counts, seed=0, with_graphs=False), 174, seed=0)
    pos = sum(p.label for p in pairs)
    sub = build_pairs(generate_synthetic_corpus(30, 3, seed=0, with_graphs=False), 174, seed=0, n_positives=67)
    pos2 = sum(p.label for p in sub)
    ok = (pos, len(pairs) - pos) == (67, 174) == (pos2, len(sub) - pos2)
    return ok, f"{pos} positives / {len(pairs) - pos} negatives; subsampled {pos2} / {len(sub) - pos2}"


CRITERIA = [
    ("1 self-similarity", c1_self_similarity),
    ("2 symmetry", c2_symmetry),
    ("3 oracle equivalence", c3_oracle),
    ("4 isomorphism recovery", c4_isomorphism),
    ("5 parser correctness", c5_parser),
    ("6 location inference", c6_location),
    ("7 chronological sort", c7_sort),
    ("8 serialization", c8_serialization),
    ("9 separation trend", c9_separation),
    ("10 fusion", c10_fusion),
    ("11 metric sanity", c11_metrics),
    ("12 harness shape", c12_pair_counts),
]


def _line(name, ok, detail):
    return f"[{'PASS' if ok else 'FAIL'}] criterion {name}: {detail}"


@pytest.mark.parametrize("name,check", CRITERIA, ids=[c[0].split()[0] for c in CRITERIA])
def test_criterion(name, check, capsys):
    ok, detail = check()
    with capsys.disabled():
        print("\n" + _line(name, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    results = [(name, *check()) for name, check in CRITERIA]
    for r in results:
        print(_line(*r))
    sys.exit(0 if all(ok for _, ok, _ in results) else 1)
