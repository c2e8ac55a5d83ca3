"""BLEU@N and ROUGE-L written from scratch, plus argument-order symmetrization."""

import math
import re
from collections import Counter

from . import kernels

_TOKEN = re.compile(r"\w+|[^\w\s]")

EPSILON = 1e-9
BETA = 1.2


def tokenize(text):
    """Lowercase; words and punctuation marks become separate tokens."""
    return _TOKEN.findall(text.lower())


def _ngrams(tokens, n):
    return Counter(tuple(tokens[k : k + n]) for k in range(len(tokens) - n + 1))


def bleu(hyp, ref, n_max=4):
    """Sentence BLEU with clipped precisions, brevity penalty and epsilon smoothing.

    N-gram orders longer than the hypothesis are left out of the geometric mean.
    """
    h, r = tokenize(hyp), tokenize(ref)
    if not h or not r:
        return 0.0
    orders = min(n_max, len(h))
    log_sum = 0.0
    for n in range(1, orders + 1):
        hyp_counts = _ngrams(h, n)
        ref_counts = _ngrams(r, n)
        clipped = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        p = clipped / sum(hyp_counts.values())
        log_sum += math.log(p if p > 0 else EPSILON)
    c, rl = len(h), len(r)
    bp = 1.0 if c >= rl else math.exp(1.0 - rl / c)
    return min(1.0, bp * math.exp(log_sum / orders))


def _as_ids(a, b):
    vocab = {}
    return [vocab.setdefault(t, len(vocab)) for t in a], [vocab.setdefault(t, len(vocab)) for t in b]


def lcs(a, b):
    x, y = _as_ids(a, b)
    return kernels.lcs_length(x, y)


def rouge_l(hyp, ref, beta=BETA):
    h, r = tokenize(hyp), tokenize(ref)
    if not h or not r:
        return 0.0
    m = lcs(h, r)
    if m == 0:
        return 0.0
    p, rec = m / len(h), m / len(r)
    b2 = beta * beta
    return (1 + b2) * p * rec / (rec + b2 * p)


def symmetrize(metric, s1, s2):
    return (metric(s1, s2) + metric(s2, s1)) / 2.0


def bleu4_sym(a, b):
    return symmetrize(bleu, a, b)


def rouge_l_sym(a, b):
    return symmetrize(rouge_l, a, b)
