"""Shared constructed fixtures."""

import random

from gest.harness import CorpusItem, PairRecord


def disjoint_error_fixture(n=40, seed=3):
    """Pairs with two scores that each err badly on a different quarter of the pairs.

    Returns ``(pairs, m1, m2)``.  Each score is the label plus small noise, except on its
    own error set where the label is flipped.  The two error sets do not overlap, so a
    sum of the two scores halves every error.
    """
    rng = random.Random(seed)
    pairs, m1, m2 = [], {}, {}
    for k in range(n):
        label = k % 2
        a, b = CorpusItem(f"a{k}", "x"), CorpusItem(f"b{k}", "y")
        p = PairRecord(f"p{k:03d}", a, b, label)
        pairs.append(p)
        bad1 = k % 4 in (0, 1) and k < n // 2
        bad2 = k % 4 in (2, 3) and k < n // 2
        m1[p.id] = (1 - label if bad1 else label) + rng.uniform(-0.1, 0.1)
        m2[p.id] = (1 - label if bad2 else label) + rng.uniform(-0.1, 0.1)
    return pairs, m1, m2
