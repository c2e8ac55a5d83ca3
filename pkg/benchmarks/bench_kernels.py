"""Time the compiled kernels against the Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N] [--json out.json]

Each kernel runs on identical inputs under both backends; outputs are checked
for agreement before timing.
"""

import argparse
import json
import random
import sys
import timeit

import numpy as np

from gest import kernels
from gest.embed import load_default_embeddings
from gest.matching import AffinityConfig, _edge_arrays, edge_type_similarity, node_similarity_matrix
from gest.randgraph import random_graph


def _edge_inputs(seed, n):
    rng = random.Random(seed)
    emb = load_default_embeddings()
    cfg = AffinityConfig()
    g1 = random_graph(rng, n, n, extra_edges=1.0)
    g2 = random_graph(rng, n, n, extra_edges=1.0)
    S = np.ascontiguousarray(node_similarity_matrix(g1, g2, emb, cfg))
    e1, s1, d1 = _edge_arrays(g1, cfg)
    e2, s2, d2 = _edge_arrays(g2, cfg)
    T = np.array([[edge_type_similarity(emb, x.relation, y.relation) for y in e2] for x in e1])
    return len(g1), len(g2), s1, d1, s2, d2, T, S


def cases(seed=0):
    rng = np.random.default_rng(seed)
    n1, n2, s1, d1, s2, d2, T, S = _edge_inputs(seed, 10)

    def fill(k):
        M = np.zeros((n1 * n2, n1 * n2))
        k.fill_edge_affinity(M, s1, d1, s2, d2, T, S, n2)
        return M

    x = rng.random(40 * 40)
    B = rng.random((49, 49))
    B = B + B.T
    a = rng.integers(0, 20, 400).tolist()
    b = rng.integers(0, 20, 400).tolist()
    return {
        "fill_edge_affinity (10x10 nodes)": fill,
        "greedy_discretize (40x40)": lambda k: k.greedy_discretize(x, 40, 40, 1e-12),
        "brute_force (7x7)": lambda k: k.brute_force(B, 7, 7),
        "lcs_length (400 tokens)": lambda k: k.lcs_length(a, b),
    }


def _pairs(ps):
    return [tuple(int(v) for v in p) for p in ps]


def _same(r1, r2):
    if isinstance(r1, np.ndarray):
        return np.allclose(r1, r2)
    if isinstance(r1, tuple):  # (score, pairs)
        return abs(r1[0] - r2[0]) < 1e-9 and _pairs(r1[1]) == _pairs(r2[1])
    if isinstance(r1, (int, np.integer)):
        return int(r1) == int(r2)
    return _pairs(r1) == _pairs(r2)


def run(repeat=5):
    backends = kernels.backends()
    rows = []
    for name, fn in cases().items():
        results = {b: fn(k) for b, k in backends.items()}
        if "cython" in results and not _same(results["python"], results["cython"]):
            raise SystemExit(f"{name}: backends disagree")
        row = {"kernel": name}
        for b, k in backends.items():
            t = timeit.Timer(lambda: fn(k))
            n, _ = t.autorange()
            row[b] = min(t.repeat(repeat, n)) / n
        rows.append(row)
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    rows = run(args.repeat)
    if "cython" not in kernels.backends():
        print("compiled kernels unavailable; timing the Python fallback only", file=sys.stderr)
    print(f"{'kernel':<34}{'python':>12}{'cython':>12}{'speedup':>10}")
    for r in rows:
        py, cy = r["python"], r.get("cython")
        cy_s = f"{cy * 1e3:10.3f}ms" if cy else f"{'-':>12}"
        sp = f"{py / cy:9.1f}x" if cy else f"{'-':>10}"
        print(f"{r['kernel']:<34}{py * 1e3:10.3f}ms{cy_s}{sp}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
