"""Pure-Python / numpy implementations of the hot loops.

Each function mirrors ``_ckernels.pyx`` operation for operation so that both
backends return bit-identical results.
"""

import numpy as np


def fill_edge_affinity(M, src1, dst1, src2, dst2, type_sim, node_sim, n2):
    """Write edge-pair terms into the off-diagonal of ``M`` in place (max on collisions)."""
    src1 = np.asarray(src1, dtype=np.int64)
    dst1 = np.asarray(dst1, dtype=np.int64)
    src2 = np.asarray(src2, dtype=np.int64)
    dst2 = np.asarray(dst2, dtype=np.int64)
    if not len(src1) or not len(src2):
        return M
    vals = (type_sim * node_sim[src1][:, src2]) * node_sim[dst1][:, dst2]
    rows = src1[:, None] * n2 + src2[None, :]
    cols = dst1[:, None] * n2 + dst2[None, :]
    keep = (src1 != dst1)[:, None] & (src2 != dst2)[None, :]
    rows, cols, vals = rows[keep], cols[keep], vals[keep]
    np.maximum.at(M, (rows, cols), vals)
    np.maximum.at(M, (cols, rows), vals)
    return M


def greedy_discretize(x, n1, n2, eps=1e-12):
    """Pick assignments by decreasing score, dropping conflicts; ties go to the lowest index."""
    work = np.array(x, dtype=np.float64).reshape(n1, n2)
    pairs = []
    for _ in range(min(n1, n2)):
        k = int(np.argmax(work))
        a, i = divmod(k, n2)
        if not work[a, i] > eps:
            break
        pairs.append((a, i))
        work[a, :] = -np.inf
        work[:, i] = -np.inf
    return pairs


def brute_force(M, n1, n2):
    """Exhaustive best one-to-one assignment covering the smaller side.

    Returns ``(score, pairs)``; the first maximum in lexicographic enumeration wins.
    """
    M = np.asarray(M, dtype=np.float64)
    swap = n1 > n2
    small, large = (n2, n1) if swap else (n1, n2)
    used = [False] * large
    chosen = []  # assignment indices
    current = []  # partner of each small-side node
    best = [-1.0, None]

    def index(s, t):
        return t * n2 + s if swap else s * n2 + t

    def dfs(depth, score):
        if depth == small:
            if score > best[0]:
                best[0] = score
                best[1] = list(current)
            return
        for t in range(large):
            if used[t]:
                continue
            p = index(depth, t)
            inc = M[p, p]
            acc = 0.0
            for q in chosen:
                acc += M[p, q]
            inc += 2.0 * acc
            used[t] = True
            chosen.append(p)
            current.append(t)
            dfs(depth + 1, score + inc)
            current.pop()
            chosen.pop()
            used[t] = False

    dfs(0, 0.0)
    if best[1] is None:
        return 0.0, []
    pairs = [(t, s) if swap else (s, t) for s, t in enumerate(best[1])]
    return best[0], sorted(pairs)


def lcs_length(a, b):
    """Length of the longest common subsequence of two integer sequences."""
    if not len(a) or not len(b):
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, 1):
            if x == y:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = cur[j - 1] if cur[j - 1] > prev[j] else prev[j]
        prev = cur
    return prev[-1]
