# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of gest.kernels._pykernels (same results, same tie-breaking)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def fill_edge_affinity(double[:, ::1] M, src1, dst1, src2, dst2,
                       type_sim, double[:, ::1] node_sim, long n2):
    cdef long[::1] s1 = np.ascontiguousarray(src1, dtype=np.int64)
    cdef long[::1] d1 = np.ascontiguousarray(dst1, dtype=np.int64)
    cdef long[::1] s2 = np.ascontiguousarray(src2, dtype=np.int64)
    cdef long[::1] d2 = np.ascontiguousarray(dst2, dtype=np.int64)
    cdef double[:, ::1] ts = np.ascontiguousarray(type_sim, dtype=np.float64)
    cdef Py_ssize_t p, q
    cdef long a, b, i, j, r, c
    cdef double v
    for p in range(s1.shape[0]):
        a = s1[p]
        b = d1[p]
        if a == b:
            continue
        for q in range(s2.shape[0]):
            i = s2[q]
            j = d2[q]
            if i == j:
                continue
            v = (ts[p, q] * node_sim[a, i]) * node_sim[b, j]
            r = a * n2 + i
            c = b * n2 + j
            if v > M[r, c]:
                M[r, c] = v
            if v > M[c, r]:
                M[c, r] = v
    return np.asarray(M)


def greedy_discretize(x, long n1, long n2, double eps=1e-12):
    cdef double[:, ::1] work = np.array(x, dtype=np.float64).reshape(n1, n2)
    cdef long a, i, ba, bi, step
    cdef double best
    pairs = []
    for step in range(min(n1, n2)):
        best = -INFINITY
        ba = -1
        bi = -1
        for a in range(n1):
            for i in range(n2):
                if work[a, i] > best:
                    best = work[a, i]
                    ba = a
                    bi = i
        if ba < 0 or not best > eps:
            break
        pairs.append((ba, bi))
        for i in range(n2):
            work[ba, i] = -INFINITY
        for a in range(n1):
            work[a, bi] = -INFINITY
    return pairs


cdef class _Search:
    cdef double[:, ::1] M
    cdef long small, large, n2
    cdef bint swap
    cdef long[::1] chosen
    cdef long[::1] current
    cdef long[::1] best_assign
    cdef char[::1] used
    cdef double best

    def __init__(self, M, long n1, long n2):
        self.M = np.ascontiguousarray(M, dtype=np.float64)
        self.swap = n1 > n2
        self.small = n2 if self.swap else n1
        self.large = n1 if self.swap else n2
        self.n2 = n2
        self.chosen = np.zeros(self.small, dtype=np.int64)
        self.current = np.zeros(self.small, dtype=np.int64)
        self.best_assign = np.full(self.small, -1, dtype=np.int64)
        self.used = np.zeros(self.large, dtype=np.int8)
        self.best = -1.0

    cdef inline long index(self, long s, long t):
        if self.swap:
            return t * self.n2 + s
        return s * self.n2 + t

    cdef void dfs(self, long depth, double score):
        cdef long t, p, k
        cdef double inc, acc
        if depth == self.small:
            if score > self.best:
                self.best = score
                for k in range(self.small):
                    self.best_assign[k] = self.current[k]
            return
        for t in range(self.large):
            if self.used[t]:
                continue
            p = self.index(depth, t)
            inc = self.M[p, p]
            acc = 0.0
            for k in range(depth):
                acc += self.M[p, self.chosen[k]]
            inc += 2.0 * acc
            self.used[t] = 1
            self.chosen[depth] = p
            self.current[depth] = t
            self.dfs(depth + 1, score + inc)
            self.used[t] = 0


def brute_force(M, long n1, long n2):
    cdef _Search s = _Search(M, n1, n2)
    s.dfs(0, 0.0)
    if s.small == 0 or s.best_assign[0] < 0:
        return 0.0, []
    pairs = []
    for k in range(s.small):
        t = s.best_assign[k]
        pairs.append((t, k) if s.swap else (k, t))
    return s.best, sorted(pairs)


def lcs_length(a, b):
    cdef long[::1] x = np.ascontiguousarray(a, dtype=np.int64)
    cdef long[::1] y = np.ascontiguousarray(b, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0], m = y.shape[0], i, j
    if n == 0 or m == 0:
        return 0
    cdef long[::1] prev = np.zeros(m + 1, dtype=np.int64)
    cdef long[::1] cur = np.zeros(m + 1, dtype=np.int64)
    cdef long[::1] tmp
    for i in range(n):
        cur[0] = 0
        for j in range(1, m + 1):
            if x[i] == y[j - 1]:
                cur[j] = prev[j - 1] + 1
            elif cur[j - 1] > prev[j]:
                cur[j] = cur[j - 1]
            else:
                cur[j] = prev[j]
        tmp = prev
        prev = cur
        cur = tmp
    return int(prev[m])
