"""Affinity construction, Spectral Matching and the normalized GEST similarity.

Assignment ``(a -> i)`` of node ``a`` of the first graph to node ``i`` of the
second graph is row/column ``a * n2 + i`` of the affinity matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .core import GestGraph, node_name
from .embed import EmbeddingTable, phrase_similarity

BRUTE_FORCE_LIMIT = 8


class MatchingError(ValueError):
    pass


@dataclass(frozen=True)
class AffinityConfig:
    w_action: float = 0.5
    w_entities: float = 0.5
    w_location: float = 0.0
    w_timeframe: float = 0.0
    include_same_entity_edges: bool = False

    def __post_init__(self):
        ws = (self.w_action, self.w_entities, self.w_location, self.w_timeframe)
        if any(w < 0 for w in ws):
            raise MatchingError("affinity weights must be non-negative")
        if abs(sum(ws) - 1.0) > 1e-9:
            raise MatchingError(f"affinity weights must sum to 1 (got {sum(ws)})")


@dataclass
class AffinityMatrix:
    n1: int
    n2: int
    data: np.ndarray
    node_sim: Optional[np.ndarray] = None

    def index(self, a, i):
        return a * self.n2 + i


@dataclass
class Matching:
    pairs: list
    raw_score: float
    normalized_score: Optional[float] = None
    node_pairs: list = field(default_factory=list)
    iterations: int = 0


# --------------------------------------------------------------------------
# node and edge similarity


def _phrases(node, nodes, slot):
    out = []
    for r in getattr(node, slot):
        if r.is_node:
            target = nodes.get(r.node)
            out.append(node_name(target) if target is not None else "")
        else:
            out.append(r.literal)
    return out


def set_similarity(emb: EmbeddingTable, xs, ys) -> float:
    """Greedy best-match mean; unmatched items count as zero."""
    if not xs and not ys:
        return 1.0
    if not xs or not ys:
        return 0.0
    sims = np.array([[phrase_similarity(emb, x, y) for y in ys] for x in xs])
    total = 0.0
    for _ in range(min(len(xs), len(ys))):
        k = int(np.argmax(sims))
        r, c = divmod(k, len(ys))
        if sims[r, c] < 0:
            break
        total += sims[r, c]
        sims[r, :] = -1.0
        sims[:, c] = -1.0
    return total / max(len(xs), len(ys))


def _features(g: GestGraph):
    nodes = g.node_map()
    return [
        (
            n.action,
            _phrases(n, nodes, "entities"),
            _phrases(n, nodes, "locations"),
            _phrases(n, nodes, "timeframes"),
        )
        for n in g.nodes
    ]


def node_similarity_matrix(g1: GestGraph, g2: GestGraph, emb: EmbeddingTable, cfg: AffinityConfig) -> np.ndarray:
    f1, f2 = _features(g1), _features(g2)
    S = np.zeros((len(f1), len(f2)))
    for a, (act1, ent1, loc1, tf1) in enumerate(f1):
        for i, (act2, ent2, loc2, tf2) in enumerate(f2):
            s = cfg.w_action * phrase_similarity(emb, act1, act2)
            s += cfg.w_entities * set_similarity(emb, ent1, ent2)
            if cfg.w_location:
                s += cfg.w_location * set_similarity(emb, loc1, loc2)
            if cfg.w_timeframe:
                s += cfg.w_timeframe * set_similarity(emb, tf1, tf2)
            S[a, i] = s
    return S


def edge_type_similarity(emb: EmbeddingTable, r1, r2) -> float:
    if r1 == r2:
        return 1.0
    return phrase_similarity(emb, r1.label, r2.label)


def _edge_arrays(g: GestGraph, cfg: AffinityConfig):
    pos = {nid: k for k, nid in enumerate(g.ids)}
    edges = [
        e
        for e in g.edges
        if e.src in pos and e.dst in pos
        and (cfg.include_same_entity_edges or e.relation.label != "same_entity")
    ]
    src = np.array([pos[e.src] for e in edges], dtype=np.int64)
    dst = np.array([pos[e.dst] for e in edges], dtype=np.int64)
    return edges, src, dst


def build_affinity(g1: GestGraph, g2: GestGraph, emb: EmbeddingTable, cfg: AffinityConfig = None) -> AffinityMatrix:
    cfg = cfg or AffinityConfig()
    if not g1.nodes or not g2.nodes:
        raise MatchingError("cannot match an empty graph")
    n1, n2 = len(g1), len(g2)
    S = node_similarity_matrix(g1, g2, emb, cfg)
    M = np.zeros((n1 * n2, n1 * n2))
    M[np.diag_indices_from(M)] = S.reshape(-1)
    e1, s1, d1 = _edge_arrays(g1, cfg)
    e2, s2, d2 = _edge_arrays(g2, cfg)
    if e1 and e2:
        T = np.array([[edge_type_similarity(emb, x.relation, y.relation) for y in e2] for x in e1])
        kernels.fill_edge_affinity(M, s1, d1, s2, d2, T, np.ascontiguousarray(S), n2)
    return AffinityMatrix(n1, n2, M, S)


# --------------------------------------------------------------------------
# matching


def quadratic_score(M: AffinityMatrix, pairs) -> float:
    """``x^T M x`` for the binary indicator of ``pairs``."""
    if not pairs:
        return 0.0
    idx = np.array(sorted(M.index(a, i) for a, i in pairs))
    return float(M.data[np.ix_(idx, idx)].sum())


def principal_eigenvector(M: np.ndarray, tol: float = 1e-8, max_iter: int = 1000):
    """Power iteration from the uniform positive vector; returns ``(x, iterations)``."""
    n = M.shape[0]
    x = np.full(n, 1.0 / math.sqrt(n))
    for it in range(1, max_iter + 1):
        y = M @ x
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            return np.zeros(n), it
        y /= norm
        if float(np.linalg.norm(y - x)) < tol:
            return y, it
        x = y
    return x, max_iter


MODES = ("sequential", "rounds", "single")


def _select(pairs, n1, n2, avail):
    taken = np.zeros((n1, n2), dtype=bool)
    for a, i in pairs:
        taken[a, :] = True
        taken[:, i] = True
    avail &= ~taken.reshape(-1)


def spectral_match(M: AffinityMatrix, tol: float = 1e-8, max_iter: int = 1000, mode: str = "sequential") -> Matching:
    """Spectral Matching with greedy discretization.

    ``single`` reads one principal eigenvector and greedily keeps the largest
    compatible entries until they fall to 1e-12.  On a reducible affinity
    matrix that eigenvector vanishes outside its dominant block and the
    assignment comes out truncated, so two extensions exist:

    ``rounds`` reruns the single pass on the submatrix of assignments still
    compatible with the ones chosen.  ``sequential`` (default) keeps only the
    top assignment per eigenvector and credits every remaining assignment with
    its affinity to the chosen set on the diagonal before solving again.
    """
    if mode not in MODES:
        raise MatchingError(f"unknown matching mode {mode!r}")
    n = M.n1 * M.n2
    avail = np.ones(n, dtype=bool)
    pairs, chosen, iters = [], [], 0
    while avail.any():
        idx = np.flatnonzero(avail)
        sub = M.data[np.ix_(idx, idx)]
        if mode == "sequential" and chosen:
            sub = sub.copy()
            sub[np.diag_indices_from(sub)] += 2.0 * M.data[np.ix_(idx, chosen)].sum(axis=1)
        if not sub.any():
            break
        xs, it = principal_eigenvector(sub, tol, max_iter)
        iters += it
        x = np.zeros(n)
        x[idx] = xs
        if mode == "sequential":
            best = int(np.argmax(x))
            if x[best] <= 1e-12:
                break
            new = [divmod(best, M.n2)]
        else:
            new = [(int(a), int(i)) for a, i in kernels.greedy_discretize(x, M.n1, M.n2, 1e-12)]
        if not new:
            break
        pairs += new
        chosen += [M.index(a, i) for a, i in new]
        _select(new, M.n1, M.n2, avail)
        if mode == "single":
            break
    pairs.sort()
    return Matching(pairs, quadratic_score(M, pairs), iterations=iters)


def brute_force_match(M: AffinityMatrix) -> Matching:
    if min(M.n1, M.n2) > BRUTE_FORCE_LIMIT:
        raise MatchingError(f"brute force limited to graphs with at most {BRUTE_FORCE_LIMIT} nodes on one side")
    _, pairs = kernels.brute_force(M.data, M.n1, M.n2)
    pairs = sorted((int(a), int(i)) for a, i in pairs)
    return Matching(pairs, quadratic_score(M, pairs))


# --------------------------------------------------------------------------
# graph similarity


def _order_key(g: GestGraph) -> str:
    return repr(g)


class GestScorer:
    """Normalized GEST similarity with memoized self-matching scores."""

    def __init__(self, emb: EmbeddingTable, cfg: AffinityConfig = None, tol: float = 1e-8, max_iter: int = 1000,
                 mode: str = "sequential"):
        self.emb = emb
        self.cfg = cfg or AffinityConfig()
        self.tol = tol
        self.max_iter = max_iter
        self.mode = mode
        self._self = {}

    def match(self, g1: GestGraph, g2: GestGraph) -> Matching:
        M = build_affinity(g1, g2, self.emb, self.cfg)
        m = spectral_match(M, self.tol, self.max_iter, self.mode)
        ids1, ids2 = g1.ids, g2.ids
        m.node_pairs = [(ids1[a], ids2[i]) for a, i in m.pairs]
        return m

    def self_score(self, g: GestGraph) -> float:
        key = _order_key(g)
        if key not in self._self:
            self._self[key] = self.match(g, g).raw_score
        return self._self[key]

    def raw(self, g1: GestGraph, g2: GestGraph) -> float:
        # fixed argument order makes the score exactly symmetric
        if _order_key(g2) < _order_key(g1):
            g1, g2 = g2, g1
        return self.match(g1, g2).raw_score

    def similarity(self, g1: GestGraph, g2: GestGraph) -> float:
        if not g1.nodes or not g2.nodes:
            raise MatchingError("cannot match an empty graph")
        d = self.self_score(g1) * self.self_score(g2)
        if d <= 0.0:
            return 0.0
        return self.raw(g1, g2) / math.sqrt(d)

    def compare(self, g1: GestGraph, g2: GestGraph) -> Matching:
        """Matching of ``g1`` onto ``g2`` carrying both raw and normalized scores."""
        m = self.match(g1, g2)
        m.normalized_score = self.similarity(g1, g2)
        return m


def gest_similarity(g1: GestGraph, g2: GestGraph, emb: EmbeddingTable, cfg: AffinityConfig = None,
                    mode: str = "sequential") -> float:
    return GestScorer(emb, cfg, mode=mode).similarity(g1, g2)
