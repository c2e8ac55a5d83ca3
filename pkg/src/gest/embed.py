"""Word-vector tables, phrase vectors and clamped cosine similarity."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

_SPLIT = re.compile(r"[\s_]+")


class EmbeddingError(ValueError):
    pass


def normalize_phrase(phrase: str) -> str:
    return " ".join(t for t in _SPLIT.split(phrase.lower()) if t)


@dataclass(frozen=True)
class PhraseVector:
    vector: np.ndarray
    oov_fraction: float
    text: Optional[str] = None

    @property
    def is_zero(self) -> bool:
        return not np.any(self.vector)


@dataclass
class EmbeddingTable:
    dimension: int
    vectors: dict
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, token):
        return token.lower() in self.vectors

    def get(self, token: str) -> Optional[np.ndarray]:
        return self.vectors.get(token.lower())

    def phrase(self, text: str) -> PhraseVector:
        """Cached :func:`phrase_vector`."""
        hit = self._cache.get(text)
        if hit is None:
            hit = self._cache[text] = phrase_vector(self, text)
        return hit


def load_embeddings(path, limit: Optional[int] = None) -> EmbeddingTable:
    """Read a word-per-line text file: ``token v1 v2 ... vD``.

    A leading word2vec-style ``<count> <dim>`` header line is skipped.
    """
    vectors = {}
    dim = None
    try:
        fh = open(path, encoding="utf-8", errors="replace")
    except OSError as exc:
        raise EmbeddingError(f"cannot read embeddings file {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            if limit is not None and len(vectors) >= limit:
                break
            parts = line.rstrip("\n").rstrip(" ").split(" ")
            if len(parts) < 2:
                if line.strip():
                    raise EmbeddingError(f"{path}:{lineno}: expected a token followed by values")
                continue
            if lineno == 1 and len(parts) == 2 and parts[0].isdigit() and parts[1].isdigit():
                continue
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise EmbeddingError(f"{path}:{lineno}: {len(values)} values for {token!r}, expected {dim}")
            try:
                vec = np.asarray(values, dtype=np.float64)
            except ValueError as exc:
                raise EmbeddingError(f"{path}:{lineno}: non-numeric value") from exc
            vectors.setdefault(token.lower(), vec)
    if dim is None:
        raise EmbeddingError(f"{path}: no vectors found")
    return EmbeddingTable(dim, vectors)


def default_embeddings_path() -> str:
    return str(resources.files("gest") / "data" / "toy_embeddings.txt")


def load_default_embeddings() -> EmbeddingTable:
    return load_embeddings(default_embeddings_path())


def resolve_embeddings(path: Optional[str] = None, limit: Optional[int] = None) -> EmbeddingTable:
    path = path or os.environ.get("GEST_EMBEDDINGS") or default_embeddings_path()
    return load_embeddings(path, limit)


def phrase_vector(t: EmbeddingTable, phrase: str) -> PhraseVector:
    text = normalize_phrase(phrase)
    tokens = text.split()
    found = [t.vectors[tok] for tok in tokens if tok in t.vectors]
    if not found:
        return PhraseVector(np.zeros(t.dimension), 1.0, text)
    oov = (len(tokens) - len(found)) / len(tokens)
    return PhraseVector(np.mean(found, axis=0), oov, text)


def similarity(a: PhraseVector, b: PhraseVector) -> float:
    """Cosine clamped to [0, 1]; exact-string fallback when a vector is zero."""
    if a.vector.shape != b.vector.shape:
        raise EmbeddingError(f"dimension mismatch: {a.vector.shape[0]} vs {b.vector.shape[0]}")
    if a.text is not None and a.text == b.text:
        return 1.0
    na = float(np.linalg.norm(a.vector))
    nb = float(np.linalg.norm(b.vector))
    if na == 0.0 or nb == 0.0:
        return 0.0
    cos = float(np.dot(a.vector, b.vector)) / (na * nb)
    return min(1.0, max(0.0, cos))


def phrase_similarity(t: EmbeddingTable, p: str, q: str) -> float:
    return similarity(t.phrase(p), t.phrase(q))
