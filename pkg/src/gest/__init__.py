"""Graphs of events in space and time: story parsing, text formats and graph-matching similarity."""

from .core import (
    CATEGORIES,
    EXISTS,
    TEMPORAL_LABELS,
    Anchor,
    Edge,
    EventNode,
    GestGraph,
    GraphError,
    Ref,
    Relation,
    canonical_form,
    collapse,
    expand,
    isomorphic,
    lit,
    ref,
    relabel,
    validate,
)
from .embed import EmbeddingError, EmbeddingTable, load_default_embeddings, load_embeddings, phrase_similarity, resolve_embeddings
from .harness import (
    CorpusItem,
    EvalReport,
    FusionModel,
    HarnessError,
    MetricReport,
    PairRecord,
    build_pairs,
    evaluate,
    fit_fusion,
    generate_synthetic_corpus,
)
from .matching import (
    AffinityConfig,
    GestScorer,
    Matching,
    MatchingError,
    brute_force_match,
    build_affinity,
    gest_similarity,
    spectral_match,
)
from .parser import ParseError, Story, parse_sentence, parse_story, parse_text, svos_to_gest
from .serde import GestSyntaxError, SerializedGest, from_text, repair, serialize, to_v1, to_v2
from .textmetrics import bleu, rouge_l

__version__ = "0.1.0"
