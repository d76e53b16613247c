"""Supplement-aware terminology merging, predication filtering, knowledge-graph
construction, and drug-supplement interaction-pathway discovery."""

from .discovery import (
    KnownInteractionList,
    Pathway,
    check_known,
    collapse_endpoints,
    emit_review_worksheet,
    find_pathways,
    load_known_interactions,
    novelty_filter,
    rank_pathways,
)
from .errors import SuppmineError
from .filtering import (
    Annotation,
    FilterStats,
    RunSummary,
    Score,
    SplitSpec,
    Splits,
    constant_scorer,
    evaluate_precision,
    filter_by_threshold,
    load_annotations,
    load_scores,
    negation_heuristic,
    score_predications,
    split_dataset,
    summarize_runs,
)
from .kgraph import (
    Edge,
    Graph,
    GraphStats,
    Node,
    build_graph,
    deserialize,
    graph_stats,
    merge_graphs,
    predicate_distribution,
    serialize,
)
from .patterns import (
    EdgeConstraint,
    NodeConstraint,
    PatternSpec,
    load_builtin_pattern,
    parse_pattern,
)
from .predications import (
    ComparisonTable,
    ParseResult,
    Predication,
    compare_extractions,
    comparison_row,
    dedupe,
    parse_predications,
)
from .terminology import (
    Atom,
    ConceptRecord,
    MergeReport,
    RrfSet,
    SourceRanking,
    allocate_cuis,
    emit_rrf,
    merge_terminology,
    parse_mrconso,
    parse_mrrank,
    parse_mrsty,
    parse_supplement,
)
from .vocab import PREDICATES

__version__ = "0.1.0"

__all__ = [
    "Annotation", "Atom", "ComparisonTable", "ConceptRecord", "Edge",
    "EdgeConstraint", "FilterStats", "Graph", "GraphStats",
    "KnownInteractionList", "MergeReport", "Node", "NodeConstraint",
    "ParseResult", "Pathway", "PatternSpec", "PREDICATES", "Predication",
    "RrfSet", "RunSummary", "Score", "SourceRanking", "SplitSpec", "Splits",
    "SuppmineError",
    "allocate_cuis", "build_graph", "check_known", "collapse_endpoints",
    "compare_extractions", "comparison_row", "constant_scorer", "dedupe",
    "deserialize",
    "emit_review_worksheet", "emit_rrf", "evaluate_precision",
    "filter_by_threshold", "find_pathways", "graph_stats",
    "load_annotations", "load_builtin_pattern", "load_known_interactions",
    "load_scores", "merge_graphs", "merge_terminology", "negation_heuristic",
    "novelty_filter", "parse_mrconso", "parse_mrrank", "parse_mrsty",
    "parse_pattern", "parse_predications", "parse_supplement",
    "predicate_distribution", "rank_pathways", "score_predications",
    "serialize", "split_dataset", "summarize_runs",
]
