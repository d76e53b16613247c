"""Command-line pipeline: each subcommand reads and writes declared files only.

Every stage prints one ``stage=<name> key=value ...`` summary line on stdout
(a human-readable line may precede it), sends diagnostics to stderr, and
exits 0 on success, 1 on data errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import discovery, filtering, kgraph, patterns, predications, terminology
from .errors import SuppmineError

PATHWAYS_DOCUMENT_VERSION = 1


@dataclass
class RunConfig:
    """Validated per-invocation settings shared by the pipeline stages."""

    supplement_source: str = ""
    default_tui: str = terminology.PHARMACOLOGIC_SUBSTANCE_TUI
    filter_threshold: float = 0.5
    seed: int = 0
    paths: dict[str, Path] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.filter_threshold <= 1.0:
            raise SuppmineError(
                f"threshold must be in [0, 1], got {self.filter_threshold}")
        for name, path in self.paths.items():
            if str(path) == "":
                raise SuppmineError(f"path for {name} must be non-empty")


def _summary(stage: str, **values) -> None:
    parts = [f"stage={stage}"]
    parts.extend(f"{key}={value}" for key, value in values.items())
    print(" ".join(parts))


def _load_predications(path: Path) -> predications.ParseResult:
    with open(path, "rb") as handle:
        return predications.parse_predications(handle)


def _load_scores(path: Path) -> dict[str, float]:
    with open(path, "rb") as handle:
        return filtering.load_scores(handle)


def _load_graph(path: Path) -> kgraph.Graph:
    with open(path, "rb") as handle:
        return kgraph.deserialize(handle.read())


def _load_pattern(spec: str) -> patterns.PatternSpec:
    if spec in patterns.BUILTIN_PATTERNS:
        return patterns.load_builtin_pattern(spec)
    return patterns.parse_pattern(Path(spec).read_text(encoding="utf-8"))


def cmd_merge_terminology(args) -> int:
    config = RunConfig(default_tui=args.default_tui,
                       paths={"base-dir": Path(args.base_dir),
                              "supplement": Path(args.supplement),
                              "ranking": Path(args.ranking),
                              "out-dir": Path(args.out_dir)})
    base = terminology.load_rrf_dir(config.paths["base-dir"])
    with open(config.paths["supplement"], "rb") as handle:
        supplement = terminology.parse_supplement(handle)
    with open(config.paths["ranking"], "rb") as handle:
        ranking = terminology.parse_mrrank(handle)
    merged, report = terminology.merge_terminology(
        base, supplement, ranking, default_tui=config.default_tui)
    written = terminology.write_rrf_dir(merged, config.paths["out-dir"])
    if args.report:
        doc = {"new_concepts": report.new_concepts,
               "linked_concepts": report.linked_concepts,
               "atoms_added": report.atoms_added,
               "cuis_allocated": [list(pair) for pair in report.cuis_allocated]}
        Path(args.report).write_text(
            json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    _summary("merge-terminology", new_concepts=report.new_concepts,
             linked_concepts=report.linked_concepts,
             atoms_added=report.atoms_added,
             tables_written=len(written))
    return 0


def cmd_ingest(args) -> int:
    result = _load_predications(Path(args.predications))
    deduped = predications.dedupe(result.predications)
    with open(args.out, "wb") as handle:
        predications.write_predications(deduped, handle)
    if args.rejects:
        with open(args.rejects, "wb") as handle:
            predications.write_rejects(result.rejects, handle)
    _summary("ingest",
             rows=len(result.predications) + len(result.rejects),
             accepted=len(result.predications), rejected=len(result.rejects),
             duplicates_removed=len(result.predications) - len(deduped),
             written=len(deduped))
    return 0


def _make_scorer(spec: str):
    if spec == "negation":
        return filtering.negation_heuristic
    if spec.startswith("constant:"):
        try:
            value = float(spec.split(":", 1)[1])
        except ValueError:
            raise SuppmineError(f"bad constant scorer value in {spec!r}") from None
        return filtering.constant_scorer(value)
    if spec.startswith("external:"):
        return _load_scores(Path(spec.split(":", 1)[1]))
    raise SuppmineError(
        f"unknown scorer {spec!r}; use constant:<p>, negation, or external:<path>")


def cmd_score(args) -> int:
    result = _load_predications(Path(args.predications))
    scorer = _make_scorer(args.scorer)
    scores = filtering.score_predications(result.predications, scorer)
    with open(args.out, "wb") as handle:
        filtering.write_scores(scores, handle)
    _summary("score", predications=len(scores), scorer=args.scorer)
    return 0


def cmd_filter(args) -> int:
    config = RunConfig(filter_threshold=args.threshold)
    result = _load_predications(Path(args.predications))
    scores = _load_scores(Path(args.scores))
    retained, removed, stats = filtering.filter_by_threshold(
        result.predications, scores, config.filter_threshold)
    with open(args.out_retained, "wb") as handle:
        predications.write_predications(retained, handle)
    if args.out_removed:
        with open(args.out_removed, "wb") as handle:
            predications.write_predications(removed, handle)
    print(f"retained {stats.summary}")
    _summary("filter", input=stats.total, retained=stats.retained_count,
             removed=stats.removed_count, pct=f"{stats.retained_percent:.2f}",
             threshold=args.threshold)
    return 0


def cmd_split(args) -> int:
    config = RunConfig(seed=args.seed, paths={"out-dir": Path(args.out_dir)})
    result = _load_predications(Path(args.predications))
    with open(args.annotations, "rb") as handle:
        annotations = filtering.load_annotations(handle)
    ratios = tuple(float(part) for part in args.ratios.split(","))
    if len(ratios) != 3:
        raise SuppmineError(f"--ratios needs three comma-joined numbers: "
                            f"{args.ratios!r}")
    spec = filtering.SplitSpec(ratios=ratios, seed=config.seed,
                               balance_train_dev=not args.no_balance,
                               test_matches_source_distribution=
                               not args.no_match_test)
    splits = filtering.split_dataset(result.predications, annotations, spec)
    out_dir = config.paths["out-dir"]
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, items in (("train", splits.train), ("dev", splits.dev),
                        ("test", splits.test)):
        lines = ["predication_id"] + [p.id for p in items]
        (out_dir / f"{name}.tsv").write_text("\n".join(lines) + "\n",
                                             encoding="utf-8")
    discarded = splits.train_discarded + splits.dev_discarded
    if discarded:
        lines = ["predication_id"] + [p.id for p in discarded]
        (out_dir / "discarded.tsv").write_text("\n".join(lines) + "\n",
                                               encoding="utf-8")
    _summary("split", train=len(splits.train), dev=len(splits.dev),
             test=len(splits.test), discarded=len(discarded), seed=config.seed)
    return 0


def cmd_build_graph(args) -> int:
    config = RunConfig(supplement_source=args.supplement_source)
    result = _load_predications(Path(args.predications))
    scores = _load_scores(Path(args.scores))
    graph = kgraph.build_graph(result.predications, scores,
                               config.supplement_source)
    Path(args.out).write_bytes(kgraph.serialize(graph))
    _summary("build-graph", nodes=graph.node_count, edges=graph.edge_count,
             supplement_source=config.supplement_source)
    return 0


def cmd_stats(args) -> int:
    graph = _load_graph(Path(args.graph))
    stats = kgraph.graph_stats(graph, args.supplement_source)
    print(stats.summary)
    _summary("stats", nodes=stats.node_count, edges=stats.edge_count,
             supplement_nodes=stats.supplement_node_count)
    return 0


def _pathways_document(ranked) -> bytes:
    doc = {
        "version": PATHWAYS_DOCUMENT_VERSION,
        "pathways": [{
            "pattern": p.pattern,
            "node_cuis": list(p.node_cuis),
            "edges": [list(key) for key in p.edge_refs],
            "score": p.score,
            "pmids": [sorted(pmids) for pmids in p.provenance],
        } for p in ranked],
    }
    return (json.dumps(doc, ensure_ascii=False, sort_keys=True,
                       separators=(",", ":")) + "\n").encode("utf-8")


def load_pathways(data: bytes | str) -> list[discovery.Pathway]:
    """Read a pathway document written by the discover stage."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SuppmineError(f"pathway document is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("version") != PATHWAYS_DOCUMENT_VERSION:
        raise SuppmineError("unsupported pathway document")
    out = []
    for item in doc.get("pathways", ()):
        out.append(discovery.Pathway(
            pattern=item["pattern"],
            node_cuis=tuple(item["node_cuis"]),
            edge_refs=tuple(tuple(edge) for edge in item["edges"]),
            score=float(item["score"]),
            provenance=tuple(frozenset(pmids) for pmids in item["pmids"])))
    return out


def cmd_discover(args) -> int:
    graph = _load_graph(Path(args.graph))
    pattern = _load_pattern(args.pattern)
    result = _load_predications(Path(args.predications))
    found = discovery.find_pathways(graph, pattern)
    if args.novel_only:
        interaction = frozenset(args.interaction_predicates.split(","))
        found, _direct = discovery.novelty_filter(graph, found, interaction)
    ranked = discovery.rank_pathways(found, top_k=args.top_k)
    if args.collapse_endpoints:
        ranked = discovery.collapse_endpoints(ranked)
    worksheet = discovery.emit_review_worksheet(ranked, graph,
                                                result.predications)
    Path(args.out_worksheet).write_bytes(worksheet)
    if args.out_pathways:
        Path(args.out_pathways).write_bytes(_pathways_document(ranked))
    _summary("discover", pattern=pattern.name, matches=len(found),
             reported=len(ranked))
    return 0


def cmd_check_known(args) -> int:
    with open(args.pathways, "rb") as handle:
        pathways = load_pathways(handle.read())
    with open(args.known, "rb") as handle:
        known = discovery.load_known_interactions(handle)
    known_matches, unknown = discovery.check_known(pathways, known)
    for name, (k, u) in discovery.known_counts_by_pattern(
            known_matches, unknown).items():
        print(f"pattern={name} known={k} unknown={u}")
    _summary("check-known", known=len(known_matches), unknown=len(unknown))
    return 0


def cmd_compare(args) -> int:
    config = RunConfig(supplement_source=args.supplement_source)
    base = _load_predications(Path(args.base))
    extended = _load_predications(Path(args.extended))
    table = predications.compare_extractions(
        base.predications, extended.predications, config.supplement_source)
    for row in table.rows:
        print(f"{row.label}: base={row.base:,} extended={row.extended:,} "
              f"change={row.formatted}")
    _summary("compare",
             mentions_base=table.mentions.base,
             mentions_extended=table.mentions.extended,
             mentions_pct=_pct_field(table.mentions.percent),
             relations_base=table.relations.base,
             relations_extended=table.relations.extended,
             relations_pct=_pct_field(table.relations.percent))
    return 0


def _pct_field(percent: float | None) -> str:
    return "undefined" if percent is None else f"{percent:.2f}"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="suppmine",
        description="Terminology merging, predication filtering, knowledge-graph "
                    "construction, and interaction-pathway discovery.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("merge-terminology",
                       help="fold a supplement vocabulary into RRF tables")
    p.add_argument("--base-dir", required=True)
    p.add_argument("--supplement", required=True)
    p.add_argument("--ranking", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--default-tui",
                   default=terminology.PHARMACOLOGIC_SUBSTANCE_TUI)
    p.add_argument("--report", help="optional JSON merge-report path")
    p.set_defaults(func=cmd_merge_terminology)

    p = sub.add_parser("ingest", help="validate and dedupe a predication TSV")
    p.add_argument("--predications", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rejects", help="optional reject-report path")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("score", help="attach correctness scores")
    p.add_argument("--predications", required=True)
    p.add_argument("--scorer", required=True,
                   help="constant:<p> | negation | external:<path>")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("filter", help="keep predications scoring at or above "
                                      "a threshold")
    p.add_argument("--predications", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out-retained", required=True)
    p.add_argument("--out-removed")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("split", help="cut an annotated dataset into "
                                     "train/dev/test")
    p.add_argument("--predications", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ratios", default="0.7,0.2,0.1")
    p.add_argument("--no-balance", action="store_true",
                   help="skip balancing train/dev classes")
    p.add_argument("--no-match-test", action="store_true",
                   help="draw the test split without class stratification")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("build-graph", help="aggregate predications into a "
                                           "graph document")
    p.add_argument("--predications", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--supplement-source", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("stats", help="report graph statistics")
    p.add_argument("--graph", required=True)
    p.add_argument("--supplement-source",
                   help="override the document's supplement source")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("discover", help="mine and rank pattern matches")
    p.add_argument("--graph", required=True)
    p.add_argument("--pattern", required=True,
                   help="builtin name (dsgd, dsgfgd) or a pattern file path")
    p.add_argument("--predications", required=True,
                   help="predication TSV backing the worksheet sentences")
    p.add_argument("--out-worksheet", required=True)
    p.add_argument("--out-pathways", help="optional pathway JSON path")
    p.add_argument("--top-k", type=int)
    p.add_argument("--novel-only", action="store_true",
                   help="drop pathways whose endpoints are already directly "
                        "connected")
    p.add_argument("--interaction-predicates", default="INTERACTS_WITH",
                   help="comma-joined predicates treated as direct connections")
    p.add_argument("--collapse-endpoints", action="store_true",
                   help="keep only the best pathway per endpoint pair")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("check-known", help="compare pathways against known "
                                           "interaction pairs")
    p.add_argument("--pathways", required=True)
    p.add_argument("--known", required=True)
    p.set_defaults(func=cmd_check_known)

    p = sub.add_parser("compare", help="compare supplement coverage between "
                                       "two extraction runs")
    p.add_argument("--base", required=True)
    p.add_argument("--extended", required=True)
    p.add_argument("--supplement-source", required=True)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SuppmineError, ValueError, OSError) as exc:
        record = {"error": type(exc).__name__, "stage": args.command,
                  "message": str(exc)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())
