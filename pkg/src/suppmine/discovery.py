"""Pathway discovery: match patterns against a graph, rank, and report."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import SuppmineError
from .kgraph import Edge, EdgeKey, Graph, Node
from .patterns import DIRECTION_FORWARD, NodeConstraint, PatternSpec
from .predications import Predication
from .vocab import PREDICATES

DEFAULT_INTERACTION_PREDICATES = frozenset({"INTERACTS_WITH"})

KNOWN_COLUMNS = ("supplement_cui", "drug_cui")


class WorksheetError(SuppmineError):
    """A pathway references evidence the predication store cannot produce."""


@dataclass(frozen=True)
class Pathway:
    """One concrete match of a pattern: bound nodes, stored edges, and score.

    ``score`` is the sum of the referenced edges' confidences; ``provenance``
    holds each edge's article ids, slot by slot.
    """

    pattern: str
    node_cuis: tuple[str, ...]
    edge_refs: tuple[EdgeKey, ...]
    score: float
    provenance: tuple[frozenset[str], ...]

    def __post_init__(self):
        if len(self.edge_refs) != len(self.node_cuis) - 1:
            raise ValueError("pathway edge count must be node count minus one")
        if len(self.provenance) != len(self.edge_refs):
            raise ValueError("pathway provenance must cover every edge")

    @property
    def endpoints(self) -> tuple[str, str]:
        return (self.node_cuis[0], self.node_cuis[-1])


def node_matches(constraint: NodeConstraint, node: Node) -> bool:
    """A node matches when every present constraint field holds."""
    if constraint.semtypes is not None and not (constraint.semtypes
                                                & node.semtypes):
        return False
    if (constraint.require_supplement is not None
            and node.is_supplement != constraint.require_supplement):
        return False
    if constraint.cui_allow is not None and node.cui not in constraint.cui_allow:
        return False
    if constraint.cui_deny is not None and node.cui in constraint.cui_deny:
        return False
    return True


def find_pathways(g: Graph, pattern: PatternSpec) -> list[Pathway]:
    """Enumerate every simple match of ``pattern`` in ``g``.

    A match binds each pattern position to a distinct node; each edge slot is
    filled by a stored edge in the declared direction whose predicate belongs
    to the slot's set.  Results come back sorted by descending score, then
    node ids, then edge triples, so equal inputs give identical output.
    """
    results: list[Pathway] = []
    slots = pattern.edges
    constraints = pattern.nodes

    def extend(bindings: list[str], chosen: list[EdgeKey]) -> None:
        depth = len(chosen)
        if depth == len(slots):
            score = 0.0
            provenance = []
            for key in chosen:
                edge = g.edges[key]
                score += edge.confidence
                provenance.append(edge.pmids)
            results.append(Pathway(pattern=pattern.name,
                                   node_cuis=tuple(bindings),
                                   edge_refs=tuple(chosen), score=score,
                                   provenance=tuple(provenance)))
            return
        slot = slots[depth]
        current = bindings[-1]
        forward = slot.direction == DIRECTION_FORWARD
        keys = g.out_keys(current) if forward else g.in_keys(current)
        next_constraint = constraints[depth + 1]
        for key in keys:
            if key[1] not in slot.predicates:
                continue
            other = key[2] if forward else key[0]
            if other in bindings:
                continue
            if not node_matches(next_constraint, g.nodes[other]):
                continue
            bindings.append(other)
            chosen.append(key)
            extend(bindings, chosen)
            bindings.pop()
            chosen.pop()

    first = constraints[0]
    for cui, node in g.nodes.items():
        if node_matches(first, node):
            extend([cui], [])
    results.sort(key=lambda p: (-p.score, p.node_cuis, p.edge_refs))
    return results


def rank_pathways(pathways: Iterable[Pathway],
                  top_k: int | None = None) -> list[Pathway]:
    """Order by descending score, ties by node ids; optionally keep the top k."""
    if top_k is not None and top_k < 0:
        raise ValueError("top_k must be non-negative")
    ranked = sorted(pathways, key=lambda p: (-p.score, p.node_cuis))
    return ranked if top_k is None else ranked[:top_k]


def collapse_endpoints(ranked: Sequence[Pathway]) -> list[Pathway]:
    """Keep only the best-ranked pathway per (first, last) node pair."""
    seen: set[tuple[str, str]] = set()
    kept = []
    for pathway in ranked:
        if pathway.endpoints in seen:
            continue
        seen.add(pathway.endpoints)
        kept.append(pathway)
    return kept


def novelty_filter(g: Graph, pathways: Iterable[Pathway],
                   interaction_predicates: frozenset[str] =
                   DEFAULT_INTERACTION_PREDICATES,
                   ) -> tuple[list[Pathway], list[Pathway]]:
    """Partition pathways into (novel, directly_connected).

    A pathway is directly connected when the graph already holds an edge, in
    either direction, between its first and last node with one of the
    interaction predicates.
    """
    unknown = set(interaction_predicates) - PREDICATES
    if unknown:
        raise ValueError("unknown interaction predicate(s): "
                         + ", ".join(sorted(unknown)))
    novel: list[Pathway] = []
    direct: list[Pathway] = []
    for pathway in pathways:
        first, last = pathway.endpoints
        connected = any(edge.predicate in interaction_predicates
                        for edge in g.edges_between(first, last)) or any(
            edge.predicate in interaction_predicates
            for edge in g.edges_between(last, first))
        (direct if connected else novel).append(pathway)
    return novel, direct


@dataclass(frozen=True)
class KnownInteractionList:
    """Supplement/drug concept pairs already recorded as interacting."""

    pairs: frozenset[tuple[str, str]]

    def matches(self, first: str, last: str) -> bool:
        return (first, last) in self.pairs or (last, first) in self.pairs


def load_known_interactions(stream) -> KnownInteractionList:
    """Load a known-interaction TSV (supplement_cui, drug_cui)."""
    data = stream.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    lines = data.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise SuppmineError("known-interaction file is empty")
    header = lines[0].split("\t")
    for column in KNOWN_COLUMNS:
        if column not in header:
            raise SuppmineError(
                f"known-interaction file: missing column {column!r}")
    first_at = header.index(KNOWN_COLUMNS[0])
    second_at = header.index(KNOWN_COLUMNS[1])
    pairs = set()
    for lineno, line in enumerate(lines[1:], 2):
        fields = line.split("\t")
        if len(fields) != len(header):
            raise SuppmineError(
                f"known-interaction file line {lineno}: wrong field count")
        pairs.add((fields[first_at], fields[second_at]))
    return KnownInteractionList(frozenset(pairs))


def check_known(pathways: Iterable[Pathway], known: KnownInteractionList,
                ) -> tuple[list[Pathway], list[Pathway]]:
    """Split pathways into (known, unknown) by endpoint pair, either order."""
    known_matches: list[Pathway] = []
    unknown: list[Pathway] = []
    for pathway in pathways:
        first, last = pathway.endpoints
        (known_matches if known.matches(first, last) else unknown).append(pathway)
    return known_matches, unknown


def known_counts_by_pattern(known_matches: Sequence[Pathway],
                            unknown: Sequence[Pathway]) -> dict[str, tuple[int, int]]:
    """Per-pattern (known, unknown) counts, pattern names sorted."""
    counts: dict[str, list[int]] = {}
    for pathway in known_matches:
        counts.setdefault(pathway.pattern, [0, 0])[0] += 1
    for pathway in unknown:
        counts.setdefault(pathway.pattern, [0, 0])[1] += 1
    return {name: (k, u) for name, (k, u) in sorted(counts.items())}


def _clean_cell(text: str) -> str:
    return text.replace("\t", " ").replace("\n", " ").replace("\r", " ")


def emit_review_worksheet(pathways: Sequence[Pathway], g: Graph,
                          predications: Iterable[Predication]) -> bytes:
    """One TSV row per pathway for manual review.

    Columns: rank, score, the node chain (cui:name), the edge chain
    (predicate:confidence), the supporting article ids, one sentence column
    per edge slot, and blank verdict/notes columns for the reviewer.
    """
    by_triple: dict[EdgeKey, list[Predication]] = {}
    for p in predications:
        by_triple.setdefault((p.subject_cui, p.predicate, p.object_cui),
                             []).append(p)

    max_edges = max((len(p.edge_refs) for p in pathways), default=0)
    header = ["rank", "score", "nodes", "edges", "pmids"]
    header += [f"sentences_{i}" for i in range(1, max_edges + 1)]
    header += ["verdict", "notes"]
    rows = ["\t".join(header)]

    for rank, pathway in enumerate(pathways, 1):
        nodes_cell = " -> ".join(
            f"{cui}:{_clean_cell(g.nodes[cui].name)}" if cui in g.nodes else cui
            for cui in pathway.node_cuis)
        edge_parts = []
        pmids: set[str] = set()
        sentence_cells = []
        for slot, key in enumerate(pathway.edge_refs):
            edge = g.edges.get(key)
            confidence = edge.confidence if edge else 0.0
            edge_parts.append(f"{key[1]}:{confidence:.4f}")
            slot_pmids = pathway.provenance[slot]
            pmids.update(slot_pmids)
            supporters = [p for p in by_triple.get(key, ())
                          if p.pmid in slot_pmids]
            if not supporters:
                raise WorksheetError(
                    f"no predication backs edge {key} of pathway "
                    f"{'-'.join(pathway.node_cuis)}")
            supporters.sort(key=lambda p: (p.pmid, p.id))
            seen_sentences: list[str] = []
            for p in supporters:
                cell = _clean_cell(p.sentence)
                if cell not in seen_sentences:
                    seen_sentences.append(cell)
            sentence_cells.append(" || ".join(seen_sentences))
        sentence_cells += [""] * (max_edges - len(pathway.edge_refs))
        row = [str(rank), f"{pathway.score:.4f}", nodes_cell,
               " -> ".join(edge_parts), ",".join(sorted(pmids))]
        row += sentence_cells
        row += ["", ""]
        rows.append("\t".join(row))
    return ("\n".join(rows) + "\n").encode("utf-8")
