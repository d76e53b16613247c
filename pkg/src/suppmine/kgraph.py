"""Immutable directed labeled knowledge graph built from filtered predications."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import SuppmineError
from .filtering import Score
from .predications import Predication
from .vocab import PREDICATES

log = logging.getLogger(__name__)

DOCUMENT_VERSION = 1

EdgeKey = tuple[str, str, str]


class GraphDocumentError(SuppmineError):
    """A graph document violates the schema; ``path`` locates the offender."""

    def __init__(self, message: str, path: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class Node:
    cui: str
    name: str
    semtypes: frozenset[str]
    sources: frozenset[str]
    is_supplement: bool


@dataclass(frozen=True)
class Edge:
    """One (subject, predicate, object) relation with aggregated evidence.

    ``confidence`` is the maximum score over supporting predications so a
    strong assertion is never diluted by weaker restatements; ``support``
    counts them.
    """

    subject_cui: str
    predicate: str
    object_cui: str
    confidence: float
    support: int
    pmids: frozenset[str]
    predication_ids: frozenset[str]

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"edge confidence outside [0, 1]: {self.confidence}")
        if self.support < 1:
            raise ValueError("edge support must be at least 1")
        if self.predication_ids and self.support != len(self.predication_ids):
            raise ValueError("edge support disagrees with its predication ids")

    @property
    def key(self) -> EdgeKey:
        return (self.subject_cui, self.predicate, self.object_cui)


@dataclass(frozen=True)
class Graph:
    """Nodes keyed by concept id, edges keyed by (subject, predicate, object).

    Instances are frozen after construction; the adjacency index is derived
    and excluded from equality.
    """

    supplement_source: str
    nodes: dict[str, Node]
    edges: dict[EdgeKey, Edge]
    _out: dict[str, tuple[EdgeKey, ...]] = field(compare=False, repr=False,
                                                 default_factory=dict)
    _in: dict[str, tuple[EdgeKey, ...]] = field(compare=False, repr=False,
                                                default_factory=dict)

    @classmethod
    def from_parts(cls, supplement_source: str, nodes: dict[str, Node],
                   edges: dict[EdgeKey, Edge]) -> "Graph":
        for key, edge in edges.items():
            if edge.subject_cui not in nodes or edge.object_cui not in nodes:
                raise ValueError(f"edge {key} references a missing node")
        outgoing: dict[str, list[EdgeKey]] = {cui: [] for cui in nodes}
        incoming: dict[str, list[EdgeKey]] = {cui: [] for cui in nodes}
        for key in sorted(edges):
            outgoing[key[0]].append(key)
            incoming[key[2]].append(key)
        return cls(supplement_source=supplement_source, nodes=nodes, edges=edges,
                   _out={cui: tuple(keys) for cui, keys in outgoing.items()},
                   _in={cui: tuple(keys) for cui, keys in incoming.items()})

    @classmethod
    def empty(cls, supplement_source: str = "") -> "Graph":
        return cls.from_parts(supplement_source, {}, {})

    def out_keys(self, cui: str) -> tuple[EdgeKey, ...]:
        return self._out.get(cui, ())

    def in_keys(self, cui: str) -> tuple[EdgeKey, ...]:
        return self._in.get(cui, ())

    def edges_between(self, subject_cui: str, object_cui: str) -> Iterator[Edge]:
        for key in self.out_keys(subject_cui):
            if key[2] == object_cui:
                yield self.edges[key]

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)


def _score_map(scores: Mapping[str, float] | Iterable[Score]) -> Mapping[str, float]:
    if isinstance(scores, Mapping):
        return scores
    return {s.predication_id: s.probability for s in scores}


def build_graph(predications: Sequence[Predication],
                scores: Mapping[str, float] | Iterable[Score],
                supplement_source: str) -> Graph:
    """Aggregate scored predications into a graph.

    One node per distinct endpoint (name from the first mention, semtypes and
    sources unioned over all mentions); one edge per distinct triple with
    max-score confidence and the supporting predication ids and article ids
    attached.
    """
    lookup = _score_map(scores)
    names: dict[str, str] = {}
    semtypes: dict[str, set[str]] = {}
    sources: dict[str, set[str]] = {}
    edge_acc: dict[EdgeKey, tuple[float, set[str], set[str]]] = {}

    for p in predications:
        if p.predicate not in PREDICATES:
            raise ValueError(f"predication {p.id!r} has unknown predicate "
                             f"{p.predicate!r}")
        try:
            probability = lookup[p.id]
        except KeyError:
            raise ValueError(f"no score for predication id {p.id!r}") from None
        for cui, name, stypes, srcs in (
                (p.subject_cui, p.subject_name, p.subject_semtypes,
                 p.subject_sources),
                (p.object_cui, p.object_name, p.object_semtypes, p.object_sources)):
            if cui not in names:
                names[cui] = name
                semtypes[cui] = set(stypes)
                sources[cui] = set(srcs)
            else:
                semtypes[cui].update(stypes)
                sources[cui].update(srcs)
        key = (p.subject_cui, p.predicate, p.object_cui)
        entry = edge_acc.get(key)
        if entry is None:
            edge_acc[key] = (probability, {p.pmid}, {p.id})
        else:
            confidence, pmids, ids = entry
            pmids.add(p.pmid)
            ids.add(p.id)
            if probability > confidence:
                edge_acc[key] = (probability, pmids, ids)

    nodes = {cui: Node(cui=cui, name=names[cui],
                       semtypes=frozenset(semtypes[cui]),
                       sources=frozenset(sources[cui]),
                       is_supplement=supplement_source in sources[cui])
             for cui in names}
    edges = {key: Edge(subject_cui=key[0], predicate=key[1], object_cui=key[2],
                       confidence=confidence, support=len(ids),
                       pmids=frozenset(pmids), predication_ids=frozenset(ids))
             for key, (confidence, pmids, ids) in edge_acc.items()}
    return Graph.from_parts(supplement_source, nodes, edges)


def merge_graphs(a: Graph, b: Graph) -> Graph:
    """Union two graphs. Node names from ``a`` win on conflict (logged);
    coincident edges take the max confidence and the union of their evidence.

    Edges lacking predication ids on either side (for example hand-written
    documents) keep the larger of the two supports, which keeps the merge
    idempotent.
    """
    if b.supplement_source and b.supplement_source != a.supplement_source:
        log.info("merge: keeping supplement source %r over %r",
                 a.supplement_source, b.supplement_source)
    nodes: dict[str, Node] = {}
    for cui in a.nodes.keys() | b.nodes.keys():
        na, nb = a.nodes.get(cui), b.nodes.get(cui)
        if na is None:
            base = nb
            semtypes, sources = nb.semtypes, nb.sources
        elif nb is None:
            base = na
            semtypes, sources = na.semtypes, na.sources
        else:
            if na.name != nb.name:
                log.info("merge: node %s keeps name %r over %r", cui, na.name,
                         nb.name)
            base = na
            semtypes = na.semtypes | nb.semtypes
            sources = na.sources | nb.sources
        nodes[cui] = Node(cui=cui, name=base.name, semtypes=semtypes,
                          sources=sources,
                          is_supplement=a.supplement_source in sources)
    edges: dict[EdgeKey, Edge] = {}
    for key in a.edges.keys() | b.edges.keys():
        ea, eb = a.edges.get(key), b.edges.get(key)
        if ea is None or eb is None:
            edges[key] = ea or eb
            continue
        ids = ea.predication_ids | eb.predication_ids
        if ea.predication_ids and eb.predication_ids:
            support = len(ids)
        else:
            support = max(ea.support, eb.support)
        edges[key] = Edge(subject_cui=key[0], predicate=key[1], object_cui=key[2],
                          confidence=max(ea.confidence, eb.confidence),
                          support=support, pmids=ea.pmids | eb.pmids,
                          predication_ids=ids)
    return Graph.from_parts(a.supplement_source, nodes, edges)


@dataclass(frozen=True)
class GraphStats:
    node_count: int
    edge_count: int
    supplement_node_count: int
    predicate_histogram: dict[str, int]

    @property
    def summary(self) -> str:
        return f"{self.node_count:,} nodes, {self.edge_count:,} edges"


def graph_stats(g: Graph, supplement_source: str | None = None) -> GraphStats:
    """Node/edge counts, supplement-node count, and an edge-level predicate
    histogram (ordered by count, ties alphabetical)."""
    source = g.supplement_source if supplement_source is None else supplement_source
    supplement_nodes = sum(1 for node in g.nodes.values()
                           if source in node.sources)
    histogram = Counter(key[1] for key in g.edges)
    ordered = dict(sorted(histogram.items(), key=lambda kv: (-kv[1], kv[0])))
    return GraphStats(node_count=len(g.nodes), edge_count=len(g.edges),
                      supplement_node_count=supplement_nodes,
                      predicate_histogram=ordered)


@dataclass(frozen=True)
class PredicateShare:
    predicate: str
    count: int
    percent: float


def predicate_distribution(
        source: Graph | Iterable[Predication | str]) -> list[PredicateShare]:
    """Predicate counts and 2-decimal percentages over predications.

    Accepts a graph (edge supports recover the underlying predication counts),
    predication objects, or bare predicate strings.  Rows are ordered by
    descending count, ties alphabetical.
    """
    counts: Counter[str] = Counter()
    if isinstance(source, Graph):
        for key, edge in source.edges.items():
            counts[key[1]] += edge.support
    else:
        for item in source:
            counts[item if isinstance(item, str) else item.predicate] += 1
    total = sum(counts.values())
    if not total:
        return []
    rows = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [PredicateShare(predicate, count, round(100.0 * count / total, 2))
            for predicate, count in rows]


def serialize(g: Graph) -> bytes:
    """Canonical UTF-8 document: nodes sorted by cui, edges by key, stable keys."""
    doc = {
        "version": DOCUMENT_VERSION,
        "supplement_source": g.supplement_source,
        "nodes": [{
            "cui": node.cui,
            "name": node.name,
            "semtypes": sorted(node.semtypes),
            "sources": sorted(node.sources),
            "is_supplement": node.is_supplement,
        } for node in (g.nodes[cui] for cui in sorted(g.nodes))],
        "edges": [{
            "subject": edge.subject_cui,
            "predicate": edge.predicate,
            "object": edge.object_cui,
            "confidence": edge.confidence,
            "support": edge.support,
            "pmids": sorted(edge.pmids),
            "predications": sorted(edge.predication_ids),
        } for edge in (g.edges[key] for key in sorted(g.edges))],
    }
    return (json.dumps(doc, ensure_ascii=False, sort_keys=True,
                       separators=(",", ":")) + "\n").encode("utf-8")


def _require(mapping, key, kinds, path):
    if not isinstance(mapping, dict):
        raise GraphDocumentError("expected an object", path)
    if key not in mapping:
        raise GraphDocumentError(f"missing field {key!r}", path)
    value = mapping[key]
    # bool is an int subclass; only accept it where bool is asked for
    valid = isinstance(value, kinds) and not (
        isinstance(value, bool) and kinds is not bool)
    if not valid:
        raise GraphDocumentError(f"field {key!r} has the wrong type",
                                 f"{path}.{key}")
    return value


def _string_set(value, path) -> frozenset[str]:
    if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
        raise GraphDocumentError("expected an array of strings", path)
    return frozenset(value)


def deserialize(data: bytes | str) -> Graph:
    """Parse and validate a graph document; errors name the offending element."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise GraphDocumentError(f"not valid JSON: {exc}", "$") from None
    if not isinstance(doc, dict):
        raise GraphDocumentError("top level must be an object", "$")
    version = _require(doc, "version", int, "$")
    if version != DOCUMENT_VERSION:
        raise GraphDocumentError(f"unsupported version {version}", "$.version")
    supplement_source = _require(doc, "supplement_source", str, "$")
    raw_nodes = _require(doc, "nodes", list, "$")
    raw_edges = _require(doc, "edges", list, "$")

    nodes: dict[str, Node] = {}
    for i, item in enumerate(raw_nodes):
        path = f"$.nodes[{i}]"
        cui = _require(item, "cui", str, path)
        if cui in nodes:
            raise GraphDocumentError(f"duplicate cui {cui!r}", f"{path}.cui")
        name = _require(item, "name", str, path)
        if not name:
            raise GraphDocumentError("name must be non-empty", f"{path}.name")
        nodes[cui] = Node(
            cui=cui, name=name,
            semtypes=_string_set(_require(item, "semtypes", list, path),
                                 f"{path}.semtypes"),
            sources=_string_set(_require(item, "sources", list, path),
                                f"{path}.sources"),
            is_supplement=_require(item, "is_supplement", bool, path))

    edges: dict[EdgeKey, Edge] = {}
    for i, item in enumerate(raw_edges):
        path = f"$.edges[{i}]"
        subject = _require(item, "subject", str, path)
        predicate = _require(item, "predicate", str, path)
        obj = _require(item, "object", str, path)
        if subject not in nodes:
            raise GraphDocumentError(f"unknown node {subject!r}", f"{path}.subject")
        if obj not in nodes:
            raise GraphDocumentError(f"unknown node {obj!r}", f"{path}.object")
        key = (subject, predicate, obj)
        if key in edges:
            raise GraphDocumentError(f"duplicate edge {key}", path)
        confidence = _require(item, "confidence", (int, float), path)
        if not 0.0 <= confidence <= 1.0:
            raise GraphDocumentError("confidence outside [0, 1]",
                                     f"{path}.confidence")
        support = _require(item, "support", int, path)
        if support < 1:
            raise GraphDocumentError("support must be positive", f"{path}.support")
        pmids = _string_set(_require(item, "pmids", list, path), f"{path}.pmids")
        if "predications" in item:
            ids = _string_set(item["predications"], f"{path}.predications")
            if ids and support != len(ids):
                raise GraphDocumentError(
                    "support disagrees with predication ids", f"{path}.support")
        else:
            ids = frozenset()
        edges[key] = Edge(subject_cui=subject, predicate=predicate, object_cui=obj,
                          confidence=float(confidence), support=support,
                          pmids=pmids, predication_ids=ids)
    return Graph.from_parts(supplement_source, nodes, edges)
