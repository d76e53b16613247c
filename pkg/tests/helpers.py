"""Shared fixture builders and independent oracles for the test suite."""

from __future__ import annotations

import io
import itertools
import random

from suppmine.kgraph import Edge, Graph, Node
from suppmine.patterns import DIRECTION_FORWARD, PatternSpec
from suppmine.predications import PREDICATION_COLUMNS, Predication
from suppmine.vocab import PREDICATES

PREDICATE_LIST = sorted(PREDICATES)


def conso_line(cui, term, sab="SRC1", tty="PT", ispref="N", code="X1",
               lat="ENG", n_fields=19):
    fields = [""] * n_fields
    fields[0], fields[1], fields[6] = cui, lat, ispref
    fields[11], fields[12], fields[13], fields[14] = sab, tty, code, term
    return "|".join(fields)


def sty_line(cui, tui, n_fields=7):
    fields = [""] * n_fields
    fields[0], fields[1] = cui, tui
    return "|".join(fields)


def rank_line(rank, sab, tty, suppress="N", n_fields=5):
    fields = [""] * n_fields
    fields[0], fields[1], fields[2], fields[3] = rank, sab, tty, suppress
    return "|".join(fields)


def as_stream(lines) -> io.BytesIO:
    text = "\n".join(lines) + ("\n" if lines else "")
    return io.BytesIO(text.encode("utf-8"))


def make_predication(pid, subject="C0000001", predicate="TREATS",
                     obj="C0000002", pmid="100", sentence="a sentence.",
                     subject_name="thing a", object_name="thing b",
                     subject_semtypes=("phsu",), object_semtypes=("dsyn",),
                     subject_sources=("MSH",), object_sources=("MSH",)):
    return Predication(
        id=pid, pmid=pmid, sentence=sentence,
        subject_cui=subject, subject_name=subject_name,
        subject_semtypes=frozenset(subject_semtypes),
        subject_sources=frozenset(subject_sources),
        predicate=predicate,
        object_cui=obj, object_name=object_name,
        object_semtypes=frozenset(object_semtypes),
        object_sources=frozenset(object_sources))


def predications_tsv(rows) -> bytes:
    """rows: iterables of 12 raw column values, or raw pre-joined lines."""
    lines = ["\t".join(PREDICATION_COLUMNS)]
    for row in rows:
        lines.append(row if isinstance(row, str) else "\t".join(row))
    return ("\n".join(lines) + "\n").encode("utf-8")


def predication_row(pid, pmid="100", sentence="some sentence.",
                    subject="C0000001", subject_name="a",
                    subject_semtypes="phsu", subject_sources="MSH",
                    predicate="TREATS", obj="C0000002", object_name="b",
                    object_semtypes="dsyn", object_sources="MSH"):
    return (pid, pmid, sentence, subject, subject_name, subject_semtypes,
            subject_sources, predicate, obj, object_name, object_semtypes,
            object_sources)


SEMTYPE_POOL = ("phsu", "gngm", "aapp", "celf", "moft", "biof", "dsyn",
                "orch", "cell", "topp")


def random_graph(rng: random.Random, max_nodes=200, max_edges=2000,
                 supplement_source="SUPP") -> Graph:
    """A random graph with semtypes/sources drawn to exercise the shipped
    patterns: some supplement nodes, some gene-ish, some function-ish."""
    n_nodes = rng.randint(2, max_nodes)
    n_edges = rng.randint(0, min(max_edges, n_nodes * (n_nodes - 1)))
    nodes = {}
    for i in range(n_nodes):
        cui = f"C{i:07d}"
        semtypes = frozenset(rng.sample(SEMTYPE_POOL,
                                        k=rng.randint(1, 3)))
        is_supp = rng.random() < 0.3
        sources = frozenset({supplement_source} if is_supp else {"MSH"})
        nodes[cui] = Node(cui=cui, name=f"concept {i}", semtypes=semtypes,
                          sources=sources, is_supplement=is_supp)
    cuis = sorted(nodes)
    edges = {}
    attempts = 0
    while len(edges) < n_edges and attempts < n_edges * 4:
        attempts += 1
        subject = rng.choice(cuis)
        obj = rng.choice(cuis)
        if subject == obj:
            continue
        predicate = rng.choice(PREDICATE_LIST)
        key = (subject, predicate, obj)
        if key in edges:
            continue
        edges[key] = Edge(subject_cui=subject, predicate=predicate,
                          object_cui=obj,
                          confidence=round(rng.random(), 3), support=1,
                          pmids=frozenset({str(rng.randint(1, 99999))}),
                          predication_ids=frozenset({f"p{len(edges)}"}))
    return Graph.from_parts(supplement_source, nodes, edges)


def brute_force_pathways(g: Graph, pattern: PatternSpec):
    """Exhaustive pattern-match oracle that never touches the adjacency index.

    Filters the full edge list per slot, then extends partial chains by
    scanning those lists; returns the set of (node_cuis, edge_refs) pairs.
    """
    slot_edges = []
    for slot in pattern.edges:
        matching = [key for key in g.edges if key[1] in slot.predicates]
        slot_edges.append(matching)

    found = set()

    def matches(constraint, cui):
        node = g.nodes[cui]
        if constraint.semtypes is not None and not (constraint.semtypes
                                                    & node.semtypes):
            return False
        if (constraint.require_supplement is not None
                and node.is_supplement != constraint.require_supplement):
            return False
        if constraint.cui_allow is not None and cui not in constraint.cui_allow:
            return False
        if constraint.cui_deny is not None and cui in constraint.cui_deny:
            return False
        return True

    def walk(chain_nodes, chain_edges):
        depth = len(chain_edges)
        if depth == len(pattern.edges):
            found.add((tuple(chain_nodes), tuple(chain_edges)))
            return
        slot = pattern.edges[depth]
        tail = chain_nodes[-1]
        for key in slot_edges[depth]:
            if slot.direction == DIRECTION_FORWARD:
                here, there = key[0], key[2]
            else:
                here, there = key[2], key[0]
            if here != tail or there in chain_nodes:
                continue
            if not matches(pattern.nodes[depth + 1], there):
                continue
            walk(chain_nodes + [there], chain_edges + [key])

    for cui in g.nodes:
        if matches(pattern.nodes[0], cui):
            walk([cui], [])
    return found
