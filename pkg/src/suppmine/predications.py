"""Semantic predication ingestion: TSV parsing, validation, dedup, comparison."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import SuppmineError
from .vocab import PREDICATES

PREDICATION_COLUMNS = (
    "id", "pmid", "sentence",
    "subject_cui", "subject_name", "subject_semtypes", "subject_sources",
    "predicate",
    "object_cui", "object_name", "object_semtypes", "object_sources",
)

REJECT_COLUMNS = ("line_number", "reason_code", "raw_row")

# Reject reason codes, one per validation rule.
REASON_FIELD_COUNT = "bad-field-count"
REASON_UNKNOWN_PREDICATE = "unknown-predicate"
REASON_MISSING_ID = "missing-id"
REASON_MISSING_SUBJECT_CUI = "missing-subject-cui"
REASON_MISSING_OBJECT_CUI = "missing-object-cui"


class PredicationFormatError(SuppmineError):
    """File-level defect: missing column or duplicate predication id."""


@dataclass(slots=True)
class Predication:
    """One extracted subject-predicate-object assertion with its provenance."""

    id: str
    pmid: str
    sentence: str
    subject_cui: str
    subject_name: str
    subject_semtypes: frozenset[str]
    subject_sources: frozenset[str]
    predicate: str
    object_cui: str
    object_name: str
    object_semtypes: frozenset[str]
    object_sources: frozenset[str]


@dataclass(slots=True)
class RejectRecord:
    line_number: int
    reason_code: str
    raw_row: str


@dataclass
class ParseResult:
    predications: list[Predication]
    rejects: list[RejectRecord]


def _read_text(stream) -> str:
    data = stream.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


def _split_set(joined: str) -> frozenset[str]:
    return frozenset(part for part in joined.split(",") if part)


def parse_predications(stream) -> ParseResult:
    """Parse the predication TSV; every data row becomes a record or a reject.

    The header must name all required columns; extra columns are ignored.
    Rows with an unknown predicate, a missing identifier or endpoint, or the
    wrong field count are rejected with a reason code.  A repeated id is a
    hard error because downstream joins key on it.
    """
    content = _read_text(stream)
    lines = content.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise PredicationFormatError("missing column: id (empty input, no header)")
    header = lines[0].split("\t")
    indexes = {}
    for column in PREDICATION_COLUMNS:
        if column not in header:
            raise PredicationFormatError(f"missing column: {column}")
        indexes[column] = header.index(column)

    predications: list[Predication] = []
    rejects: list[RejectRecord] = []
    seen_ids: dict[str, int] = {}
    for lineno, line in enumerate(lines[1:], 2):
        fields = line.split("\t")
        if len(fields) != len(header):
            rejects.append(RejectRecord(lineno, REASON_FIELD_COUNT, line))
            continue
        pred_id = fields[indexes["id"]]
        predicate = fields[indexes["predicate"]]
        subject_cui = fields[indexes["subject_cui"]]
        object_cui = fields[indexes["object_cui"]]
        if not pred_id:
            rejects.append(RejectRecord(lineno, REASON_MISSING_ID, line))
            continue
        if predicate not in PREDICATES:
            rejects.append(RejectRecord(lineno, REASON_UNKNOWN_PREDICATE, line))
            continue
        if not subject_cui:
            rejects.append(RejectRecord(lineno, REASON_MISSING_SUBJECT_CUI, line))
            continue
        if not object_cui:
            rejects.append(RejectRecord(lineno, REASON_MISSING_OBJECT_CUI, line))
            continue
        if pred_id in seen_ids:
            raise PredicationFormatError(
                f"duplicate predication id {pred_id!r} on lines "
                f"{seen_ids[pred_id]} and {lineno}")
        seen_ids[pred_id] = lineno
        predications.append(Predication(
            id=pred_id,
            pmid=fields[indexes["pmid"]],
            sentence=fields[indexes["sentence"]],
            subject_cui=subject_cui,
            subject_name=fields[indexes["subject_name"]],
            subject_semtypes=_split_set(fields[indexes["subject_semtypes"]]),
            subject_sources=_split_set(fields[indexes["subject_sources"]]),
            predicate=predicate,
            object_cui=object_cui,
            object_name=fields[indexes["object_name"]],
            object_semtypes=_split_set(fields[indexes["object_semtypes"]]),
            object_sources=_split_set(fields[indexes["object_sources"]]),
        ))
    return ParseResult(predications, rejects)


def write_predications(predications: Iterable[Predication], stream) -> None:
    """Emit predications in the ingest TSV format; set fields sorted."""
    out = ["\t".join(PREDICATION_COLUMNS)]
    for p in predications:
        out.append("\t".join((
            p.id, p.pmid, p.sentence,
            p.subject_cui, p.subject_name,
            ",".join(sorted(p.subject_semtypes)), ",".join(sorted(p.subject_sources)),
            p.predicate,
            p.object_cui, p.object_name,
            ",".join(sorted(p.object_semtypes)), ",".join(sorted(p.object_sources)),
        )))
    data = ("\n".join(out) + "\n").encode("utf-8")
    stream.write(data)


def write_rejects(rejects: Iterable[RejectRecord], stream) -> None:
    out = ["\t".join(REJECT_COLUMNS)]
    out.extend(f"{r.line_number}\t{r.reason_code}\t{r.raw_row}" for r in rejects)
    stream.write(("\n".join(out) + "\n").encode("utf-8"))


def dedupe(predications: list[Predication]) -> list[Predication]:
    """Collapse restatements of one assertion from the same sentence.

    Two predications are duplicates when they agree on (pmid, sentence,
    subject, predicate, object); the first occurrence survives.
    """
    seen = set()
    kept = []
    for p in predications:
        key = (p.pmid, p.sentence, p.subject_cui, p.predicate, p.object_cui)
        if key in seen:
            continue
        seen.add(key)
        kept.append(p)
    return kept


@dataclass(frozen=True)
class ComparisonRow:
    """One measured quantity compared between two extraction runs."""

    label: str
    base: int
    extended: int
    difference: int
    percent: float | None

    @property
    def formatted(self) -> str:
        if self.percent is None:
            return f"{self.difference:+,} (undefined)"
        return f"{self.difference:+,} ({self.percent:+.2f}%)"


@dataclass(frozen=True)
class ComparisonTable:
    mentions: ComparisonRow
    relations: ComparisonRow

    @property
    def rows(self) -> tuple[ComparisonRow, ComparisonRow]:
        return (self.mentions, self.relations)


def _supplement_counts(predications: Iterable[Predication],
                       supplement_source: str) -> tuple[int, int]:
    mentions = 0
    relations = 0
    for p in predications:
        hits = ((supplement_source in p.subject_sources)
                + (supplement_source in p.object_sources))
        mentions += hits
        if hits:
            relations += 1
    return mentions, relations


def comparison_row(label: str, base: int, extended: int) -> ComparisonRow:
    """One comparison line: absolute change and percent change at 2 decimals.

    Percent is undefined (None) when the base count is zero and the extended
    count is not.
    """
    difference = extended - base
    if base == 0:
        percent = None if extended else 0.0
    else:
        percent = round(100.0 * difference / base, 2)
    return ComparisonRow(label, base, extended, difference, percent)


def compare_extractions(base: list[Predication], extended: list[Predication],
                        supplement_source: str) -> ComparisonTable:
    """Compare supplement-entity coverage between two extraction runs.

    An endpoint counts as a supplement mention when its sources include
    ``supplement_source``; each matching endpoint counts once per predication,
    so a relation with two supplement endpoints contributes two mentions and
    one relation.
    """
    base_mentions, base_relations = _supplement_counts(base, supplement_source)
    ext_mentions, ext_relations = _supplement_counts(extended, supplement_source)
    return ComparisonTable(
        mentions=comparison_row("ds_entity_mentions", base_mentions, ext_mentions),
        relations=comparison_row("ds_relations", base_relations, ext_relations),
    )
