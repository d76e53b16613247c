"""Pipe-delimited terminology tables: parsing, supplement merging, round-trip emission.

The tables are modelled as ordered lists of raw field lists so that emitting an
unmodified table reproduces the input byte for byte.  Only the handful of
column positions the pipeline consumes are interpreted; everything else rides
along opaquely.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Mapping

from .errors import SuppmineError

log = logging.getLogger(__name__)

CUI_PATTERN = re.compile(r"^C(\d{7})$")
MAX_CUI_NUMBER = 9_999_999

#: Semantic-type identifier for Pharmacologic Substance (phsu) in the standard
#: semantic-network table.  Default type attached to merged supplement
#: concepts; override per call or via the command line.
PHARMACOLOGIC_SUBSTANCE_TUI = "T121"

# Consumed column positions.  MRCONSO additionally carries TS/LUI/STT/... in
# between; those stay untouched raw strings.
MRCONSO_CUI, MRCONSO_LAT, MRCONSO_ISPREF = 0, 1, 6
MRCONSO_SAB, MRCONSO_TTY, MRCONSO_CODE, MRCONSO_STR = 11, 12, 13, 14
MRSTY_CUI, MRSTY_TUI = 0, 1
MRRANK_RANK, MRRANK_SAB, MRRANK_TTY, MRRANK_SUPPRESS = 0, 1, 2, 3
MRSAB_RSAB, MRSAB_SON = 3, 4

# Field counts used when a table has no rows to copy a layout from.  The
# standard layouts end each row with a pipe, so the split form carries one
# trailing empty field.
DEFAULT_FIELD_COUNTS = {"MRCONSO": 19, "MRSTY": 7, "MRRANK": 5, "MRSAB": 26}
MIN_FIELD_COUNTS = {"MRCONSO": 15, "MRSTY": 2, "MRRANK": 4, "MRSAB": 5}

SUPPLEMENT_COLUMNS = ("supplement_id", "term", "term_type", "is_preferred",
                      "linked_cui", "source")


class RrfFormatError(SuppmineError):
    """A malformed row or file-level defect, with a 1-based line number."""

    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number


class TerminologyError(SuppmineError):
    """Merge or emission failure: broken references, exhausted identifiers."""


def _read_text(stream) -> str:
    data = stream.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


@dataclass(frozen=True)
class Atom:
    """One surface form of a concept in one source vocabulary."""

    term: str
    source: str
    term_type: str
    source_code: str
    language: str = "ENG"

    def __post_init__(self):
        if not self.term:
            raise ValueError("atom term must be non-empty")
        if not self.source:
            raise ValueError("atom source must be non-empty")


@dataclass
class ConceptRecord:
    """A concept: an identifier, its atoms, and its semantic types."""

    cui: str
    atoms: list[Atom]
    preferred_atom: int
    semantic_types: set[str] = field(default_factory=set)
    link: str | None = None

    def __post_init__(self):
        if not CUI_PATTERN.match(self.cui):
            raise ValueError(f"bad concept identifier {self.cui!r}")
        if not self.atoms:
            raise ValueError(f"concept {self.cui} has no atoms")
        if not 0 <= self.preferred_atom < len(self.atoms):
            raise ValueError(f"concept {self.cui}: preferred atom index out of range")


@dataclass(frozen=True)
class SourceRanking:
    """Source/term-type precedence, highest first."""

    ranked: tuple[tuple[str, str], ...]

    def __post_init__(self):
        if len(set(self.ranked)) != len(self.ranked):
            raise ValueError("duplicate (source, term_type) pair in ranking")

    def precedence(self, source: str, term_type: str) -> int:
        """Position in the ranking; unknown pairs sort after every known one."""
        try:
            return self.ranked.index((source, term_type))
        except ValueError:
            return len(self.ranked)


@dataclass
class MergeReport:
    new_concepts: int
    linked_concepts: int
    atoms_added: int
    cuis_allocated: list[tuple[str, str]]

    def __post_init__(self):
        if min(self.new_concepts, self.linked_concepts, self.atoms_added) < 0:
            raise ValueError("merge report counts must be non-negative")
        if self.new_concepts != len(self.cuis_allocated):
            raise ValueError("new-concept count disagrees with allocation list")


@dataclass
class RrfTable:
    """One pipe-delimited table held as raw field lists.

    ``text()`` reproduces the parsed input exactly, including the presence or
    absence of a final newline.
    """

    name: str
    rows: list[list[str]]
    trailing_newline: bool = True
    field_count: int | None = None

    @classmethod
    def parse(cls, stream, name: str, dedupe_rows: bool = False) -> "RrfTable":
        content = _read_text(stream)
        if content == "":
            return cls(name, [], True, None)
        lines = content.split("\n")
        trailing = lines[-1] == ""
        if trailing:
            lines.pop()
        rows: list[list[str]] = []
        seen: set[str] | None = set() if dedupe_rows else None
        minimum = MIN_FIELD_COUNTS.get(name, 1)
        count: int | None = None
        for lineno, line in enumerate(lines, 1):
            fields = line.split("|")
            if count is None:
                if len(fields) < minimum:
                    raise RrfFormatError(
                        f"{name} line {lineno}: expected at least {minimum} fields, "
                        f"got {len(fields)}", lineno)
                count = len(fields)
            elif len(fields) != count:
                raise RrfFormatError(
                    f"{name} line {lineno}: expected {count} fields, got {len(fields)}",
                    lineno)
            if seen is not None:
                if line in seen:
                    log.warning("%s line %d: duplicate row dropped", name, lineno)
                    continue
                seen.add(line)
            rows.append(fields)
        return cls(name, rows, trailing, count)

    def text(self) -> str:
        if not self.rows:
            return ""
        body = "\n".join("|".join(row) for row in self.rows)
        return body + ("\n" if self.trailing_newline else "")

    def write(self, stream: BinaryIO) -> int:
        data = self.text().encode("utf-8")
        stream.write(data)
        return len(data)

    def effective_field_count(self) -> int:
        return self.field_count or DEFAULT_FIELD_COUNTS.get(self.name, 2)

    def copy(self) -> "RrfTable":
        return RrfTable(self.name, [list(r) for r in self.rows],
                        self.trailing_newline, self.field_count)


def concepts_from_table(table: RrfTable) -> list[ConceptRecord]:
    """Group MRCONSO rows into concept records, preserving first-seen order.

    The preferred atom is the first row of the concept whose ISPREF field is
    "Y"; a concept with no such row falls back to its first atom.
    """
    order: dict[str, ConceptRecord] = {}
    preferred_seen: set[str] = set()
    for lineno, row in enumerate(table.rows, 1):
        cui = row[MRCONSO_CUI]
        if not CUI_PATTERN.match(cui):
            raise RrfFormatError(f"MRCONSO line {lineno}: bad CUI {cui!r}", lineno)
        if not row[MRCONSO_STR]:
            raise RrfFormatError(f"MRCONSO line {lineno}: empty term string", lineno)
        if not row[MRCONSO_SAB]:
            raise RrfFormatError(f"MRCONSO line {lineno}: empty source", lineno)
        atom = Atom(term=row[MRCONSO_STR], source=row[MRCONSO_SAB],
                    term_type=row[MRCONSO_TTY], source_code=row[MRCONSO_CODE],
                    language=row[MRCONSO_LAT])
        record = order.get(cui)
        if record is None:
            record = ConceptRecord(cui=cui, atoms=[atom], preferred_atom=0)
            order[cui] = record
        else:
            record.atoms.append(atom)
        if cui not in preferred_seen and row[MRCONSO_ISPREF] == "Y":
            record.preferred_atom = len(record.atoms) - 1
            preferred_seen.add(cui)
    return list(order.values())


def parse_mrconso(stream) -> list[ConceptRecord]:
    """Parse an MRCONSO-layout stream into concept records."""
    return concepts_from_table(RrfTable.parse(stream, "MRCONSO", dedupe_rows=True))


def parse_mrsty(stream) -> dict[str, set[str]]:
    """Parse an MRSTY-layout stream into a CUI -> semantic types multimap."""
    table = RrfTable.parse(stream, "MRSTY")
    mapping: dict[str, set[str]] = {}
    for lineno, row in enumerate(table.rows, 1):
        cui, tui = row[MRSTY_CUI], row[MRSTY_TUI]
        if not cui or not tui:
            raise RrfFormatError(f"MRSTY line {lineno}: empty CUI or TUI", lineno)
        mapping.setdefault(cui, set()).add(tui)
    return mapping


def parse_mrrank(stream) -> SourceRanking:
    """Parse an MRRANK-layout stream; higher numeric rank means higher precedence."""
    table = RrfTable.parse(stream, "MRRANK")
    entries: list[tuple[int, int, str, str]] = []
    seen: set[tuple[str, str]] = set()
    for lineno, row in enumerate(table.rows, 1):
        try:
            rank = int(row[MRRANK_RANK])
        except ValueError:
            raise RrfFormatError(
                f"MRRANK line {lineno}: non-numeric rank {row[MRRANK_RANK]!r}",
                lineno) from None
        pair = (row[MRRANK_SAB], row[MRRANK_TTY])
        if pair in seen:
            raise RrfFormatError(
                f"MRRANK line {lineno}: duplicate entry for {pair[0]}/{pair[1]}",
                lineno)
        seen.add(pair)
        entries.append((-rank, lineno, pair[0], pair[1]))
    entries.sort()
    return SourceRanking(tuple((sab, tty) for _, _, sab, tty in entries))


@dataclass
class SupplementAtom:
    term: str
    term_type: str
    is_preferred: bool
    source: str


@dataclass
class SupplementConcept:
    """One supplement-vocabulary concept awaiting merge."""

    id: str
    atoms: list[SupplementAtom]
    linked_cui: str | None = None


def parse_supplement(stream) -> list[SupplementConcept]:
    """Parse the supplement vocabulary TSV (one row per atom).

    Columns: supplement_id, term, term_type, is_preferred (0/1), linked_cui
    (empty when unlinked), source.  Rows sharing a supplement_id form one
    concept and must agree on linked_cui.
    """
    content = _read_text(stream)
    lines = content.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        return []
    header = lines[0].split("\t")
    indexes = {}
    for column in SUPPLEMENT_COLUMNS:
        if column not in header:
            raise RrfFormatError(f"supplement file: missing column {column!r}", 1)
        indexes[column] = header.index(column)
    concepts: dict[str, SupplementConcept] = {}
    for lineno, line in enumerate(lines[1:], 2):
        fields = line.split("\t")
        if len(fields) != len(header):
            raise RrfFormatError(
                f"supplement line {lineno}: expected {len(header)} fields, "
                f"got {len(fields)}", lineno)
        sid = fields[indexes["supplement_id"]]
        if not sid:
            raise RrfFormatError(f"supplement line {lineno}: empty supplement_id", lineno)
        flag = fields[indexes["is_preferred"]]
        if flag not in ("0", "1"):
            raise RrfFormatError(
                f"supplement line {lineno}: is_preferred must be 0 or 1, got {flag!r}",
                lineno)
        linked = fields[indexes["linked_cui"]] or None
        if linked and not CUI_PATTERN.match(linked):
            raise RrfFormatError(
                f"supplement line {lineno}: bad linked_cui {linked!r}", lineno)
        atom = SupplementAtom(term=fields[indexes["term"]],
                              term_type=fields[indexes["term_type"]],
                              is_preferred=flag == "1",
                              source=fields[indexes["source"]])
        if not atom.term or not atom.source:
            raise RrfFormatError(
                f"supplement line {lineno}: term and source must be non-empty", lineno)
        concept = concepts.get(sid)
        if concept is None:
            concepts[sid] = SupplementConcept(id=sid, atoms=[atom], linked_cui=linked)
        else:
            if linked != concept.linked_cui:
                raise RrfFormatError(
                    f"supplement line {lineno}: concept {sid} has conflicting "
                    f"linked_cui values", lineno)
            concept.atoms.append(atom)
    return list(concepts.values())


@dataclass
class RrfSet:
    """The four terminology tables moved through a merge as one unit."""

    mrconso: RrfTable
    mrsty: RrfTable
    mrrank: RrfTable
    mrsab: RrfTable

    @classmethod
    def empty(cls) -> "RrfSet":
        return cls(RrfTable("MRCONSO", []), RrfTable("MRSTY", []),
                   RrfTable("MRRANK", []), RrfTable("MRSAB", []))

    @classmethod
    def from_streams(cls, streams: Mapping[str, BinaryIO]) -> "RrfSet":
        tables = {}
        for name in ("MRCONSO", "MRSTY", "MRRANK", "MRSAB"):
            if name in streams:
                dedupe = name == "MRCONSO"
                tables[name] = RrfTable.parse(streams[name], name, dedupe_rows=dedupe)
            else:
                tables[name] = RrfTable(name, [])
        return cls(tables["MRCONSO"], tables["MRSTY"], tables["MRRANK"],
                   tables["MRSAB"])

    def tables(self) -> dict[str, RrfTable]:
        return {"MRCONSO": self.mrconso, "MRSTY": self.mrsty,
                "MRRANK": self.mrrank, "MRSAB": self.mrsab}

    def copy(self) -> "RrfSet":
        return RrfSet(self.mrconso.copy(), self.mrsty.copy(),
                      self.mrrank.copy(), self.mrsab.copy())

    def cuis(self) -> set[str]:
        out = {row[MRCONSO_CUI] for row in self.mrconso.rows}
        out.update(row[MRSTY_CUI] for row in self.mrsty.rows)
        return out


def load_rrf_dir(path: str | Path) -> RrfSet:
    """Load MRCONSO/MRSTY/MRRANK/MRSAB .RRF files from a directory.

    Missing files are treated as empty tables.
    """
    base = Path(path)
    streams = {}
    opened = []
    try:
        for name in ("MRCONSO", "MRSTY", "MRRANK", "MRSAB"):
            file = base / f"{name}.RRF"
            if file.exists():
                handle = open(file, "rb")
                opened.append(handle)
                streams[name] = handle
        return RrfSet.from_streams(streams)
    finally:
        for handle in opened:
            handle.close()


def write_rrf_dir(rrf: RrfSet, path: str | Path,
                  skip_empty: bool = True) -> dict[str, int]:
    """Write the tables under a directory; returns bytes written per table."""
    base = Path(path)
    base.mkdir(parents=True, exist_ok=True)
    counts = {}
    for name, table in rrf.tables().items():
        if skip_empty and not table.rows:
            continue
        with open(base / f"{name}.RRF", "wb") as handle:
            counts[name] = table.write(handle)
    return counts


def allocate_cuis(new_concepts: list[SupplementConcept],
                  existing: set[str]) -> list[tuple[str, str]]:
    """Assign sequential concept identifiers after the highest existing one.

    ``new_concepts`` must already be sorted by supplement id; allocation is
    deterministic and collision-free against ``existing``.
    """
    highest = 0
    for cui in existing:
        match = CUI_PATTERN.match(cui)
        if match:
            highest = max(highest, int(match.group(1)))
    if highest + len(new_concepts) > MAX_CUI_NUMBER:
        raise TerminologyError(
            f"cannot allocate {len(new_concepts)} identifiers above C{highest:07d}: "
            f"identifier space ends at C{MAX_CUI_NUMBER}")
    return [(concept.id, f"C{highest + offset:07d}")
            for offset, concept in enumerate(new_concepts, 1)]


def _pick_preferred(concept: SupplementConcept, ranking: SourceRanking) -> int:
    for index, atom in enumerate(concept.atoms):
        if atom.is_preferred:
            return index
    if ranking.ranked:
        return min(range(len(concept.atoms)),
                   key=lambda i: (ranking.precedence(concept.atoms[i].source,
                                                     concept.atoms[i].term_type), i))
    return 0


def merge_terminology(base: RrfSet, supplement: list[SupplementConcept],
                      ranking: SourceRanking,
                      default_tui: str = PHARMACOLOGIC_SUBSTANCE_TUI,
                      ) -> tuple[RrfSet, MergeReport]:
    """Fold supplement concepts into the base tables.

    Unlinked concepts receive freshly allocated identifiers and keep their own
    preferred atom; linked concepts contribute atoms under the existing
    identifier without disturbing its preferred term.  Every touched concept
    is guaranteed a ``default_tui`` semantic-type row, and the source
    ranking's vocabularies gain MRRANK/MRSAB entries.
    """
    merged = base.copy()
    ordered = sorted(supplement, key=lambda concept: concept.id)
    mrconso_cuis = {row[MRCONSO_CUI] for row in merged.mrconso.rows}

    for concept in ordered:
        if concept.linked_cui and concept.linked_cui not in mrconso_cuis:
            raise TerminologyError(
                f"concept {concept.id} links to {concept.linked_cui}, "
                f"which is not in the base tables")

    unlinked = [c for c in ordered if c.linked_cui is None]
    allocated = allocate_cuis(unlinked, base.cuis())
    cui_for = dict(allocated)

    atom_triples = {(row[MRCONSO_CUI], row[MRCONSO_SAB], row[MRCONSO_STR])
                    for row in merged.mrconso.rows}
    sty_pairs = {(row[MRSTY_CUI], row[MRSTY_TUI]) for row in merged.mrsty.rows}

    conso_width = merged.mrconso.effective_field_count()
    sty_width = merged.mrsty.effective_field_count()
    new_conso: list[tuple[str, list[str]]] = []
    new_sty: list[tuple[str, list[str]]] = []
    atoms_added = 0

    for concept in ordered:
        linked = concept.linked_cui is not None
        cui = concept.linked_cui if linked else cui_for[concept.id]
        preferred = None if linked else _pick_preferred(concept, ranking)
        for index, atom in enumerate(concept.atoms):
            triple = (cui, atom.source, atom.term)
            if triple in atom_triples:
                log.warning("concept %s: atom %r from %s already present under %s; "
                            "skipped", concept.id, atom.term, atom.source, cui)
                continue
            atom_triples.add(triple)
            row = [""] * conso_width
            row[MRCONSO_CUI] = cui
            row[MRCONSO_LAT] = "ENG"
            row[MRCONSO_ISPREF] = "Y" if index == preferred else "N"
            row[MRCONSO_SAB] = atom.source
            row[MRCONSO_TTY] = atom.term_type
            row[MRCONSO_CODE] = concept.id
            row[MRCONSO_STR] = atom.term
            new_conso.append((cui, row))
            atoms_added += 1
        if (cui, default_tui) not in sty_pairs:
            sty_pairs.add((cui, default_tui))
            row = [""] * sty_width
            row[MRSTY_CUI] = cui
            row[MRSTY_TUI] = default_tui
            new_sty.append((cui, row))

    new_conso.sort(key=lambda item: item[0])
    new_sty.sort(key=lambda item: item[0])
    merged.mrconso.rows.extend(row for _, row in new_conso)
    merged.mrsty.rows.extend(row for _, row in new_sty)
    if merged.mrconso.field_count is None and new_conso:
        merged.mrconso.field_count = conso_width
    if merged.mrsty.field_count is None and new_sty:
        merged.mrsty.field_count = sty_width

    _extend_rank_table(merged.mrrank, ranking)
    sources = {atom.source for concept in ordered for atom in concept.atoms}
    sources.update(sab for sab, _ in ranking.ranked)
    _extend_sab_table(merged.mrsab, sources)

    report = MergeReport(new_concepts=len(unlinked),
                         linked_concepts=len(ordered) - len(unlinked),
                         atoms_added=atoms_added,
                         cuis_allocated=allocated)
    return merged, report


def _extend_rank_table(table: RrfTable, ranking: SourceRanking) -> None:
    present = {(row[MRRANK_SAB], row[MRRANK_TTY]) for row in table.rows}
    missing = [pair for pair in ranking.ranked if pair not in present]
    if not missing:
        return
    if table.rows:
        lowest = min(int(row[MRRANK_RANK]) for row in table.rows)
        width = max(4, max(len(row[MRRANK_RANK]) for row in table.rows))
    else:
        lowest, width = 10_000, 4
    if lowest - len(missing) < 0:
        raise TerminologyError("no rank values left below the existing minimum")
    field_count = table.effective_field_count()
    # new sources rank below every existing vocabulary, preserving their own order
    for offset, (sab, tty) in enumerate(missing, 1):
        row = [""] * field_count
        row[MRRANK_RANK] = str(lowest - offset).zfill(width)
        row[MRRANK_SAB] = sab
        row[MRRANK_TTY] = tty
        row[MRRANK_SUPPRESS] = "N"
        table.rows.append(row)
    if table.field_count is None:
        table.field_count = field_count


def _extend_sab_table(table: RrfTable, sources: set[str]) -> None:
    present = {row[MRSAB_RSAB] for row in table.rows}
    field_count = table.effective_field_count()
    added = False
    for source in sorted(sources - present):
        row = [""] * field_count
        row[MRSAB_RSAB] = source
        row[MRSAB_SON] = source
        table.rows.append(row)
        added = True
    if table.field_count is None and added:
        table.field_count = field_count


def emit_rrf(rrf: RrfSet, streams: Mapping[str, BinaryIO]) -> dict[str, int]:
    """Write tables to the given streams after a consistency check.

    Every MRSTY concept must exist in MRCONSO.  Returns bytes written per
    table name.
    """
    conso_cuis = {row[MRCONSO_CUI] for row in rrf.mrconso.rows}
    for lineno, row in enumerate(rrf.mrsty.rows, 1):
        if row[MRSTY_CUI] not in conso_cuis:
            raise TerminologyError(
                f"MRSTY row {lineno} references {row[MRSTY_CUI]}, "
                f"which has no MRCONSO entry")
    written = {}
    tables = rrf.tables()
    for name, stream in streams.items():
        if name not in tables:
            raise TerminologyError(f"unknown table name {name!r}")
        written[name] = tables[name].write(stream)
    return written
