import io
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from suppmine.terminology import (
    PHARMACOLOGIC_SUBSTANCE_TUI,
    RrfFormatError,
    RrfSet,
    RrfTable,
    SourceRanking,
    SupplementAtom,
    SupplementConcept,
    TerminologyError,
    allocate_cuis,
    concepts_from_table,
    emit_rrf,
    merge_terminology,
    parse_mrconso,
    parse_mrrank,
    parse_mrsty,
    parse_supplement,
)

from helpers import as_stream, conso_line, rank_line, sty_line


class TestParseMrconso:
    def test_single_row(self):
        stream = as_stream([conso_line("C0000001", "Ginkgo", ispref="Y")])
        records = parse_mrconso(stream)
        assert len(records) == 1
        assert records[0].cui == "C0000001"
        assert len(records[0].atoms) == 1
        assert records[0].atoms[0].term == "Ginkgo"
        assert records[0].preferred_atom == 0

    def test_empty_stream(self):
        assert parse_mrconso(io.BytesIO(b"")) == []

    def test_grouping_by_cui(self):
        # 3 rows of one concept, 2 of another, mixed preferred flags
        stream = as_stream([
            conso_line("C0000001", "Ginkgo", ispref="N"),
            conso_line("C0000001", "Ginkgo biloba", ispref="Y"),
            conso_line("C0000001", "Maidenhair tree", ispref="N", tty="SY"),
            conso_line("C0000007", "Garlic", ispref="Y"),
            conso_line("C0000007", "Allium sativum", ispref="N", tty="SY"),
        ])
        records = parse_mrconso(stream)
        assert [r.cui for r in records] == ["C0000001", "C0000007"]
        assert [len(r.atoms) for r in records] == [3, 2]
        assert records[0].preferred_atom == 1
        assert records[1].preferred_atom == 0

    def test_preferred_defaults_to_first_atom(self):
        stream = as_stream([
            conso_line("C0000001", "one", ispref="N"),
            conso_line("C0000001", "two", ispref="N"),
        ])
        assert parse_mrconso(stream)[0].preferred_atom == 0

    def test_wrong_field_count_reports_line(self):
        stream = as_stream([
            conso_line("C0000001", "Ginkgo"),
            "C0000002|too|short",
        ])
        with pytest.raises(RrfFormatError) as err:
            parse_mrconso(stream)
        assert err.value.line_number == 2

    def test_duplicate_row_deduplicated_with_warning(self, caplog):
        line = conso_line("C0000001", "Ginkgo", ispref="Y")
        with caplog.at_level("WARNING"):
            records = parse_mrconso(as_stream([line, line]))
        assert len(records) == 1
        assert len(records[0].atoms) == 1
        assert "duplicate row" in caplog.text


class TestParseMrsty:
    def test_single_row(self):
        assert parse_mrsty(as_stream([sty_line("C0000001", "T121")])) == {
            "C0000001": {"T121"}}

    def test_two_tuis_same_cui(self):
        mapping = parse_mrsty(as_stream([sty_line("C0000001", "T121"),
                                         sty_line("C0000001", "T109")]))
        assert mapping == {"C0000001": {"T121", "T109"}}

    def test_empty_stream(self):
        assert parse_mrsty(io.BytesIO(b"")) == {}

    def test_malformed_row_reports_line(self):
        with pytest.raises(RrfFormatError) as err:
            parse_mrsty(as_stream([sty_line("C0000001", "T121"), "lonely"]))
        assert err.value.line_number == 2


class TestParseMrrank:
    def test_sorted_by_rank_descending(self):
        ranking = parse_mrrank(as_stream([
            rank_line("0200", "SRC_B", "SY"),
            rank_line("0400", "SRC_A", "PT"),
        ]))
        assert ranking.ranked == (("SRC_A", "PT"), ("SRC_B", "SY"))

    def test_empty_stream(self):
        assert parse_mrrank(io.BytesIO(b"")).ranked == ()

    def test_duplicate_pair_rejected(self):
        with pytest.raises(RrfFormatError):
            parse_mrrank(as_stream([rank_line("0400", "SRC_A", "PT"),
                                    rank_line("0300", "SRC_A", "PT")]))

    def test_non_numeric_rank_rejected(self):
        with pytest.raises(RrfFormatError):
            parse_mrrank(as_stream([rank_line("04x0", "SRC_A", "PT")]))


class TestAllocateCuis:
    def test_increments_from_existing_maximum(self):
        concepts = [SupplementConcept("DA01", []), SupplementConcept("DA02", [])]
        allocated = allocate_cuis(concepts, {"C0970000", "C0000001"})
        assert allocated == [("DA01", "C0970001"), ("DA02", "C0970002")]

    def test_empty_input(self):
        assert allocate_cuis([], {"C0000001"}) == []

    def test_empty_existing_starts_at_one(self):
        allocated = allocate_cuis([SupplementConcept("DA01", [])], set())
        assert allocated == [("DA01", "C0000001")]

    def test_exhaustion_rejected(self):
        with pytest.raises(TerminologyError):
            allocate_cuis([SupplementConcept("DA01", [])], {"C9999999"})

    def test_strictly_increasing_and_disjoint(self):
        existing = {f"C{n:07d}" for n in (5, 17, 123)}
        concepts = [SupplementConcept(f"DA{i:02d}", []) for i in range(9)]
        allocated = [cui for _, cui in allocate_cuis(concepts, existing)]
        assert allocated == sorted(allocated)
        assert len(set(allocated)) == len(allocated)
        assert not set(allocated) & existing
        again = [cui for _, cui in allocate_cuis(concepts, existing)]
        assert allocated == again


def base_rrf() -> RrfSet:
    return RrfSet.from_streams({
        "MRCONSO": as_stream([
            conso_line("C0000001", "Ginkgo", sab="MSH", ispref="Y"),
            conso_line("C0000001", "Maidenhair", sab="MSH", tty="SY"),
            conso_line("C0000002", "Aspirin", sab="MSH", ispref="Y"),
        ]),
        "MRSTY": as_stream([sty_line("C0000001", "T109"),
                            sty_line("C0000002", "T121")]),
        "MRRANK": as_stream([rank_line("0400", "MSH", "PT"),
                             rank_line("0300", "MSH", "SY")]),
        "MRSAB": as_stream(["|".join([""] * 3 + ["MSH", "MeSH"] + [""] * 21)]),
    })


def supplement_ranking() -> SourceRanking:
    return SourceRanking((("DSLEX", "PT"), ("DSLEX", "SY")))


class TestMergeTerminology:
    def test_empty_supplement_is_identity(self):
        base = base_rrf()
        before = {name: table.text() for name, table in base.tables().items()}
        merged, report = merge_terminology(base, [], SourceRanking(()))
        after = {name: table.text() for name, table in merged.tables().items()}
        assert before == after
        assert (report.new_concepts, report.linked_concepts,
                report.atoms_added) == (0, 0, 0)
        assert report.cuis_allocated == []

    def test_unlinked_concept_gets_new_cui_and_tui(self):
        base = base_rrf()
        concept = SupplementConcept("DA01", [
            SupplementAtom("Fish oil", "PT", True, "DSLEX"),
            SupplementAtom("Omega-3 oil", "SY", False, "DSLEX"),
        ])
        merged, report = merge_terminology(base, [concept], supplement_ranking())
        assert report.new_concepts == 1
        assert report.linked_concepts == 0
        assert report.atoms_added == 2
        assert report.cuis_allocated == [("DA01", "C0000003")]
        new_rows = [r for r in merged.mrconso.rows if r[0] == "C0000003"]
        assert [r[14] for r in new_rows] == ["Fish oil", "Omega-3 oil"]
        assert [r[6] for r in new_rows] == ["Y", "N"]
        assert [r[13] for r in new_rows] == ["DA01", "DA01"]
        sty = [r for r in merged.mrsty.rows if r[0] == "C0000003"]
        assert [r[1] for r in sty] == [PHARMACOLOGIC_SUBSTANCE_TUI]

    def test_linked_concept_keeps_existing_preferred_term(self):
        base = base_rrf()
        concept = SupplementConcept("DA02", [
            SupplementAtom("Ginkgo extract", "PT", True, "DSLEX")],
            linked_cui="C0000001")
        merged, report = merge_terminology(base, [concept], supplement_ranking())
        assert report.linked_concepts == 1
        assert report.new_concepts == 0
        records = {r.cui: r for r in concepts_from_table(merged.mrconso)}
        record = records["C0000001"]
        assert record.atoms[record.preferred_atom].term == "Ginkgo"
        added = [r for r in merged.mrconso.rows
                 if r[0] == "C0000001" and r[11] == "DSLEX"]
        assert len(added) == 1 and added[0][6] == "N"

    def test_link_to_unknown_cui_rejected(self):
        concept = SupplementConcept("DA03", [
            SupplementAtom("Kava", "PT", True, "DSLEX")], linked_cui="C0009999")
        with pytest.raises(TerminologyError) as err:
            merge_terminology(base_rrf(), [concept], supplement_ranking())
        assert "DA03" in str(err.value)

    def test_duplicate_atom_skipped_with_warning(self, caplog):
        concept = SupplementConcept("DA04", [
            SupplementAtom("Ginkgo", "PT", True, "MSH")], linked_cui="C0000001")
        with caplog.at_level("WARNING"):
            merged, report = merge_terminology(base_rrf(), [concept],
                                               supplement_ranking())
        assert report.atoms_added == 0
        assert "skipped" in caplog.text

    def test_remerge_is_idempotent_on_linked_atoms(self):
        base = base_rrf()
        concept = SupplementConcept("DA05", [
            SupplementAtom("Ginkgo tea", "SY", True, "DSLEX")],
            linked_cui="C0000001")
        once, _ = merge_terminology(base, [concept], supplement_ranking())
        twice, report = merge_terminology(once, [concept], supplement_ranking())
        assert report.atoms_added == 0
        assert {n: t.text() for n, t in once.tables().items()} == \
               {n: t.text() for n, t in twice.tables().items()}

    def test_rank_and_sab_entries_added_once(self):
        base = base_rrf()
        concept = SupplementConcept("DA06", [
            SupplementAtom("Zinc citrate", "PT", True, "DSLEX")])
        merged, _ = merge_terminology(base, [concept], supplement_ranking())
        rank_pairs = [(r[1], r[2]) for r in merged.mrrank.rows]
        assert rank_pairs.count(("DSLEX", "PT")) == 1
        assert rank_pairs.count(("DSLEX", "SY")) == 1
        # new sources rank below the existing minimum
        ranks = {(r[1], r[2]): int(r[0]) for r in merged.mrrank.rows}
        assert ranks[("DSLEX", "PT")] < ranks[("MSH", "SY")]
        assert ranks[("DSLEX", "PT")] > ranks[("DSLEX", "SY")]
        sabs = [r[3] for r in merged.mrsab.rows]
        assert sabs.count("DSLEX") == 1

    def test_every_new_concept_has_one_preferred_atom(self):
        base = base_rrf()
        rng = random.Random(7)
        concepts = []
        for i in range(12):
            atoms = [SupplementAtom(f"term {i}-{j}", "PT" if j == 0 else "SY",
                                    rng.random() < 0.5, "DSLEX")
                     for j in range(rng.randint(1, 4))]
            concepts.append(SupplementConcept(f"DB{i:02d}", atoms))
        merged, _ = merge_terminology(base, concepts, supplement_ranking())
        for record in concepts_from_table(merged.mrconso):
            preferred_rows = [r for r in merged.mrconso.rows
                              if r[0] == record.cui and r[6] == "Y"]
            assert len(preferred_rows) == 1


class TestEmitRrf:
    def test_round_trip_identity(self):
        base = base_rrf()
        streams = {name: io.BytesIO() for name in base.tables()}
        emit_rrf(base, streams)
        reparsed = RrfSet.from_streams(
            {name: io.BytesIO(stream.getvalue())
             for name, stream in streams.items()})
        for name in streams:
            assert reparsed.tables()[name].text() == base.tables()[name].text()

    def test_merge_appends_expected_row_counts(self):
        base = base_rrf()
        conso_before = len(base.mrconso.rows)
        sty_before = len(base.mrsty.rows)
        concept = SupplementConcept("DA07", [
            SupplementAtom("Saw palmetto", "PT", True, "DSLEX"),
            SupplementAtom("Serenoa repens", "SY", False, "DSLEX"),
            SupplementAtom("Sabal", "SY", False, "DSLEX"),
        ])
        merged, _ = merge_terminology(base, [concept], supplement_ranking())
        assert len(merged.mrconso.rows) == conso_before + 3
        assert len(merged.mrsty.rows) == sty_before + 1

    def test_dangling_sty_reference_rejected(self):
        base = base_rrf()
        base.mrsty.rows.append(sty_line("C0099999", "T121").split("|"))
        with pytest.raises(TerminologyError):
            emit_rrf(base, {"MRSTY": io.BytesIO(), "MRCONSO": io.BytesIO()})

    def test_missing_trailing_newline_preserved(self):
        data = conso_line("C0000001", "Ginkgo").encode()
        table = RrfTable.parse(io.BytesIO(data), "MRCONSO")
        assert table.text().encode() == data


class TestSupplementInput:
    def test_groups_rows_by_concept(self):
        stream = io.BytesIO(
            b"supplement_id\tterm\tterm_type\tis_preferred\tlinked_cui\tsource\n"
            b"DA01\tFish oil\tPT\t1\t\tDSLEX\n"
            b"DA01\tOmega-3\tSY\t0\t\tDSLEX\n"
            b"DA02\tGinkgo extract\tPT\t1\tC0000001\tDSLEX\n")
        concepts = parse_supplement(stream)
        assert [c.id for c in concepts] == ["DA01", "DA02"]
        assert len(concepts[0].atoms) == 2
        assert concepts[0].linked_cui is None
        assert concepts[1].linked_cui == "C0000001"

    def test_conflicting_links_rejected(self):
        stream = io.BytesIO(
            b"supplement_id\tterm\tterm_type\tis_preferred\tlinked_cui\tsource\n"
            b"DA01\tFish oil\tPT\t1\tC0000001\tDSLEX\n"
            b"DA01\tOmega-3\tSY\t0\tC0000002\tDSLEX\n")
        with pytest.raises(RrfFormatError):
            parse_supplement(stream)

    def test_missing_column_named(self):
        stream = io.BytesIO(b"supplement_id\tterm\n")
        with pytest.raises(RrfFormatError) as err:
            parse_supplement(stream)
        assert "term_type" in str(err.value)


FIELD_TEXT = st.text(
    alphabet=st.characters(blacklist_characters="|\n\r",
                           blacklist_categories=("Cs",)),
    max_size=8)


@st.composite
def rrf_tables(draw):
    n_fields = draw(st.integers(min_value=2, max_value=6))
    n_rows = draw(st.integers(min_value=0, max_value=12))
    rows = []
    for i in range(n_rows):
        fields = [f"C{i:07d}", draw(FIELD_TEXT)]
        fields += [draw(FIELD_TEXT) for _ in range(n_fields - 2)]
        rows.append("|".join(fields))
    unique_rows = list(dict.fromkeys(rows))
    trailing = draw(st.booleans()) if unique_rows else True
    text = "\n".join(unique_rows) + ("\n" if unique_rows and trailing else "")
    return text.encode("utf-8")


@given(rrf_tables())
@settings(max_examples=200)
def test_table_round_trip_property(data):
    table = RrfTable.parse(io.BytesIO(data), "MRSTY")
    assert table.text().encode("utf-8") == data
