import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from suppmine.predications import (
    PredicationFormatError,
    compare_extractions,
    comparison_row,
    dedupe,
    parse_predications,
    write_predications,
)

from helpers import make_predication, predication_row, predications_tsv


class TestParsePredications:
    def test_single_valid_row(self):
        result = parse_predications(io.BytesIO(predications_tsv(
            [predication_row("p1")])))
        assert len(result.predications) == 1
        assert not result.rejects
        p = result.predications[0]
        assert p.id == "p1"
        assert p.subject_semtypes == frozenset({"phsu"})

    def test_unknown_predicate_rejected_with_reason(self):
        result = parse_predications(io.BytesIO(predications_tsv(
            [predication_row("p1", predicate="FOO")])))
        assert not result.predications
        assert len(result.rejects) == 1
        assert result.rejects[0].reason_code == "unknown-predicate"
        assert result.rejects[0].line_number == 2

    def test_mixed_fixture_counts(self):
        rows = [predication_row(f"p{i}") for i in range(8)]
        rows.insert(3, "p90\tonly\tthree")                          # bad width
        rows.insert(6, predication_row("p91", predicate="NOPE"))    # bad predicate
        result = parse_predications(io.BytesIO(predications_tsv(rows)))
        assert len(result.predications) == 8
        assert len(result.rejects) == 2
        assert {r.reason_code for r in result.rejects} == {
            "bad-field-count", "unknown-predicate"}

    def test_missing_column_named(self):
        data = b"id\tpmid\tsentence\n"
        with pytest.raises(PredicationFormatError) as err:
            parse_predications(io.BytesIO(data))
        assert "subject_cui" in str(err.value)

    def test_header_only_gives_empty_list(self):
        result = parse_predications(io.BytesIO(predications_tsv([])))
        assert result.predications == []
        assert result.rejects == []

    def test_duplicate_id_is_an_error(self):
        data = predications_tsv([predication_row("p1"),
                                 predication_row("p1", pmid="200")])
        with pytest.raises(PredicationFormatError) as err:
            parse_predications(io.BytesIO(data))
        assert "p1" in str(err.value)

    def test_empty_endpoint_rejected(self):
        result = parse_predications(io.BytesIO(predications_tsv(
            [predication_row("p1", subject="")])))
        assert result.rejects[0].reason_code == "missing-subject-cui"

    def test_round_trip_through_writer(self):
        result = parse_predications(io.BytesIO(predications_tsv(
            [predication_row("p1"), predication_row("p2", predicate="INHIBITS")])))
        out = io.BytesIO()
        write_predications(result.predications, out)
        again = parse_predications(io.BytesIO(out.getvalue()))
        assert again.predications == result.predications


@st.composite
def tsv_rows(draw):
    n = draw(st.integers(min_value=0, max_value=30))
    rows = []
    for i in range(n):
        kind = draw(st.sampled_from(["ok", "bad-predicate", "bad-width"]))
        if kind == "ok":
            rows.append(predication_row(f"p{i}"))
        elif kind == "bad-predicate":
            rows.append(predication_row(f"p{i}", predicate="BOGUS"))
        else:
            rows.append(f"p{i}\tbroken")
    return rows


@given(tsv_rows())
@settings(max_examples=100)
def test_every_row_is_accepted_or_rejected(rows):
    result = parse_predications(io.BytesIO(predications_tsv(rows)))
    assert len(result.predications) + len(result.rejects) == len(rows)


class TestDedupe:
    def test_same_sentence_restatement_collapses(self):
        a = make_predication("p1")
        b = make_predication("p2")
        assert dedupe([a, b]) == [a]

    def test_same_triple_different_pmids_survive(self):
        a = make_predication("p1", pmid="100")
        b = make_predication("p2", pmid="200")
        assert dedupe([a, b]) == [a, b]

    def test_three_duplicate_clusters_drop_three(self):
        items = []
        for cluster in range(3):
            items.append(make_predication(f"a{cluster}", pmid=str(cluster)))
            items.append(make_predication(f"b{cluster}", pmid=str(cluster)))
        items.append(make_predication("solo", pmid="999",
                                      sentence="another sentence."))
        assert len(dedupe(items)) == len(items) - 3

    def test_idempotent(self):
        items = [make_predication(f"p{i}", pmid=str(i % 2)) for i in range(6)]
        once = dedupe(items)
        assert dedupe(once) == once


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), max_size=40))
@settings(max_examples=100)
def test_dedupe_idempotent_property(pairs):
    items = [make_predication(f"p{i}", pmid=str(pmid), sentence=f"s{sent}.")
             for i, (pmid, sent) in enumerate(pairs)]
    once = dedupe(items)
    assert dedupe(once) == once


class TestCompareExtractions:
    def test_identical_inputs_report_zero_change(self):
        items = [make_predication("p1", subject_sources=("DSLEX",))]
        table = compare_extractions(items, items, "DSLEX")
        assert table.mentions.difference == 0
        assert table.mentions.percent == 0.0
        assert table.relations.formatted == "+0 (+0.00%)"

    def test_both_endpoints_count_two_mentions_one_relation(self):
        item = make_predication("p1", subject_sources=("DSLEX",),
                                object_sources=("DSLEX", "MSH"))
        table = compare_extractions([], [item], "DSLEX")
        assert table.mentions.extended == 2
        assert table.relations.extended == 1

    def test_zero_base_with_nonzero_extended_is_undefined(self):
        item = make_predication("p1", subject_sources=("DSLEX",))
        table = compare_extractions([], [item], "DSLEX")
        assert table.mentions.percent is None
        assert "undefined" in table.mentions.formatted

    def test_reference_comparison_arithmetic(self):
        mentions = comparison_row("ds_entity_mentions", 539_863, 1_395_653)
        assert mentions.difference == 855_790
        assert mentions.percent == 158.52
        assert mentions.formatted == "+855,790 (+158.52%)"
        relations = comparison_row("ds_relations", 71_669, 219_977)
        assert relations.difference == 148_308
        assert relations.percent == 206.93
        assert relations.formatted == "+148,308 (+206.93%)"
