"""Closed vocabularies shared across the pipeline."""

#: The closed vocabulary of relation predicates accepted from the extraction
#: tool output.  Rows carrying any other predicate are rejected at ingest.
PREDICATES = frozenset({
    "ADMINISTERED_TO",
    "AFFECTS",
    "ASSOCIATED_WITH",
    "AUGMENTS",
    "CAUSES",
    "COEXISTS_WITH",
    "COMPARED_WITH",
    "COMPLICATES",
    "CONVERTS_TO",
    "DIAGNOSES",
    "DISRUPTS",
    "HIGHER_THAN",
    "INHIBITS",
    "INTERACTS_WITH",
    "ISA",
    "LOCATION_OF",
    "LOWER_THAN",
    "MANIFESTATION_OF",
    "MEASURES",
    "METHOD_OF",
    "OCCURS_IN",
    "PART_OF",
    "PRECEDES",
    "PREDISPOSES",
    "PREVENTS",
    "PROCESS_OF",
    "PRODUCES",
    "SAME_AS",
    "STIMULATES",
    "TREATS",
    "USES",
})
