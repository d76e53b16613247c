"""Correctness scoring, threshold filtering, dataset splits, and evaluation."""

from __future__ import annotations

import math
import random
import re
import statistics
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .errors import SuppmineError
from .predications import Predication

LABEL_CORRECT = "correct"
LABEL_INCORRECT = "incorrect"
LABELS = (LABEL_CORRECT, LABEL_INCORRECT)

SCORE_COLUMNS = ("predication_id", "probability")
ANNOTATION_COLUMNS = ("predication_id", "label", "annotator")

#: Sentence cues treated as negations by the baseline heuristic scorer, and
#: the token window around the predicate cue they must fall in.  Fixed values:
#: the heuristic is a deterministic stand-in for an external model.
NEGATION_PHRASES = ("does not", "failed to", "not", "no", "without")
NEGATION_WINDOW = 5
NEGATED_SCORE = 0.1
DEFAULT_SCORE = 0.9

#: Two-sided 95% Student-t quantiles for 1..30 degrees of freedom.
T_QUANTILE_975 = {
    1: 12.7062, 2: 4.3027, 3: 3.1824, 4: 2.7764, 5: 2.5706,
    6: 2.4469, 7: 2.3646, 8: 2.3060, 9: 2.2622, 10: 2.2281,
    11: 2.2010, 12: 2.1788, 13: 2.1604, 14: 2.1448, 15: 2.1314,
    16: 2.1199, 17: 2.1098, 18: 2.1009, 19: 2.0930, 20: 2.0860,
    21: 2.0796, 22: 2.0739, 23: 2.0687, 24: 2.0639, 25: 2.0595,
    26: 2.0555, 27: 2.0518, 28: 2.0484, 29: 2.0452, 30: 2.0423,
}
NORMAL_QUANTILE_975 = 1.96  # fallback beyond the table


class ScoringError(SuppmineError):
    """A score source does not cover the data or yields bad probabilities."""


class SplitError(SuppmineError):
    """The split request is unsatisfiable or the annotations are inconsistent."""


@dataclass(frozen=True, slots=True)
class Score:
    predication_id: str
    probability: float

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ScoringError(
                f"probability for {self.predication_id!r} outside [0, 1]: "
                f"{self.probability}")


Scorer = Callable[[Predication], float]


def constant_scorer(probability: float) -> Scorer:
    """Score every predication with one fixed probability."""
    if not 0.0 <= probability <= 1.0:
        raise ScoringError(f"constant probability outside [0, 1]: {probability}")
    return lambda _: probability


_WORD_RE = re.compile(r"[a-z0-9]+(?:'[a-z0-9]+)?")


def _tokens(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def _occurrences(tokens: list[str], phrase: list[str]) -> list[tuple[int, int]]:
    """(start, end) index pairs of a token subsequence, end inclusive."""
    span = len(phrase)
    return [(i, i + span - 1) for i in range(len(tokens) - span + 1)
            if tokens[i:i + span] == phrase]


def negation_heuristic(predication: Predication) -> float:
    """Down-score sentences that negate near the predicate's verbal cue.

    The cue is the lowercased predicate with underscores as spaces.  A
    negation phrase within NEGATION_WINDOW tokens of a cue occurrence scores
    NEGATED_SCORE.  When the sentence never states the cue verbatim, the
    window cannot be anchored and any negation in the sentence counts.
    """
    tokens = _tokens(predication.sentence)
    negations = []
    for phrase in NEGATION_PHRASES:
        negations.extend(_occurrences(tokens, phrase.split()))
    if not negations:
        return DEFAULT_SCORE
    cue = predication.predicate.lower().replace("_", " ").split()
    cues = _occurrences(tokens, cue)
    if not cues:
        return NEGATED_SCORE
    for cue_start, cue_end in cues:
        for neg_start, neg_end in negations:
            if neg_start > cue_end:
                gap = neg_start - cue_end
            elif cue_start > neg_end:
                gap = cue_start - neg_end
            else:
                gap = 0
            if gap <= NEGATION_WINDOW:
                return NEGATED_SCORE
    return DEFAULT_SCORE


def load_scores(stream) -> dict[str, float]:
    """Load an external score file (TSV: predication_id, probability)."""
    data = stream.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    lines = data.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ScoringError("score file is empty")
    header = lines[0].split("\t")
    for column in SCORE_COLUMNS:
        if column not in header:
            raise ScoringError(f"score file: missing column {column!r}")
    id_at, prob_at = header.index(SCORE_COLUMNS[0]), header.index(SCORE_COLUMNS[1])
    scores: dict[str, float] = {}
    for lineno, line in enumerate(lines[1:], 2):
        fields = line.split("\t")
        if len(fields) != len(header):
            raise ScoringError(f"score file line {lineno}: wrong field count")
        pred_id = fields[id_at]
        try:
            probability = float(fields[prob_at])
        except ValueError:
            raise ScoringError(
                f"score file line {lineno}: bad probability "
                f"{fields[prob_at]!r}") from None
        if not 0.0 <= probability <= 1.0:
            raise ScoringError(
                f"score file line {lineno}: probability outside [0, 1]: "
                f"{probability}")
        if pred_id in scores:
            raise ScoringError(f"score file line {lineno}: duplicate id {pred_id!r}")
        scores[pred_id] = probability
    return scores


def write_scores(scores: Iterable[Score], stream) -> None:
    out = ["\t".join(SCORE_COLUMNS)]
    out.extend(f"{s.predication_id}\t{s.probability!r}" for s in scores)
    stream.write(("\n".join(out) + "\n").encode("utf-8"))


def score_predications(predications: Sequence[Predication],
                       scorer: Scorer | Mapping[str, float]) -> list[Score]:
    """Produce one score per predication from a callable or an id->probability map.

    A mapping must cover every predication id; the error lists the ids it
    misses.
    """
    if isinstance(scorer, Mapping):
        missing = [p.id for p in predications if p.id not in scorer]
        if missing:
            raise ScoringError(
                f"external scores missing {len(missing)} id(s): "
                + ", ".join(sorted(missing)))
        return [Score(p.id, float(scorer[p.id])) for p in predications]
    return [Score(p.id, float(scorer(p))) for p in predications]


@dataclass(frozen=True)
class FilterStats:
    total: int
    retained_count: int
    removed_count: int
    threshold: float

    @property
    def retained_percent(self) -> float:
        if self.total == 0:
            return 0.0
        return round(100.0 * self.retained_count / self.total, 2)

    @property
    def summary(self) -> str:
        return f"{self.retained_count:,} ({self.retained_percent:.2f}%)"


def _score_map(scores: Mapping[str, float] | Iterable[Score]) -> Mapping[str, float]:
    if isinstance(scores, Mapping):
        return scores
    return {s.predication_id: s.probability for s in scores}


def filter_by_threshold(predications: Sequence[Predication],
                        scores: Mapping[str, float] | Iterable[Score],
                        threshold: float,
                        ) -> tuple[list[Predication], list[Predication], FilterStats]:
    """Partition predications by score: ``probability >= threshold`` is retained."""
    lookup = _score_map(scores)
    retained: list[Predication] = []
    removed: list[Predication] = []
    keep = retained.append
    drop = removed.append
    try:
        for p in predications:
            if lookup[p.id] >= threshold:
                keep(p)
            else:
                drop(p)
    except KeyError as exc:
        raise ScoringError(f"no score for predication id {exc.args[0]!r}") from None
    stats = FilterStats(total=len(predications), retained_count=len(retained),
                        removed_count=len(removed), threshold=threshold)
    return retained, removed, stats


@dataclass(frozen=True)
class Annotation:
    predication_id: str
    label: str
    annotator: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}, got {self.label!r}")


def load_annotations(stream) -> list[Annotation]:
    """Load an annotation TSV (predication_id, label, annotator)."""
    data = stream.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    lines = data.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise SplitError("annotation file is empty")
    header = lines[0].split("\t")
    for column in ANNOTATION_COLUMNS:
        if column not in header:
            raise SplitError(f"annotation file: missing column {column!r}")
    at = {column: header.index(column) for column in ANNOTATION_COLUMNS}
    seen: set[str] = set()
    annotations = []
    for lineno, line in enumerate(lines[1:], 2):
        fields = line.split("\t")
        if len(fields) != len(header):
            raise SplitError(f"annotation file line {lineno}: wrong field count")
        pred_id = fields[at["predication_id"]]
        label = fields[at["label"]]
        if label not in LABELS:
            raise SplitError(f"annotation file line {lineno}: unknown label {label!r}")
        if pred_id in seen:
            raise SplitError(
                f"annotation file line {lineno}: duplicate annotation for {pred_id!r}")
        seen.add(pred_id)
        annotations.append(Annotation(pred_id, label, fields[at["annotator"]]))
    return annotations


@dataclass(frozen=True)
class SplitSpec:
    """How to cut an annotated dataset into train/dev/test."""

    ratios: tuple[float, float, float] = (0.7, 0.2, 0.1)
    seed: int = 0
    balance_train_dev: bool = True
    test_matches_source_distribution: bool = True

    def __post_init__(self):
        if len(self.ratios) != 3 or any(r <= 0 for r in self.ratios):
            raise SplitError(f"ratios must be three positive numbers: {self.ratios}")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise SplitError(f"ratios must sum to 1: {self.ratios}")


@dataclass
class Splits:
    """Split result; discarded lists hold majority-class items dropped for balance."""

    train: list[Predication]
    dev: list[Predication]
    test: list[Predication]
    train_discarded: list[Predication] = field(default_factory=list)
    dev_discarded: list[Predication] = field(default_factory=list)

    @property
    def allocated_sizes(self) -> tuple[int, int, int]:
        """Sizes of the ratio-driven allocation, before balance pruning."""
        return (len(self.train) + len(self.train_discarded),
                len(self.dev) + len(self.dev_discarded),
                len(self.test))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _class_targets(total: int, n_first: int, n_second: int) -> tuple[int, int]:
    """Split ``total`` across two classes proportionally, largest remainder."""
    population = n_first + n_second
    if population == 0:
        if total:
            raise SplitError("not enough items left to fill a split")
        return 0, 0
    base_first = total * n_first // population
    base_second = total * n_second // population
    short = total - base_first - base_second
    if short:
        frac_first = total * n_first / population - base_first
        frac_second = total * n_second / population - base_second
        order = sorted(((-frac_first, -n_first, 0), (-frac_second, -n_second, 1)))
        for _, _, which in order[:short]:
            if which == 0:
                base_first += 1
            else:
                base_second += 1
    return base_first, base_second


def _balance(pool_correct: list, pool_incorrect: list) -> tuple[list, list, list]:
    """Drop tail items of the majority class until counts differ by at most 1."""
    excess = abs(len(pool_correct) - len(pool_incorrect)) - 1
    if excess <= 0:
        return pool_correct, pool_incorrect, []
    if len(pool_correct) > len(pool_incorrect):
        return pool_correct[:-excess], pool_incorrect, pool_correct[-excess:]
    return pool_correct, pool_incorrect[:-excess], pool_incorrect[-excess:]


def split_dataset(predications: Sequence[Predication],
                  annotations: Iterable[Annotation],
                  spec: SplitSpec) -> Splits:
    """Cut an annotated dataset into train/dev/test splits.

    The test split is drawn first so its class mix matches the source data
    (within one item per class); train and dev then take the ratio-driven
    allocation of the remainder, and when balancing is on, majority-class
    items are discarded from each until the class counts differ by at most
    one.  Identical seeds give identical splits.
    """
    label_by_id: dict[str, str] = {}
    for annotation in annotations:
        if annotation.predication_id in label_by_id:
            raise SplitError(f"duplicate annotation for {annotation.predication_id!r}")
        label_by_id[annotation.predication_id] = annotation.label

    items = list(enumerate(predications))
    correct: list[tuple[int, Predication]] = []
    incorrect: list[tuple[int, Predication]] = []
    for index, p in items:
        label = label_by_id.get(p.id)
        if label is None:
            raise SplitError(f"predication {p.id!r} has no annotation")
        (correct if label == LABEL_CORRECT else incorrect).append((index, p))
    if not correct or not incorrect:
        raise SplitError("both labels must be present to split")

    n = len(items)
    test_size = _round_half_up(spec.ratios[2] * n)
    dev_size = _round_half_up(spec.ratios[1] * n)
    train_size = n - test_size - dev_size
    if min(test_size, dev_size, train_size) < 0:
        raise SplitError("ratios leave a negative split size")

    rng = random.Random(spec.seed)
    shuffled_correct = correct[:]
    shuffled_incorrect = incorrect[:]
    rng.shuffle(shuffled_correct)
    rng.shuffle(shuffled_incorrect)

    if spec.test_matches_source_distribution:
        test_correct, test_incorrect = _class_targets(
            test_size, len(correct), len(incorrect))
        test = shuffled_correct[:test_correct] + shuffled_incorrect[:test_incorrect]
        rest_correct = shuffled_correct[test_correct:]
        rest_incorrect = shuffled_incorrect[test_incorrect:]
    else:
        combined = shuffled_correct + shuffled_incorrect
        rng.shuffle(combined)
        test = combined[:test_size]
        test_keys = {index for index, _ in test}
        rest_correct = [item for item in shuffled_correct if item[0] not in test_keys]
        rest_incorrect = [item for item in shuffled_incorrect
                          if item[0] not in test_keys]

    dev_correct, dev_incorrect = _class_targets(
        dev_size, len(rest_correct), len(rest_incorrect))
    dev_c, dev_i = rest_correct[:dev_correct], rest_incorrect[:dev_incorrect]
    train_c, train_i = rest_correct[dev_correct:], rest_incorrect[dev_incorrect:]

    train_discard: list[tuple[int, Predication]] = []
    dev_discard: list[tuple[int, Predication]] = []
    if spec.balance_train_dev:
        train_c, train_i, train_discard = _balance(train_c, train_i)
        dev_c, dev_i, dev_discard = _balance(dev_c, dev_i)

    def in_input_order(pairs):
        return [p for _, p in sorted(pairs, key=lambda pair: pair[0])]

    return Splits(train=in_input_order(train_c + train_i),
                  dev=in_input_order(dev_c + dev_i),
                  test=in_input_order(test),
                  train_discarded=in_input_order(train_discard),
                  dev_discarded=in_input_order(dev_discard))


def evaluate_precision(annotations: Sequence[Annotation],
                       retained_ids: Iterable[str],
                       ) -> tuple[float, float | None]:
    """Precision over all annotated items and over the retained subset.

    Returns ``(before, after)``; ``after`` is None when nothing annotated
    was retained.
    """
    if not annotations:
        raise ValueError("no annotations to evaluate")
    retained = set(retained_ids)
    total = len(annotations)
    correct = sum(1 for a in annotations if a.label == LABEL_CORRECT)
    kept = [a for a in annotations if a.predication_id in retained]
    before = correct / total
    if not kept:
        return before, None
    after = sum(1 for a in kept if a.label == LABEL_CORRECT) / len(kept)
    return before, after


@dataclass(frozen=True)
class RunSummary:
    """Mean and 95% confidence interval of one metric over repeated runs."""

    name: str
    values: tuple[float, ...]
    mean: float
    ci95: tuple[float, float]

    def __post_init__(self):
        low, high = self.ci95
        if not low <= self.mean <= high:
            raise ValueError("confidence interval must bracket the mean")


def summarize_runs(values: Sequence[float], name: str = "metric") -> RunSummary:
    """Mean with a Student-t 95% interval: mean +/- t(0.975, n-1) * s / sqrt(n).

    ``s`` is the sample standard deviation.  Beyond 30 degrees of freedom the
    table hands over to the large-sample normal quantile.
    """
    if len(values) < 2:
        raise ValueError("at least two run values are required")
    mean = statistics.fmean(values)
    spread = statistics.stdev(values)
    df = len(values) - 1
    quantile = T_QUANTILE_975.get(df, NORMAL_QUANTILE_975)
    half_width = quantile * spread / math.sqrt(len(values))
    return RunSummary(name=name, values=tuple(float(v) for v in values),
                      mean=mean, ci95=(mean - half_width, mean + half_width))
