"""Annotation tooling: group labeling, indexing, masking, validation, comparison.

These are pure functions over annotated documents; the CLI and the
annotation service expose them unchanged.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Sequence

from .corpus import AnnotatedDocument, AnnotationRecord
from .labels import TokenLabel
from .tokenization import Token, basic_tokenize

MASK_TOKEN = "ANNOTATED"

FULL_SHAPE = re.compile(r"^[^\W\d_]{2,}([-'][^\W\d_]+)*$")  # word of letters, hyphen/apostrophe joins
INITIAL_SHAPE = re.compile(r"^[^\W\da-z_]\.?$")  # single uppercase letter, optional dot


@dataclass(frozen=True)
class Violation:
    kind: str  # PositionMismatch | IncompleteForm | OverlappingAnnotation
    doc_id: str
    record_index: int | None
    detail: str


@dataclass(frozen=True)
class Disagreement:
    doc_id: str
    kind: str  # SpanOnlyInA | SpanOnlyInB | FormMismatch
    span: tuple[int, int]
    details: str


def _annotated_intervals(doc: AnnotatedDocument) -> list[tuple[int, int, AnnotationRecord]]:
    intervals = [
        (start, end, record)
        for record in doc.records
        for start, end in record.spans_chars()
    ]
    intervals.sort(key=lambda item: (item[0], item[1]))
    return intervals


def index_positions(doc: AnnotatedDocument, name_text: str, case_sensitive: bool = True) -> list[int]:
    """All non-overlapping, token-boundary-aligned occurrences, left to right."""
    if not name_text:
        return []
    haystack = doc.text if case_sensitive else doc.text.lower()
    needle = name_text if case_sensitive else name_text.lower()
    starts = {t.char_start for t in basic_tokenize(doc.text)}
    ends = {t.char_end for t in basic_tokenize(doc.text)}
    positions = []
    at = 0
    while True:
        found = haystack.find(needle, at)
        if found < 0:
            break
        if found in starts and found + len(needle) in ends:
            positions.append(found)
            at = found + len(needle)
        else:
            at = found + 1
    return positions


def _template_kinds(template: str) -> list[str]:
    kinds = []
    for tok in template.split():
        if tok == "F":
            kinds.append("F")
        elif tok == "I":
            kinds.append("I")
        else:
            raise ValueError(
                f"malformed template token {tok!r}: use F (full word) and I (initial)"
            )
    if not kinds:
        raise ValueError("empty template")
    return kinds


def _token_matches(kind: str, token: Token) -> bool:
    if kind == "F":
        return bool(FULL_SHAPE.match(token.text)) and token.text[0].isupper()
    return bool(INITIAL_SHAPE.match(token.text))


def group_label(
    doc: AnnotatedDocument, template: str, labels: Sequence[str]
) -> tuple[AnnotatedDocument, list[int], list[int]]:
    """Annotate every unannotated occurrence matching a token-form template.

    The template is a space-separated sequence of ``F`` (full word token)
    and ``I`` (initial token); ``labels`` carries one fused identifier per
    template token.  Occurrences overlapping an existing annotation are
    skipped and reported.  Returns (new document, applied offsets, skipped
    offsets).
    """
    kinds = _template_kinds(template)
    if len(labels) != len(kinds):
        raise ValueError(f"template has {len(kinds)} tokens but {len(labels)} labels given")
    for label in labels:
        if not TokenLabel.parse(label).is_name:
            raise ValueError(f"group label must be a name label, got {label!r}")

    tokens = basic_tokenize(doc.text)
    taken = [(s, e) for s, e, _ in _annotated_intervals(doc)]

    def overlaps_existing(start: int, end: int) -> bool:
        return any(s < end and start < e for s, e in taken)

    applied: list[int] = []
    skipped: list[int] = []
    new_mentions: list[tuple[str, int]] = []
    i = 0
    while i + len(kinds) <= len(tokens):
        window = tokens[i : i + len(kinds)]
        if all(_token_matches(k, t) for k, t in zip(kinds, window)):
            start, end = window[0].char_start, window[-1].char_end
            if overlaps_existing(start, end):
                skipped.append(start)
                i += 1
                continue
            new_mentions.append((doc.text[start:end], start))
            taken.append((start, end))
            applied.append(start)
            i += len(kinds)
        else:
            i += 1

    grouped: dict[str, list[int]] = {}
    for mention, offset in new_mentions:
        grouped.setdefault(mention, []).append(offset)
    new_records = doc.records + [
        AnnotationRecord(mention, sorted(offsets), list(labels))
        for mention, offsets in sorted(grouped.items())
    ]
    return replace(doc, records=new_records), applied, skipped


def mask(doc: AnnotatedDocument) -> str:
    """Replace each annotated occurrence with the single mask token."""
    intervals = _annotated_intervals(doc)
    out = []
    cursor = 0
    for start, end, _ in intervals:
        out.append(doc.text[cursor:start])
        out.append(MASK_TOKEN)
        cursor = end
    out.append(doc.text[cursor:])
    return "".join(out)


def validate_report(doc: AnnotatedDocument) -> list[Violation]:
    """Quality check: positions consistent with text, forms complete."""
    violations: list[Violation] = []
    for i, record in enumerate(doc.records):
        expected_tokens = len(basic_tokenize(record.name_text))
        if len(record.labels) != expected_tokens:
            violations.append(
                Violation(
                    "IncompleteForm",
                    doc.doc_id,
                    i,
                    f"{expected_tokens} tokens but {len(record.labels)} form labels",
                )
            )
        for label in record.labels:
            try:
                parsed = TokenLabel.parse(label)
                incomplete = not parsed.is_name
            except ValueError:
                incomplete = True
            if incomplete:
                violations.append(
                    Violation(
                        "IncompleteForm", doc.doc_id, i, f"label {label!r} lacks the three axes"
                    )
                )
        for start, end in record.spans_chars():
            if start < 0 or end > len(doc.text) or doc.text[start:end] != record.name_text:
                violations.append(
                    Violation(
                        "PositionMismatch",
                        doc.doc_id,
                        i,
                        f"position {start} does not hold {record.name_text!r}",
                    )
                )
    intervals = [item[:2] for item in _annotated_intervals(doc)]
    for (_, prev_end), (next_start, _) in zip(intervals, intervals[1:]):
        if next_start < prev_end:
            violations.append(
                Violation("OverlappingAnnotation", doc.doc_id, None, "annotations overlap")
            )
            break
    return violations


def compare(doc_a: AnnotatedDocument, doc_b: AnnotatedDocument) -> list[Disagreement]:
    """Disagreements between two annotation sets over the same text."""
    if doc_a.text != doc_b.text:
        raise ValueError("compared annotation sets cover different texts")
    spans_a = {(s, e): rec for s, e, rec in _annotated_intervals(doc_a)}
    spans_b = {(s, e): rec for s, e, rec in _annotated_intervals(doc_b)}
    disagreements: list[Disagreement] = []
    for span in sorted(set(spans_a) | set(spans_b)):
        in_a, in_b = span in spans_a, span in spans_b
        if in_a and not in_b:
            disagreements.append(
                Disagreement(doc_a.doc_id, "SpanOnlyInA", span, spans_a[span].name_text)
            )
        elif in_b and not in_a:
            disagreements.append(
                Disagreement(doc_a.doc_id, "SpanOnlyInB", span, spans_b[span].name_text)
            )
        elif spans_a[span].labels != spans_b[span].labels:
            disagreements.append(
                Disagreement(
                    doc_a.doc_id,
                    "FormMismatch",
                    span,
                    f"{'/'.join(spans_a[span].labels)} vs {'/'.join(spans_b[span].labels)}",
                )
            )
    return disagreements
