"""Corpus formats: annotated documents, CoNLL columns, label mappings.

A corpus directory holds one subfolder per document with ``page.txt`` (the
visible text) and ``names.json`` (the annotation sidecar).  The sidecar is
a single object ``{"names": [...]}`` whose entries carry the annotated
string, every character offset it occurs at, one fused label per token,
and an optional comment.  Keys are written in sorted order so identical
inputs produce identical bytes.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .labels import OUTSIDE_ID, Fi, Fml, NameSpan, TokenLabel, bie_for_span, fuse_early
from .tokenization import Token, basic_tokenize, split_sentences

TEXT_FILE = "page.txt"
SIDECAR_FILE = "names.json"
PERSON_CLASS = "PER"

INITIAL_PATTERN = re.compile(r"^[^\W\da-z_]\.?$")  # single uppercase letter, optional dot


class CorpusValidationError(ValueError):
    def __init__(self, doc_id: str, record_index: int | None, message: str):
        self.doc_id = doc_id
        self.record_index = record_index
        where = f"{doc_id}" if record_index is None else f"{doc_id}[record {record_index}]"
        super().__init__(f"{where}: {message}")


@dataclass
class AnnotationRecord:
    name_text: str
    positions: list[int]
    labels: list[str]
    comment: str | None = None

    def spans_chars(self) -> list[tuple[int, int]]:
        return [(p, p + len(self.name_text)) for p in self.positions]


@dataclass
class AnnotatedDocument:
    doc_id: str
    text: str
    records: list[AnnotationRecord] = field(default_factory=list)

    def validate(self) -> None:
        """Structural consistency; raises CorpusValidationError."""
        intervals: list[tuple[int, int]] = []
        for i, record in enumerate(self.records):
            expected_tokens = len(basic_tokenize(record.name_text))
            if len(record.labels) != expected_tokens:
                raise CorpusValidationError(
                    self.doc_id, i, f"{len(record.labels)} labels for {expected_tokens} name tokens"
                )
            for label in record.labels:
                parsed = TokenLabel.parse(label)
                if not parsed.is_name:
                    raise CorpusValidationError(self.doc_id, i, "name token labelled Outside")
            for start, end in record.spans_chars():
                if start < 0 or end > len(self.text):
                    raise CorpusValidationError(self.doc_id, i, f"position {start} outside text")
                if self.text[start:end] != record.name_text:
                    raise CorpusValidationError(
                        self.doc_id, i, f"text at {start} is not {record.name_text!r}"
                    )
                intervals.append((start, end))
        intervals.sort()
        for (_, prev_end), (next_start, _) in zip(intervals, intervals[1:]):
            if next_start < prev_end:
                raise CorpusValidationError(self.doc_id, None, "overlapping annotations")

    def tokens(self) -> list[Token]:
        return [t for t in basic_tokenize(self.text)]

    def token_labels(self) -> tuple[list[Token], list[str]]:
        """Tokens with their fused class identifiers (Outside elsewhere)."""
        tokens = self.tokens()
        labels = [OUTSIDE_ID] * len(tokens)
        for i, record in enumerate(self.records):
            for start, end in record.spans_chars():
                covered = [
                    idx
                    for idx, tok in enumerate(tokens)
                    if tok.char_start >= start and tok.char_end <= end
                ]
                if len(covered) != len(record.labels):
                    raise CorpusValidationError(
                        self.doc_id,
                        i,
                        f"occurrence at {start} covers {len(covered)} tokens, "
                        f"expected {len(record.labels)}",
                    )
                for idx, label in zip(covered, record.labels):
                    labels[idx] = label
        return tokens, labels

    def gold_spans(self) -> list[NameSpan]:
        from .labels import decode_spans

        _, labels = self.token_labels()
        return decode_spans([TokenLabel.parse(l) for l in labels])


@dataclass
class LabeledDocument:
    """Tokenized text with one class identifier per token."""

    doc_id: str
    tokens: list[str]
    labels: list[str]
    sentence_ends: list[int] = field(default_factory=list)  # token index one past each sentence


def to_labeled(doc: AnnotatedDocument) -> LabeledDocument:
    tokens, labels = doc.token_labels()
    sentences = split_sentences(tokens, doc.text)
    return LabeledDocument(
        doc.doc_id, [t.text for t in tokens], labels, [e for _, e in sentences]
    )


# corpus directory I/O ---------------------------------------------------


def _record_to_json(record: AnnotationRecord) -> dict:
    obj: dict = {
        "labels": list(record.labels),
        "positions": list(record.positions),
        "text": record.name_text,
    }
    if record.comment is not None:
        obj["comment"] = record.comment
    return obj


def _record_from_json(obj: dict) -> AnnotationRecord:
    return AnnotationRecord(
        name_text=obj["text"],
        positions=list(obj["positions"]),
        labels=list(obj["labels"]),
        comment=obj.get("comment"),
    )


def write_document(doc: AnnotatedDocument, root: str | Path) -> Path:
    folder = Path(root) / doc.doc_id
    folder.mkdir(parents=True, exist_ok=True)
    (folder / TEXT_FILE).write_text(doc.text, encoding="utf-8")
    sidecar = {"names": [_record_to_json(r) for r in doc.records]}
    (folder / SIDECAR_FILE).write_text(
        json.dumps(sidecar, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return folder


def write_corpus(docs: Iterable[AnnotatedDocument], root: str | Path) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for doc in docs:
        write_document(doc, root)
    return root


def read_document(folder: str | Path, validate: bool = True) -> AnnotatedDocument:
    folder = Path(folder)
    text = (folder / TEXT_FILE).read_text(encoding="utf-8")
    sidecar = json.loads((folder / SIDECAR_FILE).read_text(encoding="utf-8"))
    doc = AnnotatedDocument(
        doc_id=folder.name,
        text=text,
        records=[_record_from_json(o) for o in sidecar.get("names", [])],
    )
    if validate:
        doc.validate()
    return doc


def read_corpus(root: str | Path, validate: bool = True) -> list[AnnotatedDocument]:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {root}")
    docs = []
    for folder in sorted(p for p in root.iterdir() if p.is_dir()):
        if not (folder / TEXT_FILE).exists():
            continue  # page-source or stray folders are ignored
        docs.append(read_document(folder, validate=validate))
    return docs


# CoNLL column files ------------------------------------------------------


@dataclass
class ConllToken:
    text: str
    entity: str  # raw tag, e.g. "I-PER" or "O"


@dataclass
class ConllDocument:
    doc_id: str
    sentences: list[list[ConllToken]]

    def tokens(self) -> list[ConllToken]:
        return [t for sent in self.sentences for t in sent]

    def sentence_ends(self) -> list[int]:
        ends, total = [], 0
        for sent in self.sentences:
            total += len(sent)
            ends.append(total)
        return ends


def read_conll(path: str | Path) -> list[ConllDocument]:
    """Four-column file with blank-line sentence breaks and -DOCSTART- markers."""
    docs: list[ConllDocument] = []
    sentences: list[list[ConllToken]] = []
    current: list[ConllToken] = []

    def close_sentence():
        nonlocal current
        if current:
            sentences.append(current)
            current = []

    def close_doc():
        nonlocal sentences
        close_sentence()
        if sentences:
            docs.append(ConllDocument(f"conll-{len(docs):04d}", sentences))
            sentences = []

    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped:
            close_sentence()
            continue
        columns = stripped.split()
        if columns[0] == "-DOCSTART-":
            close_doc()
            continue
        if len(columns) != 4:
            raise ValueError(f"{path}:{lineno}: expected 4 columns, got {len(columns)}")
        current.append(ConllToken(columns[0], columns[3]))
    close_doc()
    return docs


def _entity_spans(tokens: Sequence[ConllToken], entity_type: str) -> list[tuple[int, int]]:
    """Half-open token spans of one entity type from IOB tags (IOB1 or IOB2)."""
    spans = []
    start = None
    for i, tok in enumerate(tokens):
        tag = tok.entity
        marker, _, tok_type = tag.partition("-")
        if not tok_type:
            marker, tok_type = None, None
        if start is not None and (tok_type != entity_type or marker == "B"):
            spans.append((start, i))
            start = None
        if tok_type == entity_type and start is None:
            start = i
    if start is not None:
        spans.append((start, len(tokens)))
    return spans


def fml_labels_for_name(token_texts: Sequence[str]) -> list[str]:
    """Heuristic fused labels for a person span.

    Role axis: first token First, last token Last, interior Middle;
    single-token names count as Last.  Surface axis: a single uppercase
    letter with an optional dot is an Initial.
    """
    n = len(token_texts)
    bies = bie_for_span(n)
    labels = []
    for i, (text, bie) in enumerate(zip(token_texts, bies)):
        if n == 1:
            fml = Fml.LAST
        elif i == 0:
            fml = Fml.FIRST
        elif i == n - 1:
            fml = Fml.LAST
        else:
            fml = Fml.MIDDLE
        fi = Fi.INITIAL if INITIAL_PATTERN.match(text) else Fi.FULL
        labels.append(fuse_early(bie, fml, fi))
    return labels


LABEL_CONFIGS = ("PER", "FML", "CONLL", "FML_PLUS_CONLL")


def map_labels(docs: Sequence[ConllDocument], config: str) -> list[LabeledDocument]:
    """Project CoNLL entity tags onto one of the four label configurations."""
    if config not in LABEL_CONFIGS:
        raise ValueError(f"unknown label config: {config}")
    out = []
    for doc in docs:
        tokens = doc.tokens()
        labels = [OUTSIDE_ID] * len(tokens)
        if config in ("CONLL", "FML_PLUS_CONLL"):
            for i, tok in enumerate(tokens):
                labels[i] = OUTSIDE_ID if tok.entity == "O" else tok.entity
        person_spans = _entity_spans(tokens, "PER")
        for start, end in person_spans:
            texts = [t.text for t in tokens[start:end]]
            if config == "PER":
                span_labels = [PERSON_CLASS] * (end - start)
            elif config in ("FML", "FML_PLUS_CONLL"):
                span_labels = fml_labels_for_name(texts)
            else:
                continue  # CONLL keeps the raw tags set above
            labels[start:end] = span_labels
        out.append(
            LabeledDocument(doc.doc_id, [t.text for t in tokens], labels, doc.sentence_ends())
        )
    return out
