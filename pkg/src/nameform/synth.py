"""Seeded synthetic corpora for desk-scale experiments.

Documents mimic academic pages: a rich opening that introduces a person
and states what the page lists, followed by low-context entry lines in
publication style ("Boret J. , 2019 .").  Whether an entry line holds
person names or venue strings depends on the page register, which only the
rich sentences reveal, so entry tokens are ambiguous without cross-sentence
context.  Names re-appear across sentences at a configurable rate, and all
gold labels are recorded as annotation records.

A separate single-sentence grammar over small fixed pools supports quick
sequence-labeler benchmarks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import AnnotatedDocument, AnnotationRecord, LabeledDocument
from .labels import OUTSIDE_ID

CONSONANTS = "bdfglmnprstvz"
VOWELS = "aeiou"

BEGIN_FIRST = "Begin_First_Full"
END_LAST = "End_Last_Full"
BEGIN_LAST = "Begin_Last_Full"
END_FIRST_INITIAL = "End_First_Initial"


def _word(rng: np.random.Generator, syllables: int, capital: bool) -> str:
    chars = []
    for _ in range(syllables):
        chars.append(CONSONANTS[rng.integers(len(CONSONANTS))])
        chars.append(VOWELS[rng.integers(len(VOWELS))])
    word = "".join(chars)
    return word.capitalize() if capital else word


def _cap_word(rng: np.random.Generator) -> str:
    return _word(rng, int(rng.integers(2, 4)), capital=True)


def _initial(rng: np.random.Generator) -> str:
    return chr(ord("A") + int(rng.integers(26))) + "."


def _year(rng: np.random.Generator) -> str:
    return str(2000 + int(rng.integers(25)))


@dataclass
class SynthParams:
    num_docs: int = 20
    lines: tuple[int, int] = (4, 10)  # body entry lines per document, inclusive
    repetition_rate: float = 0.3
    context_richness: float = 0.35
    comment_rate: float = 0.05


@dataclass
class _Person:
    first: str
    last: str

    @property
    def full(self) -> str:
        return f"{self.first} {self.last}"

    @property
    def listed(self) -> str:
        return f"{self.last} {self.first[0]}."


class _DocBuilder:
    def __init__(self):
        self.lines: list[str] = []
        self.length = 0
        self.mentions: list[tuple[str, int, tuple[str, ...]]] = []

    def add_line(self, parts: list[tuple[str, tuple[str, ...] | None]]) -> None:
        """Parts are (text, labels-or-None); labelled parts become mentions."""
        texts = []
        cursor = self.length
        for text, labels in parts:
            if labels is not None:
                self.mentions.append((text, cursor, tuple(labels)))
            texts.append(text)
            cursor += len(text) + 1
        line = " ".join(t for t, _ in parts)
        self.lines.append(line)
        self.length += len(line) + 1

    def build(self, doc_id: str, rng: np.random.Generator, comment_rate: float) -> AnnotatedDocument:
        text = "\n".join(self.lines) + "\n"
        grouped: dict[tuple[str, tuple[str, ...]], list[int]] = {}
        for mention, offset, labels in self.mentions:
            grouped.setdefault((mention, labels), []).append(offset)
        records = []
        for (mention, labels), positions in sorted(grouped.items()):
            comment = "flagged uncertain" if rng.random() < comment_rate else None
            records.append(
                AnnotationRecord(mention, sorted(positions), list(labels), comment)
            )
        doc = AnnotatedDocument(doc_id, text, records)
        doc.validate()
        return doc


def _plain(*words: str) -> list[tuple[str, None]]:
    return [(w, None) for w in " ".join(words).split(" ")]


def _full_name(person: _Person) -> tuple[str, tuple[str, str]]:
    return person.full, (BEGIN_FIRST, END_LAST)

def _listed_name(person: _Person) -> tuple[str, tuple[str, str]]:
    return person.listed, (BEGIN_LAST, END_FIRST_INITIAL)


def synth_generate(seed: int, params: SynthParams | None = None) -> list[AnnotatedDocument]:
    """Deterministic corpus: same seed and params, byte-identical documents."""
    params = params or SynthParams()
    rng = np.random.default_rng(seed)
    docs = []
    for d in range(params.num_docs):
        docs.append(_generate_doc(f"doc-{seed}-{d:04d}", rng, params))
    return docs


def _generate_doc(doc_id: str, rng: np.random.Generator, params: SynthParams) -> AnnotatedDocument:
    """One document: a rich opening, then person and venue blocks.

    Each block is a rich header sentence followed by bare entry lines in
    publication style.  Entry lines look identical across block kinds, so
    whether an entry holds a name is decided by the nearest header, which
    a capacity-bounded window does not always contain.
    """
    head = _Person(_cap_word(rng), _cap_word(rng))
    people = [head]
    works: list[str] = []
    builder = _DocBuilder()

    def person_mention(reuse_prob: float) -> _Person:
        if rng.random() < reuse_prob:
            return people[int(rng.integers(len(people)))]
        person = _Person(_cap_word(rng), _cap_word(rng))
        people.append(person)
        return person

    def work_mention(listed: bool) -> str:
        if works and rng.random() < params.repetition_rate:
            return works[int(rng.integers(len(works)))]
        if listed:
            work = f"{_cap_word(rng)} {_initial(rng)}"
        else:
            work = f"{_cap_word(rng)} {_cap_word(rng)}"
        works.append(work)
        return work

    name, labels = _full_name(head)
    builder.add_line(
        [("Dr", None), (name, labels)]
        + _plain("is a Professor at the")
        + [(f"{_cap_word(rng)} Institute", None), (".", None)]
    )
    builder.add_line(_plain("The page lists people and venues of the unit ."))

    # more context richness means shorter blocks, i.e. more headers;
    # a zero repetition rate disables within-block reuse as well
    block_reuse = 0.7 if params.repetition_rate > 0 else 0.0
    max_entries = max(1, round((1.0 - params.context_richness) * 4))
    n_lines = int(rng.integers(params.lines[0], params.lines[1] + 1))
    lines_left = n_lines
    while lines_left > 0:
        person_block = bool(rng.random() < 0.5)
        if person_block:
            person = person_mention(params.repetition_rate)
            name, labels = _full_name(person)
            builder.add_line(
                [("Dr", None), (name, labels)] + _plain(f"joined the unit in {_year(rng)} .")
            )
        else:
            builder.add_line(
                [(f"The {work_mention(False)} Review", None)]
                + _plain(f"began in {_year(rng)} .")
            )
        lines_left -= 1
        for _ in range(int(rng.integers(1, max_entries + 1))):
            if lines_left <= 0:
                break
            listed = bool(rng.random() < 0.5)
            if person_block:
                member = person if rng.random() < block_reuse else person_mention(params.repetition_rate)
                name, labels = _listed_name(member) if listed else _full_name(member)
                entry: tuple[str, tuple[str, str] | None] = (name, labels)
            else:
                entry = (work_mention(listed), None)
            builder.add_line([entry, (",", None), (_year(rng), None), (".", None)])
            lines_left -= 1
    return builder.build(doc_id, rng, params.comment_rate)


# single-sentence grammar ---------------------------------------------------

_FIRST_POOL = ("Alden", "Berin", "Clara", "Doran", "Elena", "Farid", "Greta", "Hanno")
_LAST_POOL = ("Maretti", "Novak", "Okafor", "Petrov", "Quental", "Rosari", "Soler", "Tanaka")
_VENUE_POOL = ("Meridian", "Calder", "Vostry", "Ultan", "Wexford", "Ystad")
_PARTICLES = ("van", "de", "van der")


def _grammar_person(rng: np.random.Generator) -> tuple[list[str], list[str]]:
    """Token texts and labels of one generated name."""
    first = _FIRST_POOL[rng.integers(len(_FIRST_POOL))]
    last = _LAST_POOL[rng.integers(len(_LAST_POOL))]
    roll = rng.random()
    if roll < 0.25:
        # particle name: lowercase tokens inside the span, all Last
        particle_tokens = _PARTICLES[rng.integers(len(_PARTICLES))].split(" ")
        tokens = [first, *particle_tokens, last]
        labels = (
            [BEGIN_FIRST]
            + ["Inside_Last_Full"] * len(particle_tokens)
            + [END_LAST]
        )
    elif roll < 0.5:
        tokens = [last, f"{first[0]}."]
        labels = [BEGIN_LAST, END_FIRST_INITIAL]
    else:
        tokens = [first, last]
        labels = [BEGIN_FIRST, END_LAST]
    return tokens, labels


def synth_sentences(seed: int, n: int) -> list[LabeledDocument]:
    """Single-sentence documents from a closed grammar over fixed pools."""
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(n):
        tokens: list[str] = []
        labels: list[str] = []

        def put(words: str):
            for w in words.split(" "):
                tokens.append(w)
                labels.append(OUTSIDE_ID)

        def put_name():
            ts, ls = _grammar_person(rng)
            tokens.extend(ts)
            labels.extend(ls)

        template = int(rng.integers(5))
        venue = _VENUE_POOL[rng.integers(len(_VENUE_POOL))]
        if template == 0:
            put("Dr")
            put_name()
            put(f"is a Professor at the {venue} Institute .")
        elif template == 1:
            put("We thank")
            put_name()
            put("and")
            put_name()
            put("for their comments .")
        elif template == 2:
            put_name()
            put("and")
            put_name()
            put("wrote the report .")
        elif template == 3:
            put(f"The {venue} Institute hosts the")
            put(f"{_VENUE_POOL[rng.integers(len(_VENUE_POOL))]} Workshop .")
        else:
            put("Students include")
            put_name()
            put("and")
            put_name()
            put(".")
        docs.append(LabeledDocument(f"sent-{seed}-{i:04d}", tokens, labels, [len(tokens)]))
    return docs
