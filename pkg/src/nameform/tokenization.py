"""Word and sub-word tokenization with label propagation.

Basic tokenization splits on whitespace and makes punctuation standalone,
with two exceptions that keep name surface forms intact: hyphens and
apostrophes between word characters stay inside the token ("Joon-gi",
"O'Keeffe"), and a dot directly after a single uppercase letter stays
attached so initials like "J." survive as one token.

Sub-word segmentation is greedy longest-prefix match against a vocabulary
whose continuation pieces carry a ``##`` prefix.  Sub-tokens inherit their
parent token's label; token-level predictions are recovered by majority
vote with a seeded random tiebreaker.
"""
from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

CONTINUATION_PREFIX = "##"
DEFAULT_UNKNOWN = "[UNK]"

# Tokens with these literal texts end a sentence (initials keep their dot
# attached, so a bare "." token is always a real terminator).
SENTENCE_TERMINATORS = frozenset({".", "!", "?"})


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _is_word_char(ch: str) -> bool:
    return not ch.isspace() and not _is_punct(ch)


@dataclass(frozen=True)
class Token:
    text: str
    char_start: int
    char_end: int  # exclusive


@dataclass(frozen=True)
class TokenizedDocument:
    tokens: list[Token]
    pieces: list[str]
    piece_parents: list[int]  # parent token index per piece, monotone

    def __post_init__(self) -> None:
        if len(self.pieces) != len(self.piece_parents):
            raise ValueError("pieces and parents length mismatch")
        if any(a > b for a, b in zip(self.piece_parents, self.piece_parents[1:])):
            raise ValueError("piece parents must be monotone non-decreasing")


def basic_tokenize(text: str) -> list[Token]:
    """Split into word and punctuation tokens with character offsets."""
    tokens: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if _is_word_char(ch):
            start = i
            while i < n:
                c = text[i]
                if _is_word_char(c):
                    i += 1
                    continue
                if (
                    c in "-'"
                    and i > start
                    and i + 1 < n
                    and _is_word_char(text[i + 1])
                ):
                    i += 1
                    continue
                break
            word = text[start:i]
            # attach the dot of an initial and close the token there
            if i < n and text[i] == "." and len(word) == 1 and word.isalpha() and word.isupper():
                i += 1
                tokens.append(Token(text[start:i], start, i))
            else:
                tokens.append(Token(word, start, i))
        else:
            tokens.append(Token(ch, i, i + 1))
            i += 1
    return tokens


def split_sentences(tokens: Sequence[Token], text: str | None = None) -> list[tuple[int, int]]:
    """Sentence boundaries as half-open token ranges.

    A sentence ends after a standalone terminator token (initials keep
    their dot, so "J." never terminates) and at blank lines when the
    original text is supplied.
    """
    if not tokens:
        return []
    ends: list[int] = []
    for idx, tok in enumerate(tokens):
        if tok.text in SENTENCE_TERMINATORS:
            ends.append(idx + 1)
        elif text is not None and idx + 1 < len(tokens):
            gap = text[tok.char_end : tokens[idx + 1].char_start]
            if gap.count("\n") >= 2:
                ends.append(idx + 1)
    if not ends or ends[-1] != len(tokens):
        ends.append(len(tokens))
    ranges = []
    start = 0
    for end in ends:
        if end > start:
            ranges.append((start, end))
            start = end
    return ranges


class Vocabulary:
    """Sub-word piece inventory; continuation pieces carry ``##``."""

    def __init__(self, pieces: Sequence[str], unknown_piece: str = DEFAULT_UNKNOWN):
        seen: dict[str, None] = {}
        if unknown_piece not in pieces:
            seen[unknown_piece] = None
        for p in pieces:
            if not p:
                raise ValueError("empty piece")
            seen.setdefault(p, None)
        self.pieces: list[str] = list(seen)
        self.unknown_piece = unknown_piece
        self.piece_ids = {p: i for i, p in enumerate(self.pieces)}
        self._lookup = frozenset(self.pieces)

    def __len__(self) -> int:
        return len(self.pieces)

    def __contains__(self, piece: str) -> bool:
        return piece in self._lookup

    def id_of(self, piece: str) -> int:
        return self.piece_ids.get(piece, self.piece_ids[self.unknown_piece])

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        """UTF-8, one piece per line; the first line is the unknown piece."""
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        pieces = [ln for ln in lines if ln]
        if not pieces:
            raise ValueError(f"empty vocabulary file: {path}")
        return cls(pieces, unknown_piece=pieces[0])

    def save(self, path: str | Path) -> None:
        ordered = [self.unknown_piece] + [p for p in self.pieces if p != self.unknown_piece]
        Path(path).write_text("\n".join(ordered) + "\n", encoding="utf-8")

    @classmethod
    def build(
        cls,
        texts: Sequence[str],
        max_size: int = 2000,
        min_word_freq: int = 2,
        unknown_piece: str = DEFAULT_UNKNOWN,
    ) -> "Vocabulary":
        """Frequency-built desk-scale vocabulary.

        All characters seen in the corpus enter as both word-initial and
        continuation pieces, guaranteeing lossless segmentation of any
        in-corpus text; the most frequent whole words fill the remaining
        budget so common tokens stay unsplit.
        """
        words: Counter[str] = Counter()
        chars: set[str] = set()
        for text in texts:
            for tok in basic_tokenize(text):
                words[tok.text] += 1
                chars.update(tok.text)
        pieces = [unknown_piece]
        for ch in sorted(chars):
            pieces.append(ch)
            pieces.append(CONTINUATION_PREFIX + ch)
        for word, freq in sorted(words.items(), key=lambda kv: (-kv[1], kv[0])):
            if len(pieces) >= max_size:
                break
            if freq >= min_word_freq and len(word) > 1 and word not in pieces:
                pieces.append(word)
        return cls(pieces, unknown_piece=unknown_piece)


def wordpiece(token: str, vocab: Vocabulary) -> list[str]:
    """Greedy longest-prefix segmentation; falls back to the unknown piece."""
    if token in vocab:
        return [token]
    pieces: list[str] = []
    start = 0
    while start < len(token):
        end = len(token)
        match = None
        while start < end:
            candidate = token[start:end]
            if start > 0:
                candidate = CONTINUATION_PREFIX + candidate
            if candidate in vocab:
                match = candidate
                break
            end -= 1
        if match is None:
            return [vocab.unknown_piece]
        pieces.append(match)
        start = end
    return pieces


def tokenize_document(text: str, vocab: Vocabulary) -> TokenizedDocument:
    tokens = basic_tokenize(text)
    pieces: list[str] = []
    parents: list[int] = []
    for idx, tok in enumerate(tokens):
        for piece in wordpiece(tok.text, vocab):
            pieces.append(piece)
            parents.append(idx)
    return TokenizedDocument(tokens, pieces, parents)


def propagate_labels(token_labels: Sequence, piece_parents: Sequence[int]) -> list:
    """Each sub-token inherits its parent token's label unchanged."""
    if piece_parents and max(piece_parents) >= len(token_labels):
        raise ValueError("parent index beyond token labels")
    return [token_labels[parent] for parent in piece_parents]


def resolve_predictions(
    piece_predictions: Sequence,
    piece_parents: Sequence[int],
    rng: np.random.Generator | int = 0,
) -> list:
    """Token-level predictions by per-token majority vote.

    Ties break uniformly at random from the seeded generator, so results
    are reproducible for a fixed seed.
    """
    if len(piece_predictions) != len(piece_parents):
        raise ValueError("predictions and parents length mismatch")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    n_tokens = (max(piece_parents) + 1) if piece_parents else 0
    votes: list[list] = [[] for _ in range(n_tokens)]
    for pred, parent in zip(piece_predictions, piece_parents):
        votes[parent].append(pred)
    resolved = []
    for token_votes in votes:
        counts = Counter(token_votes)
        top = max(counts.values())
        # first-seen order keeps the candidate list deterministic
        winners = [p for p in dict.fromkeys(token_votes) if counts[p] == top]
        if len(winners) == 1:
            resolved.append(winners[0])
        else:
            resolved.append(winners[int(rng.integers(len(winners)))])
    return resolved
