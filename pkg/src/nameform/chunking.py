"""Overlapped chunking of long documents.

A document's sub-token stream is cut into capacity-bounded chunks.  The
first chunk opens with the class-boundary token, every later chunk opens
with the continuation token, and a separator token follows each sentence
end.  Adjacent chunks share exactly ``effective_k`` content pieces, where
``effective_k = floor(ratio * capacity)`` and capacity counts content
pieces only (specials are re-inserted after the overlap arithmetic).

Chunks are filled greedily by whole sentences; a sentence that cannot fit
is broken at the exact capacity boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

CLASS_BOUNDARY_TOKEN = "[CLS]"
CONTINUATION_TOKEN = "$$"
SEPARATOR_TOKEN = "[SEP]"
SPECIAL_TOKENS = (CLASS_BOUNDARY_TOKEN, CONTINUATION_TOKEN, SEPARATOR_TOKEN)


@dataclass(frozen=True)
class FixedOverlap:
    """Predefined overlap ratio, identical for every document."""

    ratio: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.ratio < 1.0:
            raise ValueError("fixed overlap ratio must lie in [0, 1)")

    def ratio_for(self, doc_length: int) -> float:
        return self.ratio


@dataclass(frozen=True)
class AdaptiveOverlap:
    """Length-dependent overlap ratio from a threshold table."""

    thresholds: tuple[int, ...]
    ratios: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.thresholds) != len(self.ratios):
            raise ValueError("thresholds and ratios must have equal length")
        if not self.thresholds:
            raise ValueError("adaptive policy needs at least one threshold")
        if any(a >= b for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError("thresholds must be strictly ascending")
        if any(not 0.0 <= r <= 0.5 for r in self.ratios):
            raise ValueError("adaptive ratios must lie in [0, 0.5]")

    def ratio_for(self, doc_length: int) -> float:
        for threshold, ratio in zip(self.thresholds, self.ratios):
            if doc_length <= threshold:
                return ratio
        return self.ratios[-1]


OverlapPolicy = FixedOverlap | AdaptiveOverlap

# Candidate ratios for the adaptive table.
ADAPTIVE_RATIO_SET = (0.0, 0.10, 0.20, 0.30, 0.40, 0.50)


def default_adaptive_policy(capacity: int) -> AdaptiveOverlap:
    """Default length-to-ratio table, scaled by chunk capacity.

    Documents fitting one chunk get no overlap; the ratio then grows with
    document length up to 0.5.  The multipliers are a declared default of
    this artifact, configurable by callers.
    """
    return AdaptiveOverlap(
        thresholds=(capacity, 2 * capacity, 3 * capacity, 4 * capacity, 6 * capacity, 8 * capacity),
        ratios=ADAPTIVE_RATIO_SET,
    )


def select_ratio(doc_length: int, policy: OverlapPolicy) -> float:
    """Overlap ratio a policy assigns to a document of the given length."""
    return policy.ratio_for(doc_length)


@dataclass(frozen=True)
class Chunk:
    pieces: tuple[str, ...]
    content_range: tuple[int, int]  # half-open range into the document content stream
    overlap_prev: int
    content_positions: tuple[int, ...]  # indices into pieces holding content

    @property
    def content(self) -> tuple[str, ...]:
        return tuple(self.pieces[p] for p in self.content_positions)


@dataclass(frozen=True)
class ChunkedDocument:
    doc_id: str
    chunks: tuple[Chunk, ...]
    capacity: int
    effective_k: int


def chunk_document(
    pieces: Sequence[str],
    capacity: int,
    policy: OverlapPolicy,
    sentence_ends: Sequence[int] | None = None,
    doc_id: str = "doc",
) -> ChunkedDocument:
    """Cut a content piece stream into overlapped, special-decorated chunks.

    ``sentence_ends`` holds indices one past each sentence-final piece; when
    omitted the document counts as a single sentence.
    """
    n = len(pieces)
    ratio = policy.ratio_for(n)
    effective_k = math.floor(ratio * capacity)
    if capacity < 1 or effective_k >= capacity:
        raise ValueError(f"capacity {capacity} too small for overlap {effective_k}")

    ends = sorted(set(e for e in (sentence_ends or []) if 0 < e <= n))
    if not ends or ends[-1] != n:
        ends.append(n)
    end_set = set(ends)

    chunks: list[Chunk] = []
    start = 0
    prev_end = 0
    while n and (not chunks or prev_end < n):
        fitting = [e for e in ends if start < e <= start + capacity]
        end = max(fitting) if fitting else 0
        if end <= prev_end:
            # no whole sentence fits (or none advances): break at capacity
            end = min(start + capacity, n)
        chunk_pieces = [CLASS_BOUNDARY_TOKEN if not chunks else CONTINUATION_TOKEN]
        content_positions = []
        for j in range(start, end):
            content_positions.append(len(chunk_pieces))
            chunk_pieces.append(pieces[j])
            if j + 1 in end_set:
                chunk_pieces.append(SEPARATOR_TOKEN)
        chunks.append(
            Chunk(
                pieces=tuple(chunk_pieces),
                content_range=(start, end),
                overlap_prev=prev_end - start if chunks else 0,
                content_positions=tuple(content_positions),
            )
        )
        prev_end = end
        start = end - effective_k
    return ChunkedDocument(doc_id, tuple(chunks), capacity, effective_k)


def reassemble(cd: ChunkedDocument) -> list[str]:
    """Invert chunking: drop specials and duplicated overlap pieces.

    Raises ``ValueError`` when the chunk metadata is inconsistent with the
    piece contents, e.g. a tampered ``overlap_prev``.
    """
    out: list[str] = []
    prev_end = 0
    prev_content: tuple[str, ...] = ()
    for i, chunk in enumerate(cd.chunks):
        content = chunk.content
        start, end = chunk.content_range
        if end - start != len(content):
            raise ValueError(f"chunk {i}: content range does not match piece count")
        if i == 0:
            if chunk.overlap_prev != 0 or start != 0:
                raise ValueError("first chunk must start the document with no overlap")
        else:
            if chunk.overlap_prev > len(prev_content) or start != prev_end - chunk.overlap_prev:
                raise ValueError(f"chunk {i}: overlap metadata inconsistent with predecessor")
            if content[: chunk.overlap_prev] != prev_content[len(prev_content) - chunk.overlap_prev :]:
                raise ValueError(f"chunk {i}: overlap pieces differ from predecessor tail")
        out.extend(content[chunk.overlap_prev :])
        prev_end = end
        prev_content = content
    if len(out) != prev_end:
        raise ValueError("reassembled stream length mismatch")
    return out


def shuffle_dataset(docs: Sequence, seed: int | np.random.Generator) -> list:
    """Permute document order only; within-document chunk order is untouched."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    order = rng.permutation(len(docs))
    return [docs[i] for i in order]
