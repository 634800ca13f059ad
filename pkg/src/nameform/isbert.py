"""Inter-sentence overlapped contextual encoding over chunked documents.

Documents are cut into overlapped chunks; a forward sweep re-encodes each
chunk after replacing its leading overlap positions with the predecessor's
freshly contextualized trailing positions, and a backward sweep mirrors
this from the other end.  One forward-plus-backward sweep is a hop; hop
inputs after the first are the elementwise sum of the two previous hop
outputs, so repeated hops strengthen signals that crossed chunk
boundaries.  A linear head over the final blocks yields per-piece class
logits; token predictions come from majority vote over a token's pieces.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .chunking import (
    Chunk,
    ChunkedDocument,
    FixedOverlap,
    OverlapPolicy,
    SPECIAL_TOKENS,
    chunk_document,
    shuffle_dataset,
)
from .cognn import EpochMetrics
from .corpus import LabeledDocument
from .labels import (
    Fusion,
    LabelScheme,
    NameSpan,
    OUTSIDE_ID,
    TokenLabel,
    build_label_space,
    decode_spans,
)
from .metrics import name_prf, token_prf
from .nn import autograd as ag
from .nn.autograd import Parameter, Tensor, zero_grads
from .nn.layers import Embedding, Linear, TransformerEncoder
from .nn.optim import Adam
from .tokenization import Vocabulary, propagate_labels, resolve_predictions, wordpiece

EARLY_SCHEME = LabelScheme(Fusion.EARLY, ("BIE", "FML", "FI"))


@dataclass(frozen=True)
class IsbertConfig:
    capacity: int = 64  # content pieces per chunk
    overlap: OverlapPolicy = FixedOverlap(0.5)
    hops: int = 2
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    lr: float = 1e-3  # adaptive-moment step, scaled up from 1e-5 for desk scale
    max_epochs: int = 30
    patience: int = 10
    batch_docs: int = 4  # documents per optimizer step
    overlap_ownership: str = "last"  # which chunk's prediction a duplicated piece keeps
    vocab_size: int = 4000
    min_word_freq: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.hops < 1:
            raise ValueError("at least one hop required")
        if self.overlap_ownership not in ("last", "first", "average"):
            raise ValueError("overlap ownership must be last, first, or average")


@dataclass
class PreparedDocument:
    """A labeled document rendered as overlapped chunks of piece ids."""

    doc_id: str
    chunked: ChunkedDocument
    chunk_ids: list[np.ndarray]  # per chunk, ids for every piece incl. specials
    chunk_labels: list[np.ndarray]  # per chunk, class id per content position
    piece_parents: list[int]
    n_tokens: int
    gold_labels: list[str]


def prepare_document(
    doc: LabeledDocument, vocab: Vocabulary, label_space: Sequence[str], config: IsbertConfig
) -> PreparedDocument:
    pieces: list[str] = []
    parents: list[int] = []
    for idx, token in enumerate(doc.tokens):
        for piece in wordpiece(token, vocab):
            pieces.append(piece)
            parents.append(idx)
    piece_labels = propagate_labels(doc.labels, parents)
    class_ids = np.array([label_space.index(l) for l in piece_labels], dtype=np.intp)

    # a sentence ends after the last piece of its final token
    token_ends = set(doc.sentence_ends)
    sentence_ends = []
    for i, parent in enumerate(parents):
        is_last_piece = i + 1 == len(parents) or parents[i + 1] != parent
        if is_last_piece and parent + 1 in token_ends:
            sentence_ends.append(i + 1)

    chunked = chunk_document(
        pieces, config.capacity, config.overlap, sentence_ends=sentence_ends, doc_id=doc.doc_id
    )
    chunk_ids = []
    chunk_labels = []
    for chunk in chunked.chunks:
        chunk_ids.append(np.array([vocab.id_of(p) for p in chunk.pieces], dtype=np.intp))
        start, end = chunk.content_range
        chunk_labels.append(class_ids[start:end])
    return PreparedDocument(
        doc.doc_id, chunked, chunk_ids, chunk_labels, parents, len(doc.tokens), list(doc.labels)
    )


def forward_pass(
    blocks: Sequence[Tensor], chunks: Sequence[Chunk], encoder: TransformerEncoder, k: int
) -> list[Tensor]:
    """Sequential left-to-right re-encoding with overlap injection."""
    _check_overlap(chunks, k)
    out: list[Tensor] = []
    for i, block in enumerate(blocks):
        if i > 0 and k > 0:
            source = np.asarray(chunks[i - 1].content_positions[-k:], dtype=np.intp)
            target = np.asarray(chunks[i].content_positions[:k], dtype=np.intp)
            block = ag.set_rows(block, target, ag.take(out[i - 1], source))
        out.append(encoder(block))
    return out


def backward_pass(
    forward_blocks: Sequence[Tensor], chunks: Sequence[Chunk], encoder: TransformerEncoder, k: int
) -> list[Tensor]:
    """Reverse sweep; the last chunk's forward block passes through unchanged."""
    _check_overlap(chunks, k)
    n = len(forward_blocks)
    out: list[Tensor | None] = [None] * n
    for i in range(n - 1, -1, -1):
        if i == n - 1:
            out[i] = forward_blocks[i]
            continue
        block = forward_blocks[i]
        if k > 0:
            source = np.asarray(chunks[i + 1].content_positions[:k], dtype=np.intp)
            target = np.asarray(chunks[i].content_positions[-k:], dtype=np.intp)
            block = ag.set_rows(block, target, ag.take(out[i + 1], source))
        out[i] = encoder(block)
    return out


def _check_overlap(chunks: Sequence[Chunk], k: int) -> None:
    for chunk in chunks[1:]:
        if chunk.overlap_prev != k:
            raise ValueError(
                f"overlap width {k} does not match chunk metadata {chunk.overlap_prev}"
            )


def multi_hop(
    blocks: Sequence[Tensor], chunks: Sequence[Chunk], encoder: TransformerEncoder, hops: int, k: int
) -> list[Tensor]:
    """Iterated sweeps; hop t+1 consumes the sum of hops t and t-1."""
    if hops < 1:
        raise ValueError("at least one hop required")
    previous = list(blocks)  # hop 0 output: the context-independent blocks
    current = list(blocks)
    for _ in range(hops):
        swept = backward_pass(forward_pass(current, chunks, encoder, k), chunks, encoder, k)
        current, previous = (
            [ag.add(a, b) for a, b in zip(swept, previous)],
            swept,
        )
    return previous  # output of the final hop, before summation


class IsbertModel:
    def __init__(self, vocab: Vocabulary, config: IsbertConfig, label_space: Sequence[str] | None = None):
        self.vocab = vocab
        self.config = config
        self.label_space = list(label_space) if label_space is not None else build_label_space(EARLY_SCHEME)
        rng = np.random.default_rng(config.seed)
        self.embedding = Embedding("embed.table", len(vocab), config.d_model, rng)
        # positions are added once per block (below), not per re-encode:
        # overlap injection and multi-hop sums re-feed encoder outputs
        self.encoder = TransformerEncoder(
            "context",
            config.d_model,
            n_layers=config.n_layers,
            n_heads=config.n_heads,
            max_len=2 * config.capacity + 8,  # specials ride on top of content capacity
            rng=rng,
            add_positions=False,
        )
        self.classifier = Linear("classify", config.d_model, len(self.label_space), rng)

    def parameters(self) -> list[Parameter]:
        return self.embedding.parameters() + self.encoder.parameters() + self.classifier.parameters()

    def final_blocks(self, prepared: PreparedDocument) -> list[Tensor]:
        blocks = [
            ag.add(self.embedding(ids), Tensor(self.encoder.positions[: len(ids)]))
            for ids in prepared.chunk_ids
        ]
        return multi_hop(
            blocks,
            prepared.chunked.chunks,
            self.encoder,
            self.config.hops,
            prepared.chunked.effective_k,
        )

    def document_loss(self, prepared: PreparedDocument) -> Tensor:
        """Cross-entropy over content positions; specials carry no loss."""
        blocks = self.final_blocks(prepared)
        losses = []
        weights = []
        for chunk, block, labels in zip(prepared.chunked.chunks, blocks, prepared.chunk_labels):
            if len(labels) == 0:
                continue
            content = ag.take(block, np.asarray(chunk.content_positions, dtype=np.intp))
            logits = self.classifier(content)
            losses.append(ag.softmax_cross_entropy(logits, labels))
            weights.append(len(labels))
        if not losses:
            return Tensor(np.asarray(0.0))
        total = sum(weights)
        combined = ag.mul(losses[0], weights[0] / total)
        for loss, weight in zip(losses[1:], weights[1:]):
            combined = ag.add(combined, ag.mul(loss, weight / total))
        return combined

    def predict_pieces(self, prepared: PreparedDocument) -> list[str]:
        """Per-piece class identifiers across the document content stream."""
        blocks = self.final_blocks(prepared)
        n_pieces = len(prepared.piece_parents)
        n_classes = len(self.label_space)
        own = self.config.overlap_ownership
        if own == "average":
            logit_sum = np.zeros((n_pieces, n_classes))
            for chunk, block in zip(prepared.chunked.chunks, blocks):
                content = ag.take(block, np.asarray(chunk.content_positions, dtype=np.intp))
                logits = self.classifier(content).data
                start, end = chunk.content_range
                logit_sum[start:end] += logits
            ids = logit_sum.argmax(axis=1)
        else:
            ids = np.full(n_pieces, -1, dtype=np.intp)
            order = (
                zip(prepared.chunked.chunks, blocks)
                if own == "last"
                else reversed(list(zip(prepared.chunked.chunks, blocks)))
            )
            for chunk, block in order:
                content = ag.take(block, np.asarray(chunk.content_positions, dtype=np.intp))
                logits = self.classifier(content).data
                start, end = chunk.content_range
                ids[start:end] = logits.argmax(axis=1)
        return [self.label_space[i] for i in ids]

    def predict_document(
        self, prepared: PreparedDocument, rng: np.random.Generator | int = 0
    ) -> tuple[list[str], list[NameSpan]]:
        """Token labels (majority vote over pieces) and decoded spans."""
        if prepared.n_tokens == 0:
            return [], []
        piece_predictions = self.predict_pieces(prepared)
        token_predictions = resolve_predictions(piece_predictions, prepared.piece_parents, rng)
        spans = decode_spans([TokenLabel.parse(l) for l in token_predictions])
        return token_predictions, spans


def _policy_to_json(policy: OverlapPolicy) -> dict:
    if isinstance(policy, FixedOverlap):
        return {"mode": "fixed", "ratio": policy.ratio}
    return {"mode": "adaptive", "thresholds": list(policy.thresholds), "ratios": list(policy.ratios)}


def _policy_from_json(obj: dict) -> OverlapPolicy:
    if obj["mode"] == "fixed":
        return FixedOverlap(obj["ratio"])
    from .chunking import AdaptiveOverlap

    return AdaptiveOverlap(tuple(obj["thresholds"]), tuple(obj["ratios"]))


def save_isbert(model: IsbertModel, path) -> None:
    import dataclasses

    from .nn.checkpoint import save_checkpoint

    config = dataclasses.asdict(model.config)
    config["overlap"] = _policy_to_json(model.config.overlap)
    header = {
        "kind": "isbert",
        "config": config,
        "vocab": model.vocab.pieces,
        "unknown_piece": model.vocab.unknown_piece,
        "label_space": model.label_space,
    }
    save_checkpoint(path, model.parameters(), header)


def load_isbert(path) -> IsbertModel:
    from .nn.checkpoint import load_checkpoint, restore_parameters

    header, values = load_checkpoint(path)
    if header.get("kind") != "isbert":
        raise ValueError(f"not an inter-sentence checkpoint: {path}")
    config_obj = dict(header["config"])
    config_obj["overlap"] = _policy_from_json(config_obj["overlap"])
    config = IsbertConfig(**config_obj)
    vocab = Vocabulary(header["vocab"], unknown_piece=header["unknown_piece"])
    model = IsbertModel(vocab, config, label_space=header["label_space"])
    restore_parameters(model.parameters(), values)
    return model


def build_vocabulary(docs: Sequence[LabeledDocument], config: IsbertConfig) -> Vocabulary:
    texts = [" ".join(doc.tokens) for doc in docs]
    vocab = Vocabulary.build(texts, max_size=config.vocab_size, min_word_freq=config.min_word_freq)
    pieces = list(vocab.pieces)
    for special in SPECIAL_TOKENS:
        if special not in vocab:
            pieces.append(special)
    return Vocabulary(pieces, unknown_piece=vocab.unknown_piece)


def evaluate_isbert(
    model: IsbertModel,
    prepared_docs: Sequence[PreparedDocument],
    epoch: int,
    split: str,
    mode: str = "fine-grained",
) -> EpochMetrics:
    token_report = None
    name_report = None
    for prepared in prepared_docs:
        predictions, spans = model.predict_document(prepared, rng=0)
        t = token_prf(predictions, prepared.gold_labels, mode=mode)
        gold_spans = decode_spans([TokenLabel.parse(l) for l in prepared.gold_labels])
        n = name_prf(spans, gold_spans)
        token_report = t if token_report is None else token_report + t
        name_report = n if name_report is None else name_report + n
    return EpochMetrics(
        epoch, split, token_report.precision, token_report.recall, token_report.f1, name_report.f1
    )


def _token_accuracy(model: IsbertModel, prepared_docs: Sequence[PreparedDocument]) -> float:
    correct = total = 0
    for prepared in prepared_docs:
        predictions, _ = model.predict_document(prepared, rng=0)
        correct += sum(p == g for p, g in zip(predictions, prepared.gold_labels))
        total += prepared.n_tokens
    return correct / total if total else 0.0


def train_isbert(
    train_docs: Sequence[LabeledDocument],
    dev_docs: Sequence[LabeledDocument],
    config: IsbertConfig,
    vocab: Vocabulary | None = None,
) -> tuple[IsbertModel, list[PreparedDocument], list[EpochMetrics]]:
    """Adaptive-moment training with document-level shuffling per epoch."""
    if not train_docs or not dev_docs:
        raise ValueError("training needs non-empty train and dev splits")
    vocab = vocab if vocab is not None else build_vocabulary(train_docs, config)
    model = IsbertModel(vocab, config)
    prepared_train = [prepare_document(d, vocab, model.label_space, config) for d in train_docs]
    prepared_dev = [prepare_document(d, vocab, model.label_space, config) for d in dev_docs]

    optimizer = Adam(model.parameters(), lr=config.lr)
    rng = np.random.default_rng(config.seed)
    log: list[EpochMetrics] = []
    best_accuracy = -1.0
    best_state: list[np.ndarray] | None = None
    epochs_since_best = 0

    for epoch in range(1, config.max_epochs + 1):
        shuffled = shuffle_dataset(prepared_train, rng)
        for start in range(0, len(shuffled), config.batch_docs):
            batch = shuffled[start : start + config.batch_docs]
            zero_grads(model.parameters())
            for prepared in batch:
                if not prepared.chunked.chunks:
                    continue
                ag.mul(model.document_loss(prepared), 1.0 / len(batch)).backward()
            optimizer.step()

        accuracy = _token_accuracy(model, prepared_dev)
        log.append(evaluate_isbert(model, prepared_dev, epoch, "dev"))
        if accuracy > best_accuracy:
            best_accuracy = accuracy
            best_state = [p.data.copy() for p in model.parameters()]
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= config.patience:
                break

    if best_state is not None:
        for p, data in zip(model.parameters(), best_state):
            p.data[...] = data
    return model, prepared_dev, log
