"""Coupled sequence labelers with co-attention and gated fusion.

Two recurrent CRF taggers see the same token sequence: the span network
predicts whether each token begins, continues, or ends a name, while the
form network predicts one form axis (role or surface).  Their hidden
states exchange signals through a shared co-attention distribution, each
branch then gating how much of the rescaled representation it accepts.
Training minimizes the sum of the two CRF negative log-likelihoods.

Setting ``fusion=False`` drops the form branch entirely, leaving the plain
single-axis tagger used as the no-fusion baseline.
"""
from __future__ import annotations

import csv
import dataclasses
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import LabeledDocument
from .crf import CrfHead
from .labels import (
    OUTSIDE_ID,
    NameSpan,
    TokenLabel,
    axis_space,
    axis_view,
    combine_views,
    decode_spans,
)
from .metrics import name_prf, token_prf
from .nn import autograd as ag
from .nn.autograd import Parameter, Tensor, zero_grads
from .nn.layers import BiRnnEncoder, CoAttention, GatedFusion, TokenRepresentation, case_matrix
from .nn.optim import Sgd

UNKNOWN_WORD = "<unk>"


@dataclass(frozen=True)
class CognnConfig:
    form_axis: str = "FI"  # the form network's label view: "FML" or "FI"
    fusion: bool = True  # False: single-axis baseline without the form branch
    embed_dim: int = 100
    hidden: int = 100
    dropout: float = 0.5
    batch_size: int = 32
    lr: float = 0.01
    lr_decay: float = 0.05
    coattention_k: int | None = None
    coattention_mode: str = "shared"
    max_epochs: int = 200
    patience: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.form_axis not in ("FML", "FI"):
            raise ValueError("form axis must be FML or FI")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")


@dataclass
class EpochMetrics:
    epoch: int
    split: str
    token_p: float
    token_r: float
    token_f: float
    name_f: float

    def row(self) -> list[str]:
        return [
            str(self.epoch),
            self.split,
            f"{self.token_p:.4f}",
            f"{self.token_r:.4f}",
            f"{self.token_f:.4f}",
            f"{self.name_f:.4f}",
        ]


def metrics_csv(rows: Sequence[EpochMetrics]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["epoch", "split", "tokenP", "tokenR", "tokenF", "nameF"])
    for row in rows:
        writer.writerow(row.row())
    return buffer.getvalue()


def build_word_index(docs: Sequence[LabeledDocument]) -> dict[str, int]:
    index = {UNKNOWN_WORD: 0}
    for doc in docs:
        for token in doc.tokens:
            index.setdefault(token, len(index))
    return index


class CognnModel:
    def __init__(self, word_index: dict[str, int], config: CognnConfig):
        self.config = config
        self.word_index = word_index
        rng = np.random.default_rng(config.seed)
        n_words = len(word_index)
        d = 2 * config.hidden

        self.rep_span = TokenRepresentation("span.rep", n_words, config.embed_dim, rng)
        self.enc_span = BiRnnEncoder("span.enc", self.rep_span.dim, config.hidden, rng)
        self.span_space = axis_space("BIE")
        self.crf_span = CrfHead("span.crf", d, len(self.span_space), rng)

        if config.fusion:
            self.rep_form = TokenRepresentation("form.rep", n_words, config.embed_dim, rng)
            # the two tables start from identical values
            self.rep_form.embedding.table.data[...] = self.rep_span.embedding.table.data
            self.enc_form = BiRnnEncoder("form.enc", self.rep_form.dim, config.hidden, rng)
            self.coattention = CoAttention(
                "coatt", d, config.coattention_k, rng, mode=config.coattention_mode
            )
            self.fuse_span = GatedFusion("span.fuse", d, rng=rng)
            self.fuse_form = GatedFusion("form.fuse", d, rng=rng)
            self.form_space = axis_space(config.form_axis)
            self.crf_form = CrfHead("form.crf", d, len(self.form_space), rng)

    def parameters(self) -> list[Parameter]:
        params = (
            self.rep_span.parameters() + self.enc_span.parameters() + self.crf_span.parameters()
        )
        if self.config.fusion:
            params += (
                self.rep_form.parameters()
                + self.enc_form.parameters()
                + self.coattention.parameters()
                + self.fuse_span.parameters()
                + self.fuse_form.parameters()
                + self.crf_form.parameters()
            )
        return params

    def _ids(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.word_index.get(t, 0) for t in tokens], dtype=np.intp)

    def forward(
        self, tokens: Sequence[str], train: bool = False, rng: np.random.Generator | None = None
    ) -> tuple[Tensor, Tensor | None]:
        """Fused features for the span branch and, when fused, the form branch."""
        ids = self._ids(tokens)
        bits = case_matrix(tokens)
        rng = rng if rng is not None else np.random.default_rng(0)
        h_span = self.enc_span(self.rep_span(ids, bits))
        h_span = ag.dropout(h_span, self.config.dropout, rng, train)
        if not self.config.fusion:
            return h_span, None
        h_form = self.enc_form(self.rep_form(ids, bits))
        h_form = ag.dropout(h_form, self.config.dropout, rng, train)
        _, span_tilde, form_tilde = self.coattention(h_span, h_form)
        return self.fuse_span(h_span, span_tilde), self.fuse_form(h_form, form_tilde)

    def _views(self, labels: Sequence[str]) -> tuple[list[int], list[int] | None]:
        span_ids = [self.span_space.index(axis_view(l, "BIE")) for l in labels]
        if not self.config.fusion:
            return span_ids, None
        form_ids = [self.form_space.index(axis_view(l, self.config.form_axis)) for l in labels]
        return span_ids, form_ids

    def joint_nll(
        self,
        tokens: Sequence[str],
        labels: Sequence[str],
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Sum of the two branches' CRF negative log-likelihoods."""
        if len(tokens) != len(labels):
            raise ValueError("tokens and gold labels must align")
        span_features, form_features = self.forward(tokens, train, rng)
        span_ids, form_ids = self._views(labels)
        loss = self.crf_span.nll(span_features, span_ids)
        if self.config.fusion:
            loss = loss + self.crf_form.nll(form_features, form_ids)
        return loss

    def predict(self, tokens: Sequence[str]) -> tuple[list[str], list[NameSpan]]:
        """Viterbi paths of both branches combined into fused labels."""
        if not tokens:
            return [], []
        span_features, form_features = self.forward(tokens, train=False)
        span_path, _ = self.crf_span.decode(span_features)
        if self.config.fusion:
            form_path, _ = self.crf_form.decode(form_features)
            form_ids = [self.form_space[i] for i in form_path]
        else:
            form_ids = [OUTSIDE_ID] * len(tokens)
        labels = [
            combine_views(self.span_space[s], f, self.config.form_axis).identifier()
            for s, f in zip(span_path, form_ids)
        ]
        return labels, decode_spans([TokenLabel.parse(l) for l in labels])


def save_cognn(model: CognnModel, path: str | Path) -> None:
    from .nn.checkpoint import save_checkpoint

    config = {
        "kind": "cognn",
        "config": dataclasses.asdict(model.config),
        "word_index": model.word_index,
    }
    save_checkpoint(path, model.parameters(), config)


def load_cognn(path: str | Path) -> CognnModel:
    from .nn.checkpoint import load_checkpoint, restore_parameters

    header, values = load_checkpoint(path)
    if header.get("kind") != "cognn":
        raise ValueError(f"not a cognn checkpoint: {path}")
    model = CognnModel(header["word_index"], CognnConfig(**header["config"]))
    restore_parameters(model.parameters(), values)
    return model


def _token_accuracy(model: CognnModel, docs: Sequence[LabeledDocument]) -> float:
    correct = total = 0
    for doc in docs:
        predicted, _ = model.predict(doc.tokens)
        span_gold = [axis_view(l, "BIE") for l in doc.labels]
        span_pred = [axis_view(l, "BIE") for l in predicted]
        correct += sum(p == g for p, g in zip(span_pred, span_gold))
        total += len(doc.tokens)
    return correct / total if total else 0.0


def evaluate(model: CognnModel, docs: Sequence[LabeledDocument], epoch: int, split: str) -> EpochMetrics:
    token_report = None
    name_report = None
    for doc in docs:
        predicted, spans = model.predict(doc.tokens)
        t = token_prf(predicted, doc.labels, mode="span-only")
        gold_spans = decode_spans([TokenLabel.parse(l) for l in doc.labels])
        n = name_prf(spans, gold_spans)
        token_report = t if token_report is None else token_report + t
        name_report = n if name_report is None else name_report + n
    return EpochMetrics(
        epoch,
        split,
        token_report.precision,
        token_report.recall,
        token_report.f1,
        name_report.f1,
    )


def train(
    train_docs: Sequence[LabeledDocument],
    dev_docs: Sequence[LabeledDocument],
    config: CognnConfig,
) -> tuple[CognnModel, list[EpochMetrics]]:
    """SGD with per-epoch learning-rate decay and dev-accuracy early stopping.

    Deterministic for a fixed config seed; returns the model restored to
    its best dev checkpoint together with the per-epoch metrics log.
    """
    if not train_docs or not dev_docs:
        raise ValueError("training needs non-empty train and dev splits")
    model = CognnModel(build_word_index(train_docs), config)
    optimizer = Sgd(model.parameters(), lr=config.lr, decay=config.lr_decay)
    rng = np.random.default_rng(config.seed)
    log: list[EpochMetrics] = []
    best_accuracy = -1.0
    best_state: list[np.ndarray] | None = None
    epochs_since_best = 0

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_docs))
        for start in range(0, len(order), config.batch_size):
            batch = [train_docs[i] for i in order[start : start + config.batch_size]]
            zero_grads(model.parameters())
            scale = 1.0 / len(batch)
            for doc in batch:
                if not doc.tokens:
                    continue
                loss = model.joint_nll(doc.tokens, doc.labels, train=True, rng=rng)
                ag.mul(loss, scale).backward()
            optimizer.step()
        optimizer.end_epoch()

        accuracy = _token_accuracy(model, dev_docs)
        log.append(evaluate(model, dev_docs, epoch, "dev"))
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
    return model, log
