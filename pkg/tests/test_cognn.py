"""Coupled tagger: shapes, losses, coupling, training loop."""
import math

import numpy as np
import pytest

from nameform.cognn import (
    CognnConfig,
    CognnModel,
    build_word_index,
    load_cognn,
    metrics_csv,
    save_cognn,
    train,
)
from nameform.corpus import LabeledDocument
from nameform.labels import OUTSIDE_ID, decode_spans, TokenLabel
from nameform.nn import autograd as ag
from nameform.nn.autograd import zero_grads
from nameform.synth import synth_sentences

from gradcheck_util import check_grads

TINY = CognnConfig(form_axis="FI", embed_dim=8, hidden=6, dropout=0.0, seed=3)


def _model(config=TINY, tokens=("Dr", "John", "Doe", "works", ".", "J.", "van")):
    index = build_word_index([LabeledDocument("d", list(tokens), [OUTSIDE_ID] * len(tokens), [])])
    return CognnModel(index, config)


class TestForward:
    @pytest.mark.parametrize("n", [1, 5, 40])
    def test_output_lengths_match_input(self, n):
        model = _model()
        tokens = ["Doe"] * n
        span_f, form_f = model.forward(tokens)
        assert span_f.shape[0] == n
        assert form_f.shape[0] == n

    def test_zeroed_coattention_still_finite(self):
        model = _model()
        model.coattention.w_score.data[:] = 0.0
        model.coattention.b_score.data[:] = 0.0
        span_f, form_f = model.forward(["Dr", "John", "Doe"])
        assert np.isfinite(span_f.data).all()
        assert np.isfinite(form_f.data).all()

    def test_single_network_mode_has_no_form_branch(self):
        model = _model(CognnConfig(form_axis="FI", fusion=False, embed_dim=8, hidden=6, seed=3))
        span_f, form_f = model.forward(["John", "Doe"])
        assert form_f is None
        assert span_f.shape == (2, 12)


class TestJointLoss:
    def test_additivity(self):
        model = _model()
        tokens = ["John", "Doe", "."]
        labels = ["Begin_First_Full", "End_Last_Full", OUTSIDE_ID]
        span_f, form_f = model.forward(tokens)
        span_ids, form_ids = model._views(labels)
        separate = model.crf_span.nll(span_f, span_ids).item() + model.crf_form.nll(
            form_f, form_ids
        ).item()
        joint = model.joint_nll(tokens, labels).item()
        assert abs(joint - separate) < 1e-9

    def test_uniform_potentials_closed_form(self):
        # FML view: both label spaces then have 4 classes; with all-zero
        # potentials each branch contributes n*log(4)
        config = CognnConfig(form_axis="FML", embed_dim=8, hidden=6, dropout=0.0, seed=3)
        model = _model(config)
        for head in (model.crf_span, model.crf_form):
            head.projection.weight.data[:] = 0.0
            head.projection.bias.data[:] = 0.0
            head.transitions.data[:] = 0.0
        tokens = ["John", "Doe", "works"]
        labels = ["Begin_First_Full", "End_Last_Full", OUTSIDE_ID]
        loss = model.joint_nll(tokens, labels).item()
        assert abs(loss - 2 * 3 * math.log(4)) < 1e-9

    def test_loss_non_negative(self):
        model = _model()
        tokens = ["Dr", "John", "Doe"]
        labels = [OUTSIDE_ID, "Begin_First_Full", "End_Last_Full"]
        assert model.joint_nll(tokens, labels).item() >= 0.0

    def test_missing_gold_rejected(self):
        model = _model()
        with pytest.raises(ValueError):
            model.joint_nll(["John", "Doe"], ["Begin_First_Full"])

    def test_end_to_end_gradients_every_parameter_group(self):
        model = _model()
        tokens = ["Dr", "John", "Doe", "."]
        labels = [OUTSIDE_ID, "Begin_First_Full", "End_Last_Full", OUTSIDE_ID]
        check_grads(
            lambda: model.joint_nll(tokens, labels),
            model.parameters(),
            tol=1e-3,
        )


class TestCoupling:
    def test_span_loss_reaches_form_encoder_through_attention(self):
        model = _model()
        tokens = ["Dr", "John", "Doe"]
        span_ids, _ = model._views([OUTSIDE_ID, "Begin_First_Full", "End_Last_Full"])
        zero_grads(model.parameters())
        span_f, _ = model.forward(tokens)
        model.crf_span.nll(span_f, span_ids).backward()
        form_encoder_grads = [
            np.abs(p.grad).max() if p.grad is not None else 0.0
            for p in model.enc_form.parameters()
        ]
        assert max(form_encoder_grads) > 0.0


class TestPredict:
    def test_empty_sequence(self):
        model = _model()
        labels, spans = model.predict([])
        assert labels == [] and spans == []

    def test_spans_equal_decode_of_emitted_labels(self):
        model = _model()
        labels, spans = model.predict(["Dr", "John", "Doe", "works", "."])
        expected = decode_spans([TokenLabel.parse(l) for l in labels])
        assert [(s.start_token, s.end_token) for s in spans] == [
            (s.start_token, s.end_token) for s in expected
        ]

    def test_all_outside_means_zero_spans(self):
        model = _model()
        # force emissions that overwhelmingly prefer Outside
        model.crf_span.projection.weight.data[:] = 0.0
        model.crf_span.projection.bias.data[:] = 0.0
        model.crf_span.projection.bias.data[0] = 50.0
        labels, spans = model.predict(["John", "Doe"])
        assert labels == [OUTSIDE_ID, OUTSIDE_ID]
        assert spans == []


def _tiny_corpus():
    return synth_sentences(7, 10)


class TestTraining:
    def test_empty_split_rejected(self):
        with pytest.raises(ValueError):
            train([], _tiny_corpus(), TINY)

    def test_loss_decreases_after_one_step_on_same_batch(self):
        docs = _tiny_corpus()
        model = CognnModel(build_word_index(docs), TINY)
        from nameform.nn.optim import Sgd

        optimizer = Sgd(model.parameters(), lr=1e-3, decay=0.0)
        doc = docs[0]
        zero_grads(model.parameters())
        before = model.joint_nll(doc.tokens, doc.labels)
        before.backward()
        optimizer.step()
        after = model.joint_nll(doc.tokens, doc.labels)
        assert after.item() < before.item()

    def test_same_seed_identical_metrics_log(self):
        docs = _tiny_corpus()
        config = CognnConfig(
            form_axis="FI", embed_dim=8, hidden=6, max_epochs=3, patience=10, seed=5,
            batch_size=4, lr=0.1,
        )
        _, log_a = train(docs[:8], docs[8:], config)
        _, log_b = train(docs[:8], docs[8:], config)
        assert metrics_csv(log_a) == metrics_csv(log_b)

    def test_same_seed_identical_checkpoints(self, tmp_path):
        docs = _tiny_corpus()
        config = CognnConfig(
            form_axis="FI", embed_dim=8, hidden=6, max_epochs=2, patience=10, seed=5,
            batch_size=4, lr=0.1,
        )
        model_a, _ = train(docs[:8], docs[8:], config)
        model_b, _ = train(docs[:8], docs[8:], config)
        save_cognn(model_a, tmp_path / "a.ckpt")
        save_cognn(model_b, tmp_path / "b.ckpt")
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()

    def test_overfit_reproduces_training_labels(self):
        docs = synth_sentences(11, 5)
        config = CognnConfig(
            form_axis="FI", embed_dim=16, hidden=12, dropout=0.0, max_epochs=150,
            patience=150, seed=2, batch_size=5, lr=0.5,
        )
        model, _ = train(docs, docs, config)
        for doc in docs:
            predicted, _ = model.predict(doc.tokens)
            span_ok = [
                (p == g) or (TokenLabel.parse(p).is_name == TokenLabel.parse(g).is_name)
                for p, g in zip(predicted, doc.labels)
            ]
            assert all(span_ok)

    def test_checkpoint_round_trip_preserves_predictions(self, tmp_path):
        docs = _tiny_corpus()
        config = CognnConfig(
            form_axis="FI", embed_dim=8, hidden=6, max_epochs=2, patience=10, seed=5,
            batch_size=4, lr=0.1,
        )
        model, _ = train(docs[:8], docs[8:], config)
        save_cognn(model, tmp_path / "m.ckpt")
        loaded = load_cognn(tmp_path / "m.ckpt")
        tokens = docs[0].tokens
        assert loaded.predict(tokens) == model.predict(tokens)
