"""Overlapped inter-sentence encoder: sweeps, hops, prediction, training."""
import numpy as np
import pytest

from nameform.chunking import AdaptiveOverlap, FixedOverlap, default_adaptive_policy
from nameform.corpus import LabeledDocument, to_labeled
from nameform.isbert import (
    IsbertConfig,
    IsbertModel,
    backward_pass,
    build_vocabulary,
    evaluate_isbert,
    forward_pass,
    load_isbert,
    multi_hop,
    prepare_document,
    save_isbert,
    train_isbert,
)
from nameform.labels import OUTSIDE_ID
from nameform.nn.autograd import Tensor
from nameform.synth import SynthParams, synth_generate

CFG = IsbertConfig(
    capacity=16, d_model=16, n_layers=1, n_heads=2, hops=2,
    overlap=FixedOverlap(0.5), seed=0, min_word_freq=50,
)


@pytest.fixture(scope="module")
def small_setup():
    docs = [to_labeled(d) for d in synth_generate(5, SynthParams(num_docs=4, lines=(6, 9)))]
    vocab = build_vocabulary(docs, CFG)
    model = IsbertModel(vocab, CFG)
    prepared = [prepare_document(d, vocab, model.label_space, CFG) for d in docs]
    return docs, vocab, model, prepared


def _blocks(model, prepared):
    return [
        Tensor(model.embedding(ids).data + model.encoder.positions[: len(ids)])
        for ids in prepared.chunk_ids
    ]


class TestPrepare:
    def test_chunk_labels_align_with_content(self, small_setup):
        _, _, _, prepared = small_setup
        for prep in prepared:
            for chunk, labels in zip(prep.chunked.chunks, prep.chunk_labels):
                assert len(chunk.content_positions) == len(labels)

    def test_gold_round_trip_through_pieces(self, small_setup):
        docs, vocab, model, prepared = small_setup
        from nameform.tokenization import propagate_labels, resolve_predictions

        for doc, prep in zip(docs, prepared):
            pieces = propagate_labels(doc.labels, prep.piece_parents)
            assert resolve_predictions(pieces, prep.piece_parents, rng=0) == doc.labels


class TestSweeps:
    def test_k_zero_no_cross_chunk_flow(self, small_setup):
        _, _, model, _ = small_setup
        docs = [to_labeled(d) for d in synth_generate(6, SynthParams(num_docs=1, lines=(8, 8)))]
        cfg0 = IsbertConfig(capacity=16, d_model=16, n_layers=1, n_heads=2, hops=1,
                            overlap=FixedOverlap(0.0), seed=0, min_word_freq=50)
        vocab = build_vocabulary(docs, cfg0)
        model0 = IsbertModel(vocab, cfg0)
        prep = prepare_document(docs[0], vocab, model0.label_space, cfg0)
        assert len(prep.chunked.chunks) >= 3
        blocks = _blocks(model0, prep)
        base = multi_hop(blocks, prep.chunked.chunks, model0.encoder, 1, 0)
        perturbed = [Tensor(b.data.copy()) for b in blocks]
        perturbed[0].data[1] += 1.0
        out = multi_hop(perturbed, prep.chunked.chunks, model0.encoder, 1, 0)
        for i in range(1, len(blocks)):
            assert np.array_equal(base[i].data, out[i].data)

    def test_forward_reach_next_chunk(self, small_setup):
        _, _, model, prepared = small_setup
        prep = next(p for p in prepared if len(p.chunked.chunks) >= 3)
        k = prep.chunked.effective_k
        blocks = _blocks(model, prep)
        fwd = forward_pass(blocks, prep.chunked.chunks, model.encoder, k)
        perturbed = [Tensor(b.data.copy()) for b in blocks]
        last_content = prep.chunked.chunks[0].content_positions[-1]
        perturbed[0].data[last_content] += 1.0
        fwd_p = forward_pass(perturbed, prep.chunked.chunks, model.encoder, k)
        assert np.abs(fwd[1].data - fwd_p[1].data).max() > 1e-9

    def test_backward_reach_previous_chunk(self, small_setup):
        _, _, model, prepared = small_setup
        prep = next(p for p in prepared if len(p.chunked.chunks) >= 3)
        k = prep.chunked.effective_k
        chunks = prep.chunked.chunks
        blocks = _blocks(model, prep)
        fwd = forward_pass(blocks, chunks, model.encoder, k)
        base = backward_pass(fwd, chunks, model.encoder, k)
        m = len(chunks)
        perturbed_fwd = [Tensor(b.data.copy()) for b in fwd]
        # the backward injection reads the first k content positions of the
        # successor's contextual block
        perturbed_fwd[m - 1].data[chunks[m - 1].content_positions[0]] += 1.0
        out = backward_pass(perturbed_fwd, chunks, model.encoder, k)
        assert np.abs(base[m - 2].data - out[m - 2].data).max() > 1e-9

    def test_single_chunk_document(self, small_setup):
        _, vocab, model, _ = small_setup
        doc = LabeledDocument("tiny", ["Dr", "Doe", "."], [OUTSIDE_ID] * 3, [3])
        prep = prepare_document(doc, vocab, model.label_space, CFG)
        assert len(prep.chunked.chunks) == 1
        blocks = _blocks(model, prep)
        out = multi_hop(blocks, prep.chunked.chunks, model.encoder, 1, prep.chunked.effective_k)
        assert out[0].shape == blocks[0].shape

    def test_k_mismatch_rejected(self, small_setup):
        _, _, model, prepared = small_setup
        prep = next(p for p in prepared if len(p.chunked.chunks) >= 2)
        blocks = _blocks(model, prep)
        with pytest.raises(ValueError):
            forward_pass(blocks, prep.chunked.chunks, model.encoder, prep.chunked.effective_k + 1)


class TestMultiHop:
    @pytest.mark.parametrize("hops", [1, 2, 3])
    def test_shapes_preserved(self, small_setup, hops):
        _, _, model, prepared = small_setup
        prep = prepared[0]
        blocks = _blocks(model, prep)
        out = multi_hop(blocks, prep.chunked.chunks, model.encoder, hops, prep.chunked.effective_k)
        for a, b in zip(blocks, out):
            assert a.shape == b.shape

    def test_one_hop_equals_single_sweep(self, small_setup):
        _, _, model, prepared = small_setup
        prep = prepared[0]
        k = prep.chunked.effective_k
        blocks = _blocks(model, prep)
        via_hop = multi_hop(blocks, prep.chunked.chunks, model.encoder, 1, k)
        direct = backward_pass(
            forward_pass(blocks, prep.chunked.chunks, model.encoder, k),
            prep.chunked.chunks,
            model.encoder,
            k,
        )
        for a, b in zip(via_hop, direct):
            assert np.array_equal(a.data, b.data)

    def test_blocks_stay_finite_over_hops(self, small_setup):
        _, _, model, prepared = small_setup
        for prep in prepared:
            blocks = _blocks(model, prep)
            out = multi_hop(blocks, prep.chunked.chunks, model.encoder, 3, prep.chunked.effective_k)
            for block in out:
                assert np.isfinite(block.data).all()

    def test_zero_hops_rejected(self, small_setup):
        _, _, model, prepared = small_setup
        blocks = _blocks(model, prepared[0])
        with pytest.raises(ValueError):
            multi_hop(blocks, prepared[0].chunked.chunks, model.encoder, 0, 0)


class TestPredict:
    def test_one_prediction_per_token(self, small_setup):
        docs, _, model, prepared = small_setup
        for doc, prep in zip(docs, prepared):
            labels, _ = model.predict_document(prep, rng=0)
            assert len(labels) == len(doc.tokens)

    def test_duplicated_overlap_piece_single_owner(self, small_setup):
        _, _, model, prepared = small_setup
        prep = next(p for p in prepared if len(p.chunked.chunks) >= 2)
        pieces = model.predict_pieces(prep)
        assert len(pieces) == len(prep.piece_parents)

    def test_ownership_modes_agree_on_span_count_type(self, small_setup):
        _, vocab, _, prepared = small_setup
        prep = prepared[0]
        for ownership in ("last", "first", "average"):
            cfg = IsbertConfig(
                capacity=16, d_model=16, n_layers=1, n_heads=2, hops=1,
                overlap=FixedOverlap(0.5), seed=0, overlap_ownership=ownership,
                min_word_freq=50,
            )
            model = IsbertModel(vocab, cfg)
            labels, spans = model.predict_document(prep, rng=0)
            assert len(labels) == prep.n_tokens

    def test_empty_document(self, small_setup):
        _, vocab, model, _ = small_setup
        doc = LabeledDocument("empty", [], [], [])
        prep = prepare_document(doc, vocab, model.label_space, CFG)
        assert model.predict_document(prep, rng=0) == ([], [])


class TestTraining:
    def test_determinism(self):
        docs = [to_labeled(d) for d in synth_generate(9, SynthParams(num_docs=6, lines=(4, 6)))]
        cfg = IsbertConfig(capacity=16, d_model=16, n_layers=1, n_heads=2, hops=1,
                           overlap=FixedOverlap(0.25), lr=2e-3, max_epochs=2,
                           patience=10, seed=7, min_word_freq=50)
        _, _, log_a = train_isbert(docs[:4], docs[4:], cfg)
        _, _, log_b = train_isbert(docs[:4], docs[4:], cfg)
        assert [m.__dict__ for m in log_a] == [m.__dict__ for m in log_b]

    def test_loss_trend_first_epochs(self):
        docs = [to_labeled(d) for d in synth_generate(10, SynthParams(num_docs=8, lines=(4, 6)))]
        cfg = IsbertConfig(capacity=16, d_model=16, n_layers=1, n_heads=2, hops=1,
                           overlap=FixedOverlap(0.25), lr=2e-3, max_epochs=5,
                           patience=10, seed=3, min_word_freq=50)
        vocab = build_vocabulary(docs[:6], cfg)
        model = IsbertModel(vocab, cfg)
        prepared = [prepare_document(d, vocab, model.label_space, cfg) for d in docs[:6]]
        from nameform.nn import autograd as ag
        from nameform.nn.autograd import zero_grads
        from nameform.nn.optim import Adam

        optimizer = Adam(model.parameters(), lr=cfg.lr)
        losses = []
        for _ in range(5):
            total = 0.0
            for prep in prepared:
                zero_grads(model.parameters())
                loss = model.document_loss(prep)
                loss.backward()
                optimizer.step()
                total += loss.item()
            losses.append(total / len(prepared))
        # monotone decreasing trend, allowing one non-decrease
        violations = sum(b >= a for a, b in zip(losses, losses[1:]))
        assert violations <= 1, losses

    def test_overfit_tiny_corpus(self):
        docs = [to_labeled(d) for d in synth_generate(11, SynthParams(num_docs=3, lines=(3, 4)))]
        cfg = IsbertConfig(capacity=16, d_model=24, n_layers=1, n_heads=2, hops=1,
                           overlap=FixedOverlap(0.25), lr=5e-3, max_epochs=60,
                           patience=60, seed=1, min_word_freq=1)
        model, prep_dev, _ = train_isbert(docs, docs, cfg)
        metrics = evaluate_isbert(model, prep_dev, 0, "train")
        assert metrics.token_f > 0.95

    def test_checkpoint_round_trip(self, tmp_path):
        docs = [to_labeled(d) for d in synth_generate(12, SynthParams(num_docs=4, lines=(3, 5)))]
        cfg = IsbertConfig(capacity=16, d_model=16, n_layers=1, n_heads=2, hops=2,
                           overlap=FixedOverlap(0.5), lr=2e-3, max_epochs=1,
                           patience=10, seed=2, min_word_freq=50)
        model, prep_dev, _ = train_isbert(docs[:3], docs[3:], cfg)
        save_isbert(model, tmp_path / "m.ckpt")
        loaded = load_isbert(tmp_path / "m.ckpt")
        for prep in prep_dev:
            assert loaded.predict_document(prep, rng=0) == model.predict_document(prep, rng=0)

    def test_adaptive_policy_round_trips_in_checkpoint(self, tmp_path):
        docs = [to_labeled(d) for d in synth_generate(13, SynthParams(num_docs=4, lines=(3, 5)))]
        cfg = IsbertConfig(capacity=16, d_model=16, n_layers=1, n_heads=2, hops=1,
                           overlap=default_adaptive_policy(16), lr=2e-3, max_epochs=1,
                           patience=10, seed=2, min_word_freq=50)
        model, _, _ = train_isbert(docs[:3], docs[3:], cfg)
        save_isbert(model, tmp_path / "m.ckpt")
        loaded = load_isbert(tmp_path / "m.ckpt")
        assert isinstance(loaded.config.overlap, AdaptiveOverlap)
        assert loaded.config.overlap == model.config.overlap


class TestAdaptiveReduction:
    def test_single_chunk_doc_identical_to_plain_encoding(self, small_setup):
        _, vocab, _, _ = small_setup
        cfg = IsbertConfig(capacity=64, d_model=16, n_layers=1, n_heads=2, hops=1,
                           overlap=default_adaptive_policy(64), seed=0, min_word_freq=50)
        model = IsbertModel(vocab, cfg)
        doc = LabeledDocument("one", ["Dr", "Doe", "is", "here", "."], [OUTSIDE_ID] * 5, [5])
        prep = prepare_document(doc, vocab, model.label_space, cfg)
        assert prep.chunked.effective_k == 0
        assert len(prep.chunked.chunks) == 1
        blocks = _blocks(model, prep)
        via_hops = multi_hop(blocks, prep.chunked.chunks, model.encoder, 1, 0)
        plain = model.encoder(blocks[0])
        assert np.array_equal(via_hops[0].data, plain.data)
