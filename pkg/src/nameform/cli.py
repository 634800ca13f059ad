"""Command-line entry point.

Exit codes: 0 success, 1 validation failure, 2 usage error (argparse).
All randomness is governed by ``--seed``.  The corpus directory defaults
to the ``NAMEFORM_CORPUS`` environment variable.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import annotate as ops
from .chunking import FixedOverlap, chunk_document, default_adaptive_policy
from .cognn import CognnConfig, load_cognn, metrics_csv, save_cognn
from .cognn import train as train_cognn_model
from .corpus import read_corpus, read_document, to_labeled, write_corpus, write_document
from .isbert import IsbertConfig, load_isbert, prepare_document, save_isbert, train_isbert
from .labels import TokenLabel, decode_spans
from .metrics import name_prf, token_prf
from .synth import SynthParams, synth_generate


def _corpus_root(value: str | None) -> Path:
    root = value or os.environ.get("NAMEFORM_CORPUS")
    if not root:
        raise SystemExit("no corpus directory given (flag or NAMEFORM_CORPUS)")
    return Path(root)


def _overlap_policy(spec: str, capacity: int):
    if spec == "adaptive":
        return default_adaptive_policy(capacity)
    return FixedOverlap(float(spec))


def _split_sentences_of(docs):
    """Per-sentence training units from document-level token sequences."""
    from .corpus import LabeledDocument

    units = []
    for doc in docs:
        start = 0
        for i, end in enumerate(doc.sentence_ends or [len(doc.tokens)]):
            units.append(
                LabeledDocument(
                    f"{doc.doc_id}#s{i}",
                    doc.tokens[start:end],
                    doc.labels[start:end],
                    [end - start],
                )
            )
            start = end
    return [u for u in units if u.tokens]


def _train_dev_split(items, dev_fraction: float, seed: int):
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(items))
    n_dev = max(1, int(len(items) * dev_fraction))
    dev_idx = set(order[:n_dev].tolist())
    train = [items[i] for i in range(len(items)) if i not in dev_idx]
    dev = [items[i] for i in sorted(dev_idx)]
    return train, dev


def cmd_train_cognn(args) -> int:
    docs = [to_labeled(d) for d in read_corpus(_corpus_root(args.corpus))]
    sentences = _split_sentences_of(docs)
    train, dev = _train_dev_split(sentences, args.dev_fraction, args.seed)
    config = CognnConfig(
        form_axis=args.form_axis,
        fusion=not args.no_fusion,
        hidden=args.hidden,
        embed_dim=args.embed_dim,
        lr=args.lr,
        dropout=args.dropout,
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        seed=args.seed,
    )
    model, log = train_cognn_model(train, dev, config)
    save_cognn(model, args.out)
    if args.metrics:
        Path(args.metrics).write_text(metrics_csv(log))
    print(f"saved checkpoint to {args.out} after {len(log)} epochs")
    return 0


def cmd_train_isbert(args) -> int:
    docs = [to_labeled(d) for d in read_corpus(_corpus_root(args.corpus))]
    train, dev = _train_dev_split(docs, args.dev_fraction, args.seed)
    config = IsbertConfig(
        capacity=args.capacity,
        overlap=_overlap_policy(args.overlap, args.capacity),
        hops=args.hops,
        d_model=args.d_model,
        n_layers=args.layers,
        n_heads=args.heads,
        lr=args.lr,
        max_epochs=args.epochs,
        seed=args.seed,
        min_word_freq=args.min_word_freq,
    )
    model, _, log = train_isbert(train, dev, config)
    save_isbert(model, args.out)
    if args.metrics:
        Path(args.metrics).write_text(metrics_csv(log))
    print(f"saved checkpoint to {args.out} after {len(log)} epochs")
    return 0


def cmd_predict(args) -> int:
    docs = [to_labeled(d) for d in read_corpus(_corpus_root(args.corpus))]
    output: dict[str, dict] = {}
    try:
        model = load_isbert(args.model)
        kind = "isbert"
    except ValueError:
        model = load_cognn(args.model)
        kind = "cognn"
    for doc in docs:
        if kind == "isbert":
            prepared = prepare_document(doc, model.vocab, model.label_space, model.config)
            labels, spans = model.predict_document(prepared, rng=args.seed)
        else:
            labels, spans = model.predict(doc.tokens)
        output[doc.doc_id] = {
            "tokens": doc.tokens,
            "labels": labels,
            "spans": [[s.start_token, s.end_token] for s in spans],
        }
    text = json.dumps(output, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return 0


def cmd_eval(args) -> int:
    pred = json.loads(Path(args.pred).read_text())
    gold = json.loads(Path(args.gold).read_text())
    pred_labels = {k: v["labels"] if isinstance(v, dict) else v for k, v in pred.items()}
    gold_labels = {k: v["labels"] if isinstance(v, dict) else v for k, v in gold.items()}
    shared = sorted(set(pred_labels) & set(gold_labels))
    if not shared:
        raise SystemExit("no documents in common between prediction and gold files")
    report = None
    for doc_id in shared:
        p, g = pred_labels[doc_id], gold_labels[doc_id]
        if len(p) != len(g):
            print(f"{doc_id}: length mismatch", file=sys.stderr)
            return 1
        if args.level == "token":
            r = token_prf(p, g, mode=args.mode)
        else:
            r = name_prf(
                decode_spans([TokenLabel.parse(x) for x in p]),
                decode_spans([TokenLabel.parse(x) for x in g]),
            )
        report = r if report is None else report + r
    print("precision,recall,f1,tp,fp,fn")
    print(report.row())
    return 0


def cmd_synth(args) -> int:
    params = SynthParams(
        num_docs=args.docs,
        lines=(args.min_lines, args.max_lines),
        repetition_rate=args.repetition,
        context_richness=args.richness,
    )
    docs = synth_generate(args.seed, params)
    write_corpus(docs, args.out)
    total_names = sum(len(r.positions) for d in docs for r in d.records)
    print(f"wrote {len(docs)} documents with {total_names} name occurrences to {args.out}")
    return 0


def cmd_chunk_inspect(args) -> int:
    doc = read_document(_corpus_root(args.corpus) / args.doc)
    labeled = to_labeled(doc)
    policy = _overlap_policy(args.overlap, args.capacity)
    cd = chunk_document(
        labeled.tokens, args.capacity, policy, sentence_ends=labeled.sentence_ends, doc_id=doc.doc_id
    )
    print(f"{doc.doc_id}: {len(cd.chunks)} chunks, capacity {cd.capacity}, overlap {cd.effective_k}")
    for i, chunk in enumerate(cd.chunks):
        print(f"  chunk {i}: range {chunk.content_range}, overlap_prev {chunk.overlap_prev}")
        print(f"    {' '.join(chunk.pieces)}")
    return 0


def cmd_annotate(args) -> int:
    root = _corpus_root(args.corpus)
    if args.action == "validate":
        if args.doc:
            docs = [read_document(root / args.doc, validate=False)]
        else:
            docs = read_corpus(root, validate=False)
        total = 0
        for doc in docs:
            for violation in ops.validate_report(doc):
                total += 1
                print(f"{violation.kind}: {violation.doc_id} record={violation.record_index} {violation.detail}")
        print(f"{'PASS' if total == 0 else 'FAIL'}: {total} violations over {len(docs)} documents")
        return 0 if total == 0 else 1
    doc = read_document(root / args.doc)
    if args.action == "index":
        for position in ops.index_positions(doc, args.name, case_sensitive=not args.ignore_case):
            print(position)
        return 0
    if args.action == "mask":
        print(ops.mask(doc))
        return 0
    if args.action == "group-label":
        updated, applied, skipped = ops.group_label(doc, args.template, args.labels.split(","))
        print(f"applied {len(applied)}, skipped {len(skipped)}")
        if args.write:
            write_document(updated, root)
        return 0
    if args.action == "compare":
        other = read_document(Path(args.other))
        for d in ops.compare(doc, other):
            print(f"{d.kind} at {d.span}: {d.details}")
        return 0
    raise SystemExit(f"unknown annotate action {args.action!r}")


def cmd_serve(args) -> int:
    from .service import serve

    model = load_isbert(args.model) if args.model else None
    static = args.static or (Path(__file__).resolve().parents[2] / "frontend" / "dist")
    serve(
        _corpus_root(args.corpus),
        args.port,
        model=model,
        static_root=static if Path(static).is_dir() else None,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nameform", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-cognn", help="train the coupled dual-view tagger")
    p.add_argument("--corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--metrics")
    p.add_argument("--form-axis", default="FI", choices=["FML", "FI"])
    p.add_argument("--no-fusion", action="store_true", help="single-axis baseline")
    p.add_argument("--hidden", type=int, default=100)
    p.add_argument("--embed-dim", type=int, default=100)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--dev-fraction", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_cognn)

    p = sub.add_parser("train-isbert", help="train the overlapped-chunk document tagger")
    p.add_argument("--corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--metrics")
    p.add_argument("--overlap", default="0.5", help="ratio in [0,1) or 'adaptive'")
    p.add_argument("--hops", type=int, default=2)
    p.add_argument("--capacity", type=int, default=64)
    p.add_argument("--d-model", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--min-word-freq", type=int, default=2)
    p.add_argument("--dev-fraction", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_isbert)

    p = sub.add_parser("predict", help="label a corpus with a trained checkpoint")
    p.add_argument("--corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score predictions against gold labels")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--level", choices=["token", "name"], default="token")
    p.add_argument("--mode", choices=["span-only", "fine-grained"], default="span-only")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a seeded synthetic corpus")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--docs", type=int, default=20)
    p.add_argument("--out", required=True)
    p.add_argument("--min-lines", type=int, default=4)
    p.add_argument("--max-lines", type=int, default=10)
    p.add_argument("--repetition", type=float, default=0.3)
    p.add_argument("--richness", type=float, default=0.35)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("chunk-inspect", help="show how a document chunks")
    p.add_argument("--corpus")
    p.add_argument("--doc", required=True)
    p.add_argument("--capacity", type=int, default=64)
    p.add_argument("--overlap", default="0.5")
    p.set_defaults(func=cmd_chunk_inspect)

    p = sub.add_parser("annotate", help="annotation operations")
    p.add_argument("action", choices=["group-label", "index", "mask", "validate", "compare"])
    p.add_argument("--corpus")
    p.add_argument("--doc")
    p.add_argument("--name", help="name string for index")
    p.add_argument("--ignore-case", action="store_true")
    p.add_argument("--template", help="token-form template, e.g. 'F I'")
    p.add_argument("--labels", help="comma-separated fused labels")
    p.add_argument("--other", help="sidecar folder to compare against")
    p.add_argument("--write", action="store_true", help="persist group-label result")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--corpus")
    p.add_argument("--port", type=int, default=8760)
    p.add_argument("--model")
    p.add_argument("--static", help="workbench static files directory")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
