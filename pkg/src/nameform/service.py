"""Local annotation service over HTTP with JSON payloads.

Documents live in a corpus directory; every mutation applies one of the
pure annotation operations, persists the sidecar atomically, and bumps the
document's version.  Saves carry the version the client last saw; a stale
version yields a conflict so concurrent editors cannot overwrite each
other.  Model suggestions, when a checkpoint is loaded, run on a single
inference worker.

Endpoints:
    GET  /docs                      list documents and versions
    GET  /docs/{id}                 text, names, version
    GET  /docs/{id}/mask            proofreading view
    GET  /docs/{id}/validate        quality-check report
    POST /docs/{id}/suggest         model pre-annotations (empty without model)
    POST /docs/{id}/group-label     {template, labels, version}
    POST /docs/{id}/save            {names, version}
    POST /compare                   {doc_id, names_a, names_b}
Static workbench files, when configured, are served under /app/.
"""
from __future__ import annotations

import json
import os
import threading
from dataclasses import asdict
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .annotate import compare, group_label, mask, validate_report
from .corpus import (
    SIDECAR_FILE,
    AnnotatedDocument,
    AnnotationRecord,
    CorpusValidationError,
    _record_from_json,
    _record_to_json,
    read_corpus,
)
MIME_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
}


class AnnotationStore:
    """In-memory documents backed by the corpus directory."""

    def __init__(self, corpus_root: str | Path, model=None):
        self.root = Path(corpus_root)
        self.model = model
        self.docs: dict[str, AnnotatedDocument] = {}
        self.versions: dict[str, int] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        self._inference_lock = threading.Lock()
        for doc in read_corpus(self.root):
            self.docs[doc.doc_id] = doc
            self.versions[doc.doc_id] = 1

    def lock_for(self, doc_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(doc_id, threading.Lock())

    def snapshot(self, doc_id: str) -> tuple[AnnotatedDocument, int]:
        with self.lock_for(doc_id):
            return self.docs[doc_id], self.versions[doc_id]

    def listing(self) -> list[dict]:
        return [
            {"id": doc_id, "version": self.versions[doc_id], "records": len(doc.records)}
            for doc_id, doc in sorted(self.docs.items())
        ]

    def _persist(self, doc: AnnotatedDocument) -> None:
        folder = self.root / doc.doc_id
        folder.mkdir(parents=True, exist_ok=True)
        sidecar = {"names": [_record_to_json(r) for r in doc.records]}
        payload = json.dumps(sidecar, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
        tmp = folder / (SIDECAR_FILE + ".tmp")
        tmp.write_text(payload, encoding="utf-8")
        os.replace(tmp, folder / SIDECAR_FILE)

    def commit(self, doc_id: str, expected_version: int, updated: AnnotatedDocument) -> int:
        """Optimistic write; raises VersionConflict on a stale version."""
        with self.lock_for(doc_id):
            current = self.versions[doc_id]
            if current != expected_version:
                raise VersionConflict(current)
            updated.validate()
            self._persist(updated)
            self.docs[doc_id] = updated
            self.versions[doc_id] = current + 1
            return self.versions[doc_id]

    def suggest(self, doc: AnnotatedDocument) -> list[dict]:
        if self.model is None:
            return []
        with self._inference_lock:
            from .corpus import to_labeled
            from .isbert import prepare_document

            labeled = to_labeled(doc)
            prepared = prepare_document(labeled, self.model.vocab, self.model.label_space, self.model.config)
            predictions, spans = self.model.predict_document(prepared, rng=0)
        tokens = doc.tokens()
        suggestions = []
        for span in spans:
            start = tokens[span.start_token].char_start
            end = tokens[span.end_token].char_end
            labels = [predictions[i] for i in range(span.start_token, span.end_token + 1)]
            suggestions.append(
                {"text": doc.text[start:end], "positions": [start], "labels": labels}
            )
        return suggestions


class VersionConflict(Exception):
    def __init__(self, current: int):
        self.current = current
        super().__init__(f"document version is {current}")


class BadRequest(ValueError):
    pass


def _doc_payload(doc: AnnotatedDocument, version: int) -> dict:
    return {
        "id": doc.doc_id,
        "version": version,
        "text": doc.text,
        "names": [_record_to_json(r) for r in doc.records],
    }


def _parse_records(raw) -> list[AnnotationRecord]:
    if not isinstance(raw, list):
        raise BadRequest("names must be a list")
    try:
        return [_record_from_json(o) for o in raw]
    except (KeyError, TypeError) as err:
        raise BadRequest(f"malformed annotation record: {err}") from err


class AnnotationHandler(BaseHTTPRequestHandler):
    store: AnnotationStore
    static_root: Path | None = None
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    # plumbing ------------------------------------------------------------
    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b"{}"
        try:
            payload = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as err:
            raise BadRequest(f"invalid payload: {err}") from err
        if not isinstance(payload, dict):
            raise BadRequest("payload must be an object")
        return payload

    def _doc_or_404(self, doc_id: str):
        if doc_id not in self.store.docs:
            self._send(404, {"error": f"unknown document {doc_id!r}"})
            return None
        return self.store.snapshot(doc_id)

    def _serve_static(self, path: str) -> None:
        if self.static_root is None:
            self._send(404, {"error": "workbench not built"})
            return
        relative = path[len("/app/") :] or "index.html"
        target = (self.static_root / relative).resolve()
        if not str(target).startswith(str(self.static_root.resolve())) or not target.is_file():
            self._send(404, {"error": "not found"})
            return
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", MIME_TYPES.get(target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    # handlers ------------------------------------------------------------
    def do_GET(self):
        try:
            path = self.path.split("?")[0].rstrip("/") or "/"
            if path == "/docs":
                self._send(200, {"docs": self.store.listing()})
                return
            if path == "/" or self.path.startswith("/app/"):
                self._serve_static("/app/" if path == "/" else self.path)
                return
            parts = path.strip("/").split("/")
            if parts[0] != "docs" or len(parts) not in (2, 3):
                self._send(404, {"error": "not found"})
                return
            snapshot = self._doc_or_404(parts[1])
            if snapshot is None:
                return
            doc, version = snapshot
            if len(parts) == 2:
                self._send(200, _doc_payload(doc, version))
            elif parts[2] == "mask":
                self._send(200, {"id": doc.doc_id, "version": version, "text": mask(doc)})
            elif parts[2] == "validate":
                violations = validate_report(doc)
                self._send(
                    200,
                    {
                        "id": doc.doc_id,
                        "ok": not violations,
                        "violations": [asdict(v) for v in violations],
                    },
                )
            else:
                self._send(404, {"error": "not found"})
        except Exception as err:  # pragma: no cover - last-resort guard
            self._send(500, {"error": str(err)})

    def do_POST(self):
        try:
            path = self.path.split("?")[0].rstrip("/")
            payload = self._read_json()
            if path == "/compare":
                self._compare(payload)
                return
            parts = path.strip("/").split("/")
            if parts[0] != "docs" or len(parts) != 3:
                self._send(404, {"error": "not found"})
                return
            snapshot = self._doc_or_404(parts[1])
            if snapshot is None:
                return
            doc, version = snapshot
            if parts[2] == "suggest":
                self._send(200, {"id": doc.doc_id, "suggestions": self.store.suggest(doc)})
            elif parts[2] == "group-label":
                self._group_label(doc, version, payload)
            elif parts[2] == "save":
                self._save(doc, version, payload)
            else:
                self._send(404, {"error": "not found"})
        except BadRequest as err:
            self._send(400, {"error": str(err)})
        except VersionConflict as err:
            self._send(409, {"error": str(err), "version": err.current})
        except CorpusValidationError as err:
            self._send(400, {"error": str(err)})
        except Exception as err:  # pragma: no cover - last-resort guard
            self._send(500, {"error": str(err)})

    def _group_label(self, doc, version, payload):
        template = payload.get("template")
        labels = payload.get("labels")
        if not isinstance(template, str) or not isinstance(labels, list):
            raise BadRequest("group-label needs a template string and a labels list")
        expected = payload.get("version", version)
        try:
            updated, applied, skipped = group_label(doc, template, labels)
        except ValueError as err:
            raise BadRequest(str(err)) from err
        new_version = self.store.commit(doc.doc_id, expected, updated)
        self._send(
            200,
            {
                "id": doc.doc_id,
                "version": new_version,
                "applied": applied,
                "skipped": skipped,
            },
        )

    def _save(self, doc, version, payload):
        if "version" not in payload or "names" not in payload:
            raise BadRequest("save needs names and the version last seen")
        records = _parse_records(payload["names"])
        updated = AnnotatedDocument(doc.doc_id, doc.text, records)
        new_version = self.store.commit(doc.doc_id, int(payload["version"]), updated)
        self._send(200, {"id": doc.doc_id, "version": new_version})

    def _compare(self, payload):
        doc_id = payload.get("doc_id")
        if doc_id not in self.store.docs:
            self._send(404, {"error": f"unknown document {doc_id!r}"})
            return
        doc, _ = self.store.snapshot(doc_id)
        side_a = AnnotatedDocument(doc.doc_id, doc.text, _parse_records(payload.get("names_a", [])))
        side_b = AnnotatedDocument(doc.doc_id, doc.text, _parse_records(payload.get("names_b", [])))
        disagreements = compare(side_a, side_b)
        self._send(
            200,
            {"id": doc_id, "disagreements": [asdict(d) for d in disagreements]},
        )


def make_server(
    corpus_root: str | Path,
    port: int = 0,
    model=None,
    static_root: str | Path | None = None,
) -> ThreadingHTTPServer:
    """Build (but do not start) the annotation server; port 0 picks a free one."""
    store = AnnotationStore(corpus_root, model=model)
    handler = type(
        "BoundAnnotationHandler",
        (AnnotationHandler,),
        {"store": store, "static_root": Path(static_root) if static_root else None},
    )
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve(corpus_root: str | Path, port: int, model=None, static_root=None) -> None:
    server = make_server(corpus_root, port, model=model, static_root=static_root)
    host, bound_port = server.server_address
    print(f"annotation service on http://{host}:{bound_port}/ (corpus: {corpus_root})", flush=True)
    try:
        server.serve_forever()
    finally:
        server.server_close()
