/** DOM wiring for the annotation workbench. */

import { AnnotationRecord, Disagreement, ServiceClient } from "./api.js";
import { FI_VALUES, FML_VALUES, snapSelection, TokenForm } from "./labels.js";
import {
  annotateSpan,
  applyGroupLabel,
  emptySession,
  loadDocument,
  saveStaged,
  SessionState,
} from "./session.js";
import {
  renderDisagreements,
  renderDocList,
  renderMask,
  renderText,
  renderValidation,
} from "./views.js";

const api = new ServiceClient("");
let session: SessionState = emptySession();
let suggestions: AnnotationRecord[] = [];
let compareState: { a: AnnotationRecord[]; b: AnnotationRecord[]; list: Disagreement[] } | null =
  null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setStatus(message: string, isError = false): void {
  const status = el<HTMLElement>("status");
  status.textContent = message;
  status.className = isError ? "error" : "";
}

function redraw(): void {
  el<HTMLElement>("text-panel").innerHTML = renderText(
    session.text,
    session.saved,
    session.staged,
    suggestions,
  );
  el<HTMLElement>("doc-title").textContent = session.docId ?? "no document";
  el<HTMLElement>("version").textContent = session.docId ? `v${session.version}` : "";
  if (session.conflict) {
    setStatus("Document changed on the server; reload to continue.", true);
  }
}

function currentForms(tokenCount: number): TokenForm[] {
  const fmlPick = el<HTMLSelectElement>("axis-fml").value as TokenForm["fml"];
  const fiPick = el<HTMLSelectElement>("axis-fi").value as TokenForm["fi"];
  const forms: TokenForm[] = [];
  for (let i = 0; i < tokenCount; i += 1) {
    if (tokenCount >= 2 && i === 0) {
      forms.push({ fml: "First", fi: fiPick });
    } else if (tokenCount >= 2 && i === tokenCount - 1) {
      forms.push({ fml: "Last", fi: fiPick });
    } else {
      forms.push({ fml: fmlPick, fi: fiPick });
    }
  }
  return forms;
}

function selectionOffsets(): { start: number; end: number } | null {
  const selection = window.getSelection();
  if (!selection || selection.rangeCount === 0 || selection.isCollapsed) return null;
  const panel = el<HTMLElement>("text-panel");
  const range = selection.getRangeAt(0);
  const probe = range.cloneRange();
  probe.selectNodeContents(panel);
  probe.setEnd(range.startContainer, range.startOffset);
  const start = probe.toString().length;
  return { start, end: start + range.toString().length };
}

async function onAnnotate(): Promise<void> {
  const offsets = selectionOffsets();
  if (!offsets) {
    setStatus("Select a span of text first.", true);
    return;
  }
  const snapped = snapSelection(session.text, offsets.start, offsets.end);
  if (!snapped) {
    setStatus("Selection covers no tokens.", true);
    return;
  }
  const next = annotateSpan(
    session,
    offsets.start,
    offsets.end,
    currentForms(snapped.tokens.length),
  );
  if (!next) {
    setStatus("Could not stage the selection.", true);
    return;
  }
  session = next;
  setStatus(`Staged ${snapped.tokens.length}-token annotation.`);
  redraw();
}

async function onSave(): Promise<void> {
  session = await saveStaged(api, session);
  if (!session.conflict) setStatus("Saved.");
  redraw();
}

async function onGroupLabel(): Promise<void> {
  const template = el<HTMLInputElement>("template").value.trim();
  const labels = el<HTMLInputElement>("template-labels")
    .value.split(",")
    .map((s) => s.trim())
    .filter(Boolean);
  const result = await applyGroupLabel(api, session, template, labels);
  session = result.state;
  if (!session.conflict) {
    setStatus(`${result.applied} applied, ${result.skipped} skipped.`);
  }
  redraw();
}

async function onMaskView(): Promise<void> {
  if (!session.docId) return;
  const mask = await api.getMask(session.docId);
  el<HTMLElement>("side-panel").innerHTML = renderMask(mask.text);
}

async function onValidate(): Promise<void> {
  if (!session.docId) return;
  const report = await api.validate(session.docId);
  el<HTMLElement>("side-panel").innerHTML = renderValidation(report.ok, report.violations);
}

async function onSuggest(): Promise<void> {
  if (!session.docId) return;
  const result = await api.suggest(session.docId);
  suggestions = result.suggestions;
  setStatus(`${suggestions.length} model suggestions (dashed; annotate to accept).`);
  redraw();
}

async function onCompare(): Promise<void> {
  if (!session.docId) return;
  const other = el<HTMLTextAreaElement>("compare-input").value;
  let parsed: { names?: AnnotationRecord[] };
  try {
    parsed = JSON.parse(other) as { names?: AnnotationRecord[] };
  } catch {
    setStatus("Paste the other annotator's sidecar object first.", true);
    return;
  }
  const a = session.saved;
  const b = parsed.names ?? [];
  const result = await api.compare(session.docId, a, b);
  compareState = { a, b, list: result.disagreements };
  el<HTMLElement>("side-panel").innerHTML = renderDisagreements(result.disagreements);
}

async function onSidePanelClick(event: Event): Promise<void> {
  const target = event.target as HTMLElement;
  const accept = target.getAttribute("data-accept");
  const index = target.getAttribute("data-index");
  if (!accept || index === null || !compareState) return;
  const { resolveDisagreement } = await import("./session.js");
  const disagreement = compareState.list[Number(index)];
  if (!disagreement) return;
  session = resolveDisagreement(
    session,
    disagreement,
    compareState.a,
    compareState.b,
    accept as "a" | "b",
  );
  setStatus(`Resolution staged (side ${accept.toUpperCase()}); save to persist.`);
  redraw();
}

async function openDocument(docId: string): Promise<void> {
  try {
    session = await loadDocument(api, session, docId);
    suggestions = [];
    compareState = null;
    setStatus(`Loaded ${docId}.`);
  } catch (err) {
    session = { ...session, offline: true };
    setStatus(`Service unreachable: ${String(err)}`, true);
  }
  redraw();
}

async function refreshDocList(): Promise<void> {
  const listing = await api.listDocuments();
  el<HTMLElement>("doc-list").innerHTML = renderDocList(listing.docs);
}

function fillAxisPickers(): void {
  el<HTMLSelectElement>("axis-fml").innerHTML = FML_VALUES.map(
    (v) => `<option value="${v}">${v}</option>`,
  ).join("");
  el<HTMLSelectElement>("axis-fi").innerHTML = FI_VALUES.map(
    (v) => `<option value="${v}">${v}</option>`,
  ).join("");
}

export function boot(): void {
  fillAxisPickers();
  void refreshDocList();
  el<HTMLElement>("doc-list").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const doc = target.getAttribute("data-doc");
    if (doc) {
      event.preventDefault();
      void openDocument(doc);
    }
  });
  el<HTMLButtonElement>("annotate").addEventListener("click", () => void onAnnotate());
  el<HTMLButtonElement>("save").addEventListener("click", () => void onSave());
  el<HTMLButtonElement>("group-label").addEventListener("click", () => void onGroupLabel());
  el<HTMLButtonElement>("mask-view").addEventListener("click", () => void onMaskView());
  el<HTMLButtonElement>("validate").addEventListener("click", () => void onValidate());
  el<HTMLButtonElement>("suggest").addEventListener("click", () => void onSuggest());
  el<HTMLButtonElement>("compare").addEventListener("click", () => void onCompare());
  el<HTMLElement>("side-panel").addEventListener("click", (e) => void onSidePanelClick(e));
  el<HTMLButtonElement>("reload").addEventListener("click", () => {
    if (session.docId) void openDocument(session.docId);
  });
}

if (typeof document !== "undefined" && document.getElementById("text-panel")) {
  boot();
}
