/** Pure render helpers; every view draws service responses, nothing else. */

import { AnnotationRecord, Disagreement, Violation } from "./api.js";

function escapeHtml(raw: string): string {
  return raw
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

interface Highlight {
  start: number;
  end: number;
  cssClass: string;
  title: string;
}

function collectHighlights(
  saved: AnnotationRecord[],
  staged: AnnotationRecord[],
  suggestions: AnnotationRecord[],
): Highlight[] {
  const highlights: Highlight[] = [];
  const push = (records: AnnotationRecord[], cssClass: string) => {
    for (const record of records) {
      for (const position of record.positions) {
        highlights.push({
          start: position,
          end: position + record.text.length,
          cssClass,
          title: record.labels.join(" "),
        });
      }
    }
  };
  push(saved, "saved");
  push(staged, "staged");
  push(suggestions, "suggested");
  return highlights.sort((a, b) => a.start - b.start || b.end - a.end);
}

/** Document text with span highlights (saved, staged, model-suggested). */
export function renderText(
  text: string,
  saved: AnnotationRecord[],
  staged: AnnotationRecord[],
  suggestions: AnnotationRecord[] = [],
): string {
  const highlights = collectHighlights(saved, staged, suggestions);
  let cursor = 0;
  const parts: string[] = [];
  for (const h of highlights) {
    if (h.start < cursor) continue; // overlapping duplicate occurrence
    parts.push(escapeHtml(text.slice(cursor, h.start)));
    parts.push(
      `<mark class="${h.cssClass}" data-start="${h.start}" title="${escapeHtml(h.title)}">` +
        escapeHtml(text.slice(h.start, h.end)) +
        "</mark>",
    );
    cursor = h.end;
  }
  parts.push(escapeHtml(text.slice(cursor)));
  return parts.join("");
}

export function renderMask(masked: string): string {
  return `<pre class="mask-view">${escapeHtml(masked)}</pre>`;
}

export function renderValidation(ok: boolean, violations: Violation[]): string {
  if (ok) {
    return '<p class="validation pass">All annotations consistent.</p>';
  }
  const rows = violations
    .map(
      (v) =>
        `<li><strong>${escapeHtml(v.kind)}</strong> record ${v.record_index ?? "-"}: ` +
        `${escapeHtml(v.detail)}</li>`,
    )
    .join("");
  return `<ul class="validation fail">${rows}</ul>`;
}

export function renderDisagreements(disagreements: Disagreement[]): string {
  if (disagreements.length === 0) {
    return '<p class="compare empty">No disagreements.</p>';
  }
  const rows = disagreements
    .map(
      (d, i) =>
        `<li data-index="${i}"><strong>${escapeHtml(d.kind)}</strong> at ` +
        `[${d.span[0]}, ${d.span[1]}): ${escapeHtml(d.details)} ` +
        `<button data-accept="a" data-index="${i}">accept A</button> ` +
        `<button data-accept="b" data-index="${i}">accept B</button></li>`,
    )
    .join("");
  return `<ul class="compare">${rows}</ul>`;
}

export function renderDocList(
  docs: { id: string; version: number; records: number }[],
): string {
  return docs
    .map(
      (d) =>
        `<li><a href="#" data-doc="${escapeHtml(d.id)}">${escapeHtml(d.id)}</a> ` +
        `<small>v${d.version}, ${d.records} names</small></li>`,
    )
    .join("");
}
