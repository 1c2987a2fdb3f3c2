/** Pure HTML renderers; main.ts injects the output and wires events. */

import type { ContextSnippet, NegationTerm } from "./api.js";
import type { BoardRow } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const PHASE_BADGE: Record<string, string> = {
  undecided: "",
  pending: "saving…",
  accepted: "accepted",
  rejected: "rejected",
  failed: "failed",
};

export function renderCandidateRows(rows: BoardRow[], cursor: number): string {
  if (rows.length === 0) {
    return `<tr><td colspan="6" class="empty">No candidates. Accept some seeds and regenerate.</td></tr>`;
  }
  return rows
    .map((row, i) => {
      const c = row.candidate;
      const decided = row.phase === "accepted" || row.phase === "rejected";
      const badge = PHASE_BADGE[row.phase] ?? "";
      const retry = row.phase === "failed"
        ? `<button class="retry" data-index="${i}" title="${escapeHtml(row.error ?? "")}">retry</button>`
        : "";
      const buttons = decided || row.phase === "pending"
        ? ""
        : `<button class="accept" data-index="${i}">accept</button>
           <button class="reject" data-index="${i}">reject</button>`;
      return `<tr class="row phase-${row.phase}${i === cursor ? " cursor" : ""}" data-index="${i}">
        <td class="phrase">${escapeHtml(c.phrase)}</td>
        <td>${escapeHtml(c.label)}</td>
        <td class="num">${c.similarity.toFixed(3)}</td>
        <td>${escapeHtml(c.nearest_seed)}</td>
        <td class="status">${badge}${row.error ? ` <span class="error">${escapeHtml(row.error)}</span>` : ""}</td>
        <td class="actions">${buttons}${retry}</td>
      </tr>`;
    })
    .join("\n");
}

export function renderProgress(undecided: number, total: number, pending: number): string {
  const done = total - undecided - pending;
  return `${done}/${total} decided, ${undecided} to go${pending ? `, ${pending} saving` : ""}`;
}

export function renderContexts(phrase: string, snippets: ContextSnippet[]): string {
  if (snippets.length === 0) {
    return `<p class="empty">No corpus occurrences of "${escapeHtml(phrase)}".</p>`;
  }
  const items = snippets
    .map((s) => `<li><span class="note-id">${escapeHtml(s.note_id)}</span> ${escapeHtml(s.snippet)}</li>`)
    .join("\n");
  return `<h3>${escapeHtml(phrase)}</h3><ul>${items}</ul>`;
}

export function renderNegationList(terms: NegationTerm[], position: "pre" | "post"): string {
  const rows = terms
    .filter((t) => t.position === position)
    .map((t) => `<li>${escapeHtml(t.phrase)}
      <button class="remove-negation" data-phrase="${escapeHtml(t.phrase)}" data-position="${position}">remove</button></li>`);
  return rows.join("\n") || `<li class="empty">none</li>`;
}
