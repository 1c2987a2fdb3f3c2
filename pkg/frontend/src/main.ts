/** Wiring: fetch state from the review service, render, handle input. */

import { ApiClient, ApiError } from "./api.js";
import { actionForKey } from "./keyboard.js";
import { NegationEditor } from "./negations.js";
import {
  renderCandidateRows,
  renderContexts,
  renderNegationList,
  renderProgress,
} from "./render.js";
import { ReviewBoard } from "./state.js";

const api = new ApiClient();

let board = new ReviewBoard([]);
let activeLabel = "";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function redraw(): void {
  el<HTMLTableSectionElement>("candidate-rows").innerHTML =
    renderCandidateRows(board.rows, board.cursor);
  el<HTMLElement>("progress").textContent =
    renderProgress(board.undecidedCount, board.rows.length, board.pendingCount);
}

async function reloadCandidates(): Promise<void> {
  const page = await api.candidates({ label: activeLabel || undefined, limit: 500 });
  board = new ReviewBoard(page.candidates);
  redraw();
  void showContexts();
}

async function showContexts(): Promise<void> {
  const row = board.current();
  const panel = el<HTMLElement>("context-panel");
  if (!row) {
    panel.innerHTML = "";
    return;
  }
  try {
    const snippets = await api.contexts(row.candidate.phrase);
    if (board.current() === row) {
      panel.innerHTML = renderContexts(row.candidate.phrase, snippets);
    }
  } catch (error) {
    panel.innerHTML = `<p class="error">${String(error)}</p>`;
  }
}

async function decide(index: number, decision: "accept" | "reject"): Promise<void> {
  const row = board.beginDecision(index, decision);
  if (!row) {
    return;
  }
  redraw();
  try {
    const ack = await api.decide(row.candidate.phrase, row.candidate.label, decision);
    board.acknowledge(index, ack.status);
  } catch (error) {
    const message = error instanceof ApiError ? error.message : String(error);
    board.fail(index, message);
  }
  redraw();
}

function handleKey(event: KeyboardEvent): void {
  if ((event.target as HTMLElement | null)?.tagName === "INPUT") {
    return;
  }
  const action = actionForKey(event.key);
  if (!action) {
    return;
  }
  event.preventDefault();
  if (action.kind === "move") {
    board.moveCursor(action.delta);
    redraw();
    void showContexts();
  } else if (action.kind === "decide") {
    void decide(board.cursor, action.decision);
  } else if (action.kind === "retry") {
    const row = board.current();
    if (row?.phase === "failed" && row.wanted) {
      void decide(board.cursor, row.wanted);
    }
  }
}

async function refreshNegations(): Promise<void> {
  const editor = new NegationEditor(await api.negations());
  el<HTMLElement>("pre-negations").innerHTML = renderNegationList(editor.terms, "pre");
  el<HTMLElement>("post-negations").innerHTML = renderNegationList(editor.terms, "post");
  el<HTMLElement>("negation-error").textContent = "";
  el<HTMLElement>("negation-form").dataset.terms = JSON.stringify(editor.terms);
}

async function addNegation(): Promise<void> {
  const phraseInput = el<HTMLInputElement>("negation-phrase");
  const position = el<HTMLSelectElement>("negation-position").value as "pre" | "post";
  const editor = new NegationEditor(
    JSON.parse(el<HTMLElement>("negation-form").dataset.terms ?? "[]"),
  );
  const problem = editor.validateAdd(phraseInput.value, position);
  if (problem) {
    el<HTMLElement>("negation-error").textContent = problem;
    return;
  }
  try {
    await api.addNegation(phraseInput.value.trim().toLowerCase(), position);
    phraseInput.value = "";
    await refreshNegations();
  } catch (error) {
    el<HTMLElement>("negation-error").textContent =
      error instanceof ApiError ? error.message : String(error);
  }
}

async function boot(): Promise<void> {
  const labels = await api.labels();
  const select = el<HTMLSelectElement>("label-filter");
  select.innerHTML =
    `<option value="">all labels</option>` +
    labels.map((l) => `<option value="${l}">${l}</option>`).join("");
  select.addEventListener("change", () => {
    activeLabel = select.value;
    void reloadCandidates();
  });

  el<HTMLElement>("candidate-rows").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const indexAttr = target.dataset.index ?? target.closest("tr")?.dataset.index;
    if (indexAttr === undefined) {
      return;
    }
    const index = Number(indexAttr);
    if (target.classList.contains("accept")) {
      void decide(index, "accept");
    } else if (target.classList.contains("reject")) {
      void decide(index, "reject");
    } else if (target.classList.contains("retry")) {
      const row = board.rows[index];
      if (row?.wanted) {
        void decide(index, row.wanted);
      }
    } else {
      board.cursor = index;
      redraw();
      void showContexts();
    }
  });

  el<HTMLButtonElement>("regenerate").addEventListener("click", async () => {
    await api.regenerate();
    await reloadCandidates();
  });

  el<HTMLButtonElement>("add-negation").addEventListener("click", () => {
    void addNegation();
  });
  el<HTMLElement>("pre-negations").parentElement?.parentElement?.addEventListener(
    "click",
    async (event) => {
      const target = event.target as HTMLElement;
      if (target.classList.contains("remove-negation")) {
        await api.removeNegation(
          target.dataset.phrase ?? "",
          (target.dataset.position ?? "pre") as "pre" | "post",
        );
        await refreshNegations();
      }
    },
  );

  document.addEventListener("keydown", handleKey);
  await reloadCandidates();
  await refreshNegations();
}

void boot();
