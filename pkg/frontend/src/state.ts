/** Review-board view model: decision lifecycle per candidate row.
 *
 * Rendering is acknowledge-then-commit: a decision moves a row to "pending"
 * while the POST is in flight and only the server's acknowledgment moves it
 * to its decided state. A failed POST lands in "failed" with the message
 * kept for a retry affordance; nothing is ever rendered decided
 * optimistically.
 */

import type { CandidateRow } from "./api.js";

export type RowPhase = "undecided" | "pending" | "accepted" | "rejected" | "failed";

export interface BoardRow {
  candidate: CandidateRow;
  phase: RowPhase;
  wanted?: "accept" | "reject";
  error?: string;
}

export class ReviewBoard {
  rows: BoardRow[];
  cursor = 0;

  constructor(candidates: CandidateRow[]) {
    this.rows = candidates.map((candidate) => ({
      candidate,
      // server state is the only truth, including after a page reload
      phase: candidate.status === "accepted" || candidate.status === "rejected"
        ? candidate.status
        : "undecided",
    }));
  }

  get undecidedCount(): number {
    return this.rows.filter((r) => r.phase === "undecided" || r.phase === "failed").length;
  }

  get pendingCount(): number {
    return this.rows.filter((r) => r.phase === "pending").length;
  }

  current(): BoardRow | undefined {
    return this.rows[this.cursor];
  }

  moveCursor(delta: number): number {
    if (this.rows.length === 0) {
      this.cursor = 0;
      return this.cursor;
    }
    this.cursor = Math.min(Math.max(this.cursor + delta, 0), this.rows.length - 1);
    return this.cursor;
  }

  /** Start a decision; only undecided or failed rows may enter flight. */
  beginDecision(index: number, decision: "accept" | "reject"): BoardRow | null {
    const row = this.rows[index];
    if (!row || (row.phase !== "undecided" && row.phase !== "failed")) {
      return null;
    }
    row.phase = "pending";
    row.wanted = decision;
    row.error = undefined;
    return row;
  }

  /** Server acknowledged: commit the decided state. */
  acknowledge(index: number, status: "accepted" | "rejected"): void {
    const row = this.rows[index];
    if (!row || row.phase !== "pending") {
      return;
    }
    row.phase = status;
    row.wanted = undefined;
  }

  /** POST failed: keep the row retryable, never silently lost. */
  fail(index: number, message: string): void {
    const row = this.rows[index];
    if (!row || row.phase !== "pending") {
      return;
    }
    row.phase = "failed";
    row.error = message;
  }
}
