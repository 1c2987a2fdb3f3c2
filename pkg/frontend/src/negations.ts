/** Negation editor view model with inline validation. */

import type { NegationTerm } from "./api.js";

export class NegationEditor {
  constructor(public terms: NegationTerm[]) {}

  /** Returns an inline validation message, or null when the add is allowed. */
  validateAdd(phrase: string, position: string): string | null {
    const trimmed = phrase.trim().toLowerCase();
    if (!trimmed) {
      return "negation phrase must not be empty";
    }
    if (position !== "pre" && position !== "post") {
      return "position must be pre or post";
    }
    if (this.terms.some((t) => t.phrase === trimmed && t.position === position)) {
      return `"${trimmed}" (${position}) is already in the list`;
    }
    return null;
  }

  byPosition(position: "pre" | "post"): NegationTerm[] {
    return this.terms.filter((t) => t.position === position);
  }
}
