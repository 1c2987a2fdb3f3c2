import { describe, expect, it } from "vitest";

import { NegationEditor } from "../src/negations.js";

describe("NegationEditor", () => {
  const editor = new NegationEditor([
    { phrase: "no", position: "pre" },
    { phrase: "negative", position: "post" },
  ]);

  it("accepts a new phrase", () => {
    expect(editor.validateAdd("no sign of", "pre")).toBeNull();
  });

  it("rejects duplicates inline", () => {
    expect(editor.validateAdd("no", "pre")).toMatch(/already/);
    expect(editor.validateAdd("NO", "pre")).toMatch(/already/); // case-folded
  });

  it("allows the same phrase in the other position", () => {
    expect(editor.validateAdd("negative", "pre")).toBeNull();
  });

  it("rejects empty phrases and bad positions", () => {
    expect(editor.validateAdd("   ", "pre")).toMatch(/empty/);
    expect(editor.validateAdd("x", "before")).toMatch(/pre or post/);
  });

  it("splits terms by position", () => {
    expect(editor.byPosition("pre").map((t) => t.phrase)).toEqual(["no"]);
    expect(editor.byPosition("post").map((t) => t.phrase)).toEqual(["negative"]);
  });
});
