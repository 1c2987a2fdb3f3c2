/** Keyboard-first triage: a=accept, r=reject, j/k=navigate, enter=retry. */

export type KeyAction =
  | { kind: "move"; delta: 1 | -1 }
  | { kind: "decide"; decision: "accept" | "reject" }
  | { kind: "retry" }
  | null;

export function actionForKey(key: string): KeyAction {
  switch (key) {
    case "j":
      return { kind: "move", delta: 1 };
    case "k":
      return { kind: "move", delta: -1 };
    case "a":
      return { kind: "decide", decision: "accept" };
    case "r":
      return { kind: "decide", decision: "reject" };
    case "Enter":
      return { kind: "retry" };
    default:
      return null;
  }
}
