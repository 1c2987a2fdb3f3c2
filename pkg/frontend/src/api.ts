/** Typed client for the review service JSON API. */

export interface CandidateRow {
  phrase: string;
  label: string;
  similarity: number;
  nearest_seed: string;
  status: "undecided" | "seed" | "accepted" | "rejected";
}

export interface CandidatePage {
  total: number;
  offset: number;
  candidates: CandidateRow[];
  version: number;
}

export interface SimclinEntry {
  phrase: string;
  label: string;
  similarity: number | null;
  status: string;
  provenance: string;
}

export interface LexiconDoc {
  threshold: number;
  simclins: SimclinEntry[];
  negations: NegationTerm[];
  version: number;
}

export interface NegationTerm {
  phrase: string;
  position: "pre" | "post";
}

export interface DecisionAck {
  ok: boolean;
  phrase: string;
  label: string;
  status: "accepted" | "rejected";
  version: number;
}

export interface ContextSnippet {
  note_id: string;
  snippet: string;
}

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  let body: unknown = null;
  try {
    body = await response.json();
  } catch {
    // fall through to the generic error below
  }
  if (!response.ok) {
    const err = (body as { error?: { code?: string; message?: string } } | null)?.error;
    throw new ApiError(err?.code ?? "http", err?.message ?? response.statusText, response.status);
  }
  return body as T;
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  private url(path: string, params?: Record<string, string | number | undefined>): string {
    const query = params
      ? Object.entries(params)
          .filter(([, v]) => v !== undefined && v !== "")
          .map(([k, v]) => `${encodeURIComponent(k)}=${encodeURIComponent(String(v))}`)
          .join("&")
      : "";
    return this.baseUrl + path + (query ? `?${query}` : "");
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(this.url(path), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return asJson<T>(response);
  }

  async labels(): Promise<string[]> {
    const doc = await asJson<{ labels: string[] }>(await fetch(this.url("/api/labels")));
    return doc.labels;
  }

  async candidates(opts: { label?: string; offset?: number; limit?: number } = {}): Promise<CandidatePage> {
    return asJson(await fetch(this.url("/api/candidates", opts)));
  }

  async lexicon(): Promise<LexiconDoc> {
    return asJson(await fetch(this.url("/api/lexicon")));
  }

  async decide(phrase: string, label: string, decision: "accept" | "reject"): Promise<DecisionAck> {
    return this.post("/api/decision", { phrase, label, decision });
  }

  async regenerate(): Promise<{ ok: boolean; count: number; version: number }> {
    return this.post("/api/regenerate", {});
  }

  async contexts(phrase: string): Promise<ContextSnippet[]> {
    const doc = await asJson<{ contexts: ContextSnippet[] }>(
      await fetch(this.url("/api/contexts", { phrase })),
    );
    return doc.contexts;
  }

  async negations(): Promise<NegationTerm[]> {
    const doc = await asJson<{ negations: NegationTerm[] }>(
      await fetch(this.url("/api/negations")),
    );
    return doc.negations;
  }

  async addNegation(phrase: string, position: "pre" | "post"): Promise<void> {
    await this.post("/api/negations", { phrase, position });
  }

  async removeNegation(phrase: string, position: "pre" | "post"): Promise<void> {
    await this.post("/api/negations", { phrase, position, action: "remove" });
  }
}
