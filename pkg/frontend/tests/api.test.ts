import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

type FetchArgs = { url: string; init?: RequestInit };

function stubFetch(status: number, body: unknown): FetchArgs[] {
  const calls: FetchArgs[] = [];
  vi.stubGlobal("fetch", async (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  });
  return calls;
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("ApiClient", () => {
  it("builds candidate queries with only the provided params", async () => {
    const calls = stubFetch(200, { total: 0, offset: 0, candidates: [], version: 1 });
    const client = new ApiClient();
    await client.candidates({ label: "gait", limit: 25 });
    expect(calls[0]?.url).toBe("/api/candidates?label=gait&limit=25");
    await client.candidates();
    expect(calls[1]?.url).toBe("/api/candidates");
  });

  it("posts decisions as JSON", async () => {
    const calls = stubFetch(200, {
      ok: true, phrase: "x", label: "gait", status: "accepted", version: 2,
    });
    const ack = await new ApiClient().decide("x", "gait", "accept");
    expect(ack.status).toBe("accepted");
    expect(calls[0]?.init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0]?.init?.body))).toEqual({
      phrase: "x", label: "gait", decision: "accept",
    });
  });

  it("sends the remove action for negation deletion", async () => {
    const calls = stubFetch(200, { ok: true, version: 3 });
    await new ApiClient().removeNegation("negative", "post");
    expect(JSON.parse(String(calls[0]?.init?.body))).toEqual({
      phrase: "negative", position: "post", action: "remove",
    });
  });

  it("raises ApiError with the server's code and message", async () => {
    stubFetch(409, { error: { code: "conflict", message: "seed is immutable" } });
    const failure = await new ApiClient().decide("anchor", "gait", "reject")
      .catch((e: unknown) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect((failure as ApiError).code).toBe("conflict");
    expect((failure as ApiError).status).toBe(409);
    expect((failure as ApiError).message).toMatch(/immutable/);
  });

  it("encodes context phrases", async () => {
    const calls = stubFetch(200, { contexts: [] });
    await new ApiClient().contexts("no sign of");
    expect(calls[0]?.url).toBe("/api/contexts?phrase=no%20sign%20of");
  });

  it("prefixes an explicit base url", async () => {
    const calls = stubFetch(200, { labels: [] });
    await new ApiClient("http://127.0.0.1:9999").labels();
    expect(calls[0]?.url).toBe("http://127.0.0.1:9999/api/labels");
  });
});
