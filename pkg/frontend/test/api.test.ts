import { describe, expect, it } from "vitest";

import { ApiError, ServiceClient } from "../src/api.js";

interface Call {
  url: string;
  init?: RequestInit;
}

function fakeFetch(
  handler: (url: string, init?: RequestInit) => Response | Promise<Response>
): { fetch: (url: string, init?: RequestInit) => Promise<Response>; calls: Call[] } {
  const calls: Call[] = [];
  return {
    calls,
    fetch: async (url, init) => {
      calls.push({ url, init });
      return handler(url, init);
    },
  };
}

const json = (body: unknown, status = 200): Response =>
  new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });

describe("ServiceClient", () => {
  it("trims trailing slashes off the base url", async () => {
    const { fetch, calls } = fakeFetch(() => json({ n: 0, runs: [], example_names: {}, test_example_names: {} }));
    await new ServiceClient("http://svc:8100///", fetch).listRuns();
    expect(calls[0].url).toBe("http://svc:8100/runs");
  });

  it("posts the edit list verbatim with nulled-out empty test ids", async () => {
    const { fetch, calls } = fakeFetch(() => json({ ok: true }));
    const edits = [{ op: "remove_example" as const, example_id: 3 }];
    await new ServiceClient("http://svc", fetch).whatIf("s002", edits, "abc123", []);
    expect(calls[0].url).toBe("http://svc/whatif?ref=abc123");
    const body = JSON.parse(String(calls[0].init?.body));
    expect(body).toEqual({ run_id: "s002", edits, test_example_ids: null });
  });

  it("turns a detail string into an ApiError with the server's words", async () => {
    const { fetch } = fakeFetch(() => json({ detail: "no run with id s999" }, 404));
    const err = await new ServiceClient("http://svc", fetch).runDetail("s999").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(404);
    expect(err.message).toBe("no run with id s999");
    expect(err.unreachable).toBe(false);
  });

  it("joins field-error lists from 400 responses", async () => {
    const detail = [
      { loc: ["body", "run_id"], msg: "field required", type: "missing" },
      { loc: ["body", "edits"], msg: "value is not a valid list", type: "type_error" },
    ];
    const { fetch } = fakeFetch(() => json({ detail }, 400));
    const err = await new ServiceClient("http://svc", fetch)
      .whatIf("s002", [])
      .catch((e) => e);
    expect(err.status).toBe(400);
    expect(err.message).toBe("field required; value is not a valid list");
  });

  it("maps a thrown fetch to status 0 so the view can show a connection banner", async () => {
    const client = new ServiceClient("http://svc", async () => {
      throw new TypeError("fetch failed");
    });
    const err = await client.listRuns().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.unreachable).toBe(true);
    expect(err.message).toMatch(/unreachable/);
  });

  it("falls back to a status message when the body is not JSON", async () => {
    const { fetch } = fakeFetch(() => new Response("<html>boom</html>", { status: 500 }));
    const err = await new ServiceClient("http://svc", fetch).listRuns().catch((e) => e);
    expect(err.status).toBe(500);
    expect(err.message).toBe("request failed with status 500");
  });

  it("encodes run ids and refs into paths and queries", async () => {
    const { fetch, calls } = fakeFetch(() => json({}));
    const client = new ServiceClient("http://svc", fetch);
    await client.runDetail("a/b");
    await client.params("x y");
    expect(calls[0].url).toBe("http://svc/runs/a%2Fb");
    expect(calls[1].url).toBe("http://svc/params?ref=x%20y");
  });
});
