import { describe, expect, it, vi } from "vitest";

import { ServiceClient, ServiceError } from "../src/api";
import { emptyFindings, jsonResponse, twoFindings } from "./payloads";

function clientWith(fetchImpl: (input: string, init?: RequestInit) => Promise<Response>) {
  return new ServiceClient("http://127.0.0.1:8787", fetchImpl);
}

describe("scan", () => {
  it("posts the document to /api/v1/scan and returns findings", async () => {
    const calls: Array<{ url: string; init?: RequestInit }> = [];
    const client = clientWith(async (url, init) => {
      calls.push({ url, init });
      return jsonResponse(twoFindings);
    });
    const result = await client.scan("<html>x</html>", "html", { include_similar: true });
    expect(result.findings).toHaveLength(2);
    expect(calls[0].url).toBe("http://127.0.0.1:8787/api/v1/scan");
    const body = JSON.parse(String(calls[0].init?.body));
    expect(body).toEqual({
      content: "<html>x</html>",
      content_type: "html",
      options: { include_similar: true },
    });
  });

  it("maps 503 to a retryable ServiceError carrying partials", async () => {
    const client = clientWith(async () =>
      jsonResponse({ error: "providers unreachable", partial: emptyFindings }, 503),
    );
    const err = await client.scan("doc", "text").catch((e) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect(err.status).toBe(503);
    expect(err.retryable).toBe(true);
    expect(err.partial).toEqual(emptyFindings);
  });

  it("maps 400 to a non-retryable error with the service message", async () => {
    const client = clientWith(async () =>
      jsonResponse({ error: "invalid field content_type: 'pdf'" }, 400),
    );
    const err = await client.scan("doc", "text").catch((e) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect(err.retryable).toBe(false);
    expect(err.message).toContain("content_type");
  });

  it("treats network failure as retryable", async () => {
    const client = clientWith(async () => {
      throw new TypeError("fetch failed");
    });
    const err = await client.scan("doc").catch((e) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect(err.status).toBeNull();
    expect(err.retryable).toBe(true);
  });

  it("follows the async job flow on 202", async () => {
    vi.useFakeTimers();
    try {
      let polls = 0;
      const client = clientWith(async (url) => {
        if (url.endsWith("/api/v1/scan")) return jsonResponse({ job_id: "j1" }, 202);
        polls += 1;
        if (polls < 2) return jsonResponse({ status: "pending" });
        return jsonResponse({ status: "done", result: twoFindings });
      });
      const pending = client.scan("a big document", "text");
      await vi.advanceTimersByTimeAsync(1000);
      const result = await pending;
      expect(result.findings).toHaveLength(2);
      expect(polls).toBe(2);
    } finally {
      vi.useRealTimers();
    }
  });
});

describe("similar + labels", () => {
  it("builds the similar query string", async () => {
    const urls: string[] = [];
    const client = clientWith(async (url) => {
      urls.push(url);
      return jsonResponse({ similar: [] });
    });
    await client.similar("una cláusula", 5);
    expect(urls[0]).toBe(
      "http://127.0.0.1:8787/api/v1/similar?clause_text=una+cl%C3%A1usula&k=5",
    );
  });

  it("fetches the taxonomy", async () => {
    const client = clientWith(async (url) => {
      expect(url).toBe("http://127.0.0.1:8787/api/v1/labels");
      return jsonResponse({ labels: [] });
    });
    const result = await client.labels();
    expect(result.labels).toEqual([]);
  });

  it("propagates similar failures with status", async () => {
    const client = clientWith(async () => jsonResponse({ error: "down" }, 503));
    const err = await client.similar("texto", 3).catch((e) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect(err.status).toBe(503);
  });
});
