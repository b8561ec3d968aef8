import { describe, expect, it } from "vitest";

import { ApiClient, ServiceError } from "../src/api.js";

interface Call {
  url: string;
  init?: RequestInit;
}

function mockFetch(
  responder: (url: string, init?: RequestInit) => Response,
): { fetch: typeof fetch; calls: Call[] } {
  const calls: Call[] = [];
  const impl = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    calls.push({ url, init });
    return responder(url, init);
  }) as typeof fetch;
  return { fetch: impl, calls };
}

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

describe("ApiClient", () => {
  it("strips trailing slashes from the base url", () => {
    const { fetch } = mockFetch(() => jsonResponse({}));
    const client = new ApiClient("http://x:1///", fetch);
    expect(client.base).toBe("http://x:1");
    expect(client.overlayUrl("abc")).toBe("http://x:1/api/run/abc/overlay.png");
    expect(client.componentUrl("abc", "dog")).toBe(
      "http://x:1/api/run/abc/component/dog.png",
    );
    expect(client.frameImageUrl("f00")).toBe(
      "http://x:1/api/frames/f00/image.png",
    );
  });

  it("posts run requests as JSON and parses the response", async () => {
    const { fetch, calls } = mockFetch(() =>
      jsonResponse({ run_id: "r1", report: { ranking: [1] } }),
    );
    const client = new ApiClient("http://svc", fetch);
    const resp = await client.run({
      frame_id: "f1",
      config: { seed: 3 },
      model: { alpha: [1, 0, 0, 0, 0] },
    });
    expect(resp.run_id).toBe("r1");
    expect(calls).toHaveLength(1);
    expect(calls[0]!.url).toBe("http://svc/api/run");
    expect(calls[0]!.init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0]!.init?.body))).toEqual({
      frame_id: "f1",
      config: { seed: 3 },
      model: { alpha: [1, 0, 0, 0, 0] },
    });
  });

  it("surfaces service errors verbatim with their HTTP status", async () => {
    const { fetch } = mockFetch(() =>
      jsonResponse({ detail: "a run is already in flight for this frame" }, 409),
    );
    const client = new ApiClient("http://svc", fetch);
    const err = await client.run({ frame_id: "f" }).catch((e) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect(err.status).toBe(409);
    expect(err.detail).toBe("a run is already in flight for this frame");
    expect(err.message).toBe(
      "HTTP 409: a run is already in flight for this frame",
    );
  });

  it("falls back to the status text for non-JSON error bodies", async () => {
    const { fetch } = mockFetch(
      () => new Response("<html>boom</html>", { status: 502, statusText: "Bad Gateway" }),
    );
    const client = new ApiClient("http://svc", fetch);
    const err = await client.health().catch((e) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect(err.status).toBe(502);
    expect(err.detail).toBe("Bad Gateway");
  });

  it("uploads frames as multipart form data", async () => {
    const { fetch, calls } = mockFetch(() => jsonResponse({ frame_id: "abc123" }, 201));
    const client = new ApiClient("http://svc", fetch);
    const frameId = await client.uploadFrame(
      new Blob([new Uint8Array([1, 2, 3])]),
      new Blob([new Uint8Array([4, 5])]),
    );
    expect(frameId).toBe("abc123");
    const body = calls[0]!.init?.body;
    expect(body).toBeInstanceOf(FormData);
    const form = body as FormData;
    expect(form.get("image")).toBeInstanceOf(Blob);
    expect(form.get("depth")).toBeInstanceOf(Blob);
  });

  it("omits the depth part when no depth is given", async () => {
    const { fetch, calls } = mockFetch(() => jsonResponse({ frame_id: "x" }, 201));
    const client = new ApiClient("http://svc", fetch);
    await client.uploadFrame(new Blob([new Uint8Array([1])]));
    const form = calls[0]!.init?.body as FormData;
    expect(form.get("depth")).toBeNull();
  });
});
