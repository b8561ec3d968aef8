/** Thin fetch client for the prioritization service.
 *
 * Every non-2xx response becomes a ServiceError carrying the HTTP status and
 * the service's own detail string, verbatim, so the UI can show exactly what
 * the server said.
 */

import type {
  Annotations,
  ConfigDoc,
  ConfigInfo,
  HealthInfo,
  RunResponse,
} from "./model.js";

export class ServiceError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ServiceError";
    this.status = status;
    this.detail = detail;
  }
}

export interface RunRequest {
  frame_id: string;
  config?: ConfigDoc;
  model?: { alpha: number[]; lambda?: number };
}

async function raise(resp: Response): Promise<never> {
  let detail = resp.statusText || "request failed";
  try {
    const body = (await resp.json()) as { detail?: unknown };
    if (typeof body.detail === "string") detail = body.detail;
    else if (body.detail !== undefined) detail = JSON.stringify(body.detail);
  } catch {
    // non-JSON body: keep the status text
  }
  throw new ServiceError(resp.status, detail);
}

export class ApiClient {
  readonly base: string;
  private readonly fetchImpl: typeof fetch;

  constructor(base: string, fetchImpl: typeof fetch = fetch) {
    this.base = base.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl;
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.base + path);
    if (!resp.ok) await raise(resp);
    return (await resp.json()) as T;
  }

  health(): Promise<HealthInfo> {
    return this.getJson("/api/health");
  }

  configInfo(): Promise<ConfigInfo> {
    return this.getJson("/api/config");
  }

  async uploadFrame(image: Blob, depth?: Blob): Promise<string> {
    const form = new FormData();
    form.append("image", image, "image.png");
    if (depth !== undefined) form.append("depth", depth, "depth.ard1");
    const resp = await this.fetchImpl(this.base + "/api/frames", {
      method: "POST",
      body: form,
    });
    if (!resp.ok) await raise(resp);
    const body = (await resp.json()) as { frame_id: string };
    return body.frame_id;
  }

  async run(req: RunRequest): Promise<RunResponse> {
    const resp = await this.fetchImpl(this.base + "/api/run", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
    if (!resp.ok) await raise(resp);
    return (await resp.json()) as RunResponse;
  }

  annotations(runId: string): Promise<Annotations> {
    return this.getJson(`/api/run/${runId}/annotations`);
  }

  frameImageUrl(frameId: string): string {
    return `${this.base}/api/frames/${frameId}/image.png`;
  }

  overlayUrl(runId: string): string {
    return `${this.base}/api/run/${runId}/overlay.png`;
  }

  fusedUrl(runId: string): string {
    return `${this.base}/api/run/${runId}/fused.png`;
  }

  componentUrl(runId: string, name: string): string {
    return `${this.base}/api/run/${runId}/component/${name}.png`;
  }
}
