/** Typed HTTP client for the pipeline service.  Every studio interaction
 * with the backend goes through this module — the UI never touches
 * artifacts or workspace files directly. */

import type {
  CapabilitiesDoc,
  EventDoc,
  JobDoc,
  JobKind,
  RenderManifest,
  SceneDocument,
  SceneEnvelope,
  SceneRef,
  ViolationDoc,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

/** Error responses carry `{error: {type, message, violations?}}`. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly errorType: string,
    message: string,
    readonly violations: ViolationDoc[] = [],
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function raiseFor(response: Response): Promise<never> {
  let errorType = "UnknownError";
  let message = `HTTP ${response.status}`;
  let violations: ViolationDoc[] = [];
  try {
    const body = (await response.json()) as {
      error?: { type?: string; message?: string; violations?: ViolationDoc[] };
      detail?: unknown;
    };
    if (body.error) {
      errorType = body.error.type ?? errorType;
      message = body.error.message ?? message;
      violations = body.error.violations ?? [];
    } else if (body.detail !== undefined) {
      // FastAPI request-model validation errors.
      errorType = "RequestValidationError";
      message = JSON.stringify(body.detail);
    }
  } catch {
    // Non-JSON error body; keep the status-line message.
  }
  throw new ApiError(response.status, errorType, message, violations);
}

export class StudioClient {
  private readonly fetchLike: FetchLike;

  constructor(
    readonly baseUrl: string,
    fetchLike?: FetchLike,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchLike = fetchLike ?? ((url, init) => fetch(url, init));
  }

  private async request(
    method: string,
    path: string,
    options: { json?: unknown; headers?: Record<string, string> } = {},
  ): Promise<Response> {
    const init: RequestInit = { method, headers: { ...options.headers } };
    if (options.json !== undefined) {
      init.body = JSON.stringify(options.json);
      (init.headers as Record<string, string>)["Content-Type"] =
        "application/json";
    }
    const response = await this.fetchLike(this.baseUrl + path, init);
    if (!response.ok) await raiseFor(response);
    return response;
  }

  private async json<T>(
    method: string,
    path: string,
    options: { json?: unknown; headers?: Record<string, string> } = {},
  ): Promise<T> {
    const response = await this.request(method, path, options);
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.json("GET", "/healthz");
  }

  capabilities(): Promise<CapabilitiesDoc> {
    return this.json("GET", "/capabilities");
  }

  createScene(
    document: SceneDocument,
    sketchPngB64?: string,
  ): Promise<SceneRef> {
    const payload: Record<string, unknown> = { document };
    if (sketchPngB64 !== undefined) payload.sketch_png_b64 = sketchPngB64;
    return this.json("POST", "/scenes", { json: payload });
  }

  listScenes(): Promise<SceneRef[]> {
    return this.json<{ scenes: SceneRef[] }>("GET", "/scenes").then(
      (body) => body.scenes,
    );
  }

  getScene(sceneId: string): Promise<SceneEnvelope> {
    return this.json("GET", `/scenes/${encodeURIComponent(sceneId)}`);
  }

  updateScene(
    sceneId: string,
    document: SceneDocument,
    revision: number,
    sketchPngB64?: string,
  ): Promise<SceneRef> {
    const payload: Record<string, unknown> = { document, revision };
    if (sketchPngB64 !== undefined) payload.sketch_png_b64 = sketchPngB64;
    return this.json("PUT", `/scenes/${encodeURIComponent(sceneId)}`, {
      json: payload,
    });
  }

  async getSketchPng(sceneId: string): Promise<Uint8Array> {
    const response = await this.request(
      "GET",
      `/scenes/${encodeURIComponent(sceneId)}/sketch`,
    );
    return new Uint8Array(await response.arrayBuffer());
  }

  getValidation(sceneId: string): Promise<ViolationDoc[]> {
    return this.json<{ violations: ViolationDoc[] }>(
      "GET",
      `/scenes/${encodeURIComponent(sceneId)}/validation`,
    ).then((body) => body.violations);
  }

  submitJob(
    sceneId: string,
    kind: JobKind,
    params: Record<string, unknown>,
    idempotencyKey?: string,
  ): Promise<JobDoc> {
    const headers: Record<string, string> = {};
    if (idempotencyKey !== undefined) headers["Idempotency-Key"] = idempotencyKey;
    return this.json("POST", `/scenes/${encodeURIComponent(sceneId)}/jobs`, {
      json: { kind, params },
      headers,
    });
  }

  getJob(jobId: string): Promise<JobDoc> {
    return this.json("GET", `/jobs/${encodeURIComponent(jobId)}`);
  }

  listJobs(sceneId: string): Promise<JobDoc[]> {
    return this.json<{ jobs: JobDoc[] }>(
      "GET",
      `/scenes/${encodeURIComponent(sceneId)}/jobs`,
    ).then((body) => body.jobs);
  }

  cancelJob(jobId: string): Promise<JobDoc> {
    return this.json("POST", `/jobs/${encodeURIComponent(jobId)}/cancel`);
  }

  /** Long-poll the NDJSON event feed; returns events with seq > after. */
  async pollEvents(after: number, timeoutS = 0): Promise<EventDoc[]> {
    const response = await this.request(
      "GET",
      `/events?after=${after}&timeout=${timeoutS}`,
    );
    const text = await response.text();
    return text
      .split("\n")
      .filter((line) => line.trim().length > 0)
      .map((line) => JSON.parse(line) as EventDoc);
  }

  async getArtifact(digest: string): Promise<Uint8Array> {
    const response = await this.request(
      "GET",
      `/artifacts/${encodeURIComponent(digest)}`,
    );
    return new Uint8Array(await response.arrayBuffer());
  }

  listRenders(sceneId: string): Promise<RenderManifest[]> {
    return this.json<{ renders: RenderManifest[] }>(
      "GET",
      `/scenes/${encodeURIComponent(sceneId)}/renders`,
    ).then((body) => body.renders);
  }
}
