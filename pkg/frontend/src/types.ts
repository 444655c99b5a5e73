/** Wire types for the sketchscene pipeline service (JSON documents as the
 * HTTP API sends and receives them). */

export const SCHEMA_VERSION = 1;

export interface BoxDoc {
  left: number;
  top: number;
  width: number;
  height: number;
}

/** Polyline in scene-pixel coordinates. */
export type Stroke = Array<[number, number]>;

export interface SceneObjectDoc {
  object_id: string;
  class_label: string;
  box: BoxDoc;
  prompt_text?: string;
  strokes?: Stroke[];
}

export interface SceneDocument {
  schema_version: number;
  scene_id: string;
  background_text: string;
  width: number;
  height: number;
  created_at: string;
  sketch_path: string;
  objects: SceneObjectDoc[];
  /** Unknown top-level keys round-trip through the service untouched;
   * the studio stores loose (un-annotated) strokes under one of them. */
  [extra: string]: unknown;
}

export interface SceneRef {
  scene_id: string;
  revision: number;
}

export interface SceneEnvelope {
  document: SceneDocument;
  revision: number;
  has_sketch: boolean;
}

export interface ViolationDoc {
  code: string;
  message: string;
  object_id?: string;
}

export type JobKind = "objects" | "train" | "render" | "sweep";

export type JobStatus =
  | "queued"
  | "running"
  | "succeeded"
  | "failed"
  | "cancelled";

export interface RenderParams {
  steps?: number;
  alpha?: number;
  seed?: number;
  guidance_scale?: number;
  alphas?: number[];
}

export interface JobDoc {
  job_id: string;
  scene_id: string;
  kind: JobKind;
  params: Record<string, unknown>;
  status: JobStatus;
  attempts: number;
  max_attempts: number;
  seq: number;
  idempotency_key: string | null;
  cancel_requested: boolean;
  result: Record<string, unknown> | null;
  error: { type: string; message: string; violations?: ViolationDoc[] } | null;
}

export interface EventDoc {
  event_seq: number;
  type: string;
  job_id: string;
  scene_id: string;
  status: JobStatus;
  [extra: string]: unknown;
}

export interface RenderOutputDoc {
  image_sha256: string;
  image_path: string;
}

export interface RenderDiagnosticsDoc {
  fg_fidelity: number;
  seam_score: number;
  [extra: string]: unknown;
}

/** `result` document of a succeeded render job. */
export interface RenderJobResult {
  render_id: string;
  output: RenderOutputDoc;
  diagnostics: RenderDiagnosticsDoc;
}

/** `result` document of a succeeded objects job. */
export interface ObjectsJobResult {
  objects: Array<{ object_id: string; seed: number; attempts: number }>;
}

/** `result` document of a succeeded train job. */
export interface TrainJobResult {
  identities: Record<string, { token: string; steps_trained: number }>;
}

export interface RenderManifest {
  schema_version: number;
  kind: string;
  render_id: string;
  scene_id: string;
  config: { steps: number; alpha: number; seed: number; guidance_scale: number };
  output: RenderOutputDoc;
  diagnostics: RenderDiagnosticsDoc;
  [extra: string]: unknown;
}

export interface CapabilitiesDoc {
  backend_profile: { name: string; [extra: string]: unknown };
  defaults: { steps: number; alpha: number; canvas: number; sweep: number[] };
  object_canvas: number;
}
