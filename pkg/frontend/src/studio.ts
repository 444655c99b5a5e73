/** Studio orchestration: ties the editing session to the service client
 * and owns the derived UI state — validation messages per object, the
 * per-object generation history strips, the render gallery, and the
 * optimistic-concurrency conflict banner.
 *
 * All state changes flow through service endpoints; the studio never
 * touches the workspace or artifacts directly. */

import { ApiError, StudioClient } from "./api.js";
import { CanvasSession } from "./session.js";
import type {
  CapabilitiesDoc,
  EventDoc,
  JobDoc,
  ObjectsJobResult,
  RenderJobResult,
  TrainJobResult,
  ViolationDoc,
} from "./types.js";

export const HISTORY_LIMIT = 5;
export const EVENT_POLL_FALLBACK_MS = 2000;

export interface GalleryTile {
  /** Gallery ordering is stable and keyed by (alpha, seed). */
  key: string;
  alpha: number;
  seed: number;
  steps: number;
  jobId: string;
  status: "pending" | "running" | "done" | "failed";
  label: string;
  renderId?: string;
  imageDigest?: string;
  imageBytes?: Uint8Array;
  fgFidelity?: number;
  seamScore?: number;
  error?: string;
  pinned: boolean;
}

export interface ObjectAssetRecord {
  jobId: string;
  seed: number;
  attempts: number;
}

export interface ConflictState {
  sceneId: string;
  localRevision: number | null;
  message: string;
}

export interface SaveOutcome {
  ok: boolean;
  conflict?: ConflictState;
  violations?: ViolationDoc[];
}

export interface StudioOptions {
  /** Test seam: replaces real waiting between job polls. */
  sleep?: (ms: number) => Promise<void>;
  pollIntervalMs?: number;
  /** Fresh-seed source for reroll; defaults to a time-based seed. */
  nextSeed?: () => number;
}

function tileKey(alpha: number, seed: number): string {
  return `${alpha}:${seed}`;
}

export function tileLabel(alpha: number): string {
  return alpha === 1 ? "no blending" : `α=${alpha.toFixed(2)}`;
}

/** Stable gallery order: ascending alpha, then seed. */
export function orderTiles(tiles: GalleryTile[]): GalleryTile[] {
  return [...tiles].sort((a, b) => a.alpha - b.alpha || a.seed - b.seed);
}

const TERMINAL: ReadonlySet<string> = new Set([
  "succeeded",
  "failed",
  "cancelled",
]);

export class StudioApp {
  session: CanvasSession | null = null;
  capabilities: CapabilitiesDoc | null = null;
  conflict: ConflictState | null = null;
  violations: ViolationDoc[] = [];
  /** History strip per object id, most recent first, capped at
   * HISTORY_LIMIT entries. */
  readonly objectHistory = new Map<string, ObjectAssetRecord[]>();
  gallery: GalleryTile[] = [];
  pinnedKey: string | null = null;
  lastEventSeq = 0;
  jobStatus = new Map<string, JobDoc>();

  private readonly sleep: (ms: number) => Promise<void>;
  private readonly pollIntervalMs: number;
  private readonly nextSeed: () => number;

  constructor(
    readonly client: StudioClient,
    options: StudioOptions = {},
  ) {
    this.sleep =
      options.sleep ?? ((ms) => new Promise((resolve) => setTimeout(resolve, ms)));
    this.pollIntervalMs = options.pollIntervalMs ?? 250;
    this.nextSeed = options.nextSeed ?? (() => Date.now() % 100_000);
  }

  async boot(): Promise<CapabilitiesDoc> {
    await this.client.health();
    this.capabilities = await this.client.capabilities();
    return this.capabilities;
  }

  private get activeSession(): CanvasSession {
    if (!this.session) throw new Error("no scene loaded");
    return this.session;
  }

  get sceneId(): string {
    return this.activeSession.sceneId;
  }

  newScene(init: {
    sceneId: string;
    width?: number;
    height?: number;
    backgroundText: string;
    createdAt?: string;
  }): CanvasSession {
    const canvas = this.capabilities?.defaults.canvas ?? 512;
    this.session = new CanvasSession({
      sceneId: init.sceneId,
      width: init.width ?? canvas,
      height: init.height ?? canvas,
      backgroundText: init.backgroundText,
      createdAt: init.createdAt ?? new Date().toISOString(),
    });
    this.conflict = null;
    this.violations = [];
    return this.session;
  }

  /** Flush strokes to the sketch PNG and create/update the scene.
   * Validation failures land in `violations` (rendered inline against
   * the offending object); a revision conflict raises the banner and
   * leaves local edits untouched. */
  async saveScene(): Promise<SaveOutcome> {
    const session = this.activeSession;
    const document = session.toDocument();
    const sketchB64 = await session.sketchPngB64();
    try {
      const ref =
        session.revision === null
          ? await this.client.createScene(document, sketchB64)
          : await this.client.updateScene(
              session.sceneId,
              document,
              session.revision,
              sketchB64,
            );
      session.revision = ref.revision;
      session.dirty = false;
      this.violations = [];
      this.conflict = null;
      return { ok: true };
    } catch (error) {
      if (error instanceof ApiError && error.status === 422) {
        this.violations = error.violations;
        return { ok: false, violations: error.violations };
      }
      if (error instanceof ApiError && error.status === 409) {
        this.conflict = {
          sceneId: session.sceneId,
          localRevision: session.revision,
          message: error.message,
        };
        return { ok: false, conflict: this.conflict };
      }
      throw error;
    }
  }

  /** Reload the authoritative document (the conflict banner's
   * "reload and merge" action); local unsaved edits are discarded in
   * favor of the server copy. */
  async reloadScene(sceneId?: string): Promise<CanvasSession> {
    const id = sceneId ?? this.activeSession.sceneId;
    const envelope = await this.client.getScene(id);
    this.session = CanvasSession.fromDocument(envelope.document, envelope.revision);
    this.conflict = null;
    this.violations = [];
    return this.session;
  }

  violationsFor(objectId: string | null): ViolationDoc[] {
    return this.violations.filter((v) => (v.object_id ?? null) === objectId);
  }

  private recordJob(job: JobDoc): void {
    this.jobStatus.set(job.job_id, job);
  }

  async awaitJob(jobId: string): Promise<JobDoc> {
    for (;;) {
      const job = await this.client.getJob(jobId);
      this.recordJob(job);
      if (TERMINAL.has(job.status)) return job;
      await this.sleep(this.pollIntervalMs);
    }
  }

  /** One event-feed poll; callers decide cadence (long-poll loop in the
   * browser, explicit pumps in tests, 2 s interval as the fallback when
   * the stream is unavailable). */
  async pumpEvents(timeoutS = 0): Promise<EventDoc[]> {
    const events = await this.client.pollEvents(this.lastEventSeq, timeoutS);
    for (const event of events) {
      if (event.event_seq > this.lastEventSeq) this.lastEventSeq = event.event_seq;
    }
    return events;
  }

  /** Reroll: submit a generate-objects job under a fresh seed and, on
   * success, push each object's asset onto its history strip. */
  async generateObjects(seed?: number): Promise<JobDoc> {
    const session = this.activeSession;
    const useSeed = seed ?? this.nextSeed();
    const submitted = await this.client.submitJob(
      session.sceneId,
      "objects",
      { seed: useSeed },
      `objects-${session.sceneId}-${useSeed}`,
    );
    this.recordJob(submitted);
    const job = await this.awaitJob(submitted.job_id);
    if (job.status === "succeeded" && job.result) {
      const result = job.result as unknown as ObjectsJobResult;
      for (const asset of result.objects) {
        const strip = this.objectHistory.get(asset.object_id) ?? [];
        strip.unshift({
          jobId: job.job_id,
          seed: asset.seed,
          attempts: asset.attempts,
        });
        this.objectHistory.set(asset.object_id, strip.slice(0, HISTORY_LIMIT));
      }
    }
    return job;
  }

  async trainIdentities(steps: number, seed: number): Promise<JobDoc> {
    const session = this.activeSession;
    const submitted = await this.client.submitJob(
      session.sceneId,
      "train",
      { steps, seed },
      `train-${session.sceneId}-${steps}-${seed}`,
    );
    this.recordJob(submitted);
    const job = await this.awaitJob(submitted.job_id);
    if (job.status === "succeeded" && job.result) {
      void (job.result as unknown as TrainJobResult);
    }
    return job;
  }

  private upsertTile(tile: GalleryTile): void {
    const index = this.gallery.findIndex((t) => t.key === tile.key);
    if (index >= 0) this.gallery[index] = tile;
    else this.gallery.push(tile);
    this.gallery = orderTiles(this.gallery);
  }

  /** Drive one render job to a finished gallery tile.  Failures mark the
   * tile failed in place — the rest of the gallery is untouched. */
  private async settleTile(tile: GalleryTile): Promise<GalleryTile> {
    const job = await this.awaitJob(tile.jobId);
    if (job.status === "succeeded" && job.result) {
      const result = job.result as unknown as RenderJobResult;
      tile.status = "done";
      tile.renderId = result.render_id;
      tile.imageDigest = result.output.image_sha256;
      tile.fgFidelity = result.diagnostics.fg_fidelity;
      tile.seamScore = result.diagnostics.seam_score;
      tile.imageBytes = await this.client.getArtifact(tile.imageDigest);
    } else {
      tile.status = "failed";
      tile.error = job.error?.message ?? `job ${job.status}`;
    }
    this.upsertTile(tile);
    return tile;
  }

  async renderOne(params: {
    alpha: number;
    seed: number;
    steps: number;
    idempotencyKey?: string;
  }): Promise<GalleryTile> {
    const session = this.activeSession;
    const { alpha, seed, steps } = params;
    const submitted = await this.client.submitJob(
      session.sceneId,
      "render",
      { alpha, seed, steps },
      params.idempotencyKey ??
        `render-${session.sceneId}-${seed}-${alpha}-${steps}`,
    );
    this.recordJob(submitted);
    const tile: GalleryTile = {
      key: tileKey(alpha, seed),
      alpha,
      seed,
      steps,
      jobId: submitted.job_id,
      status: "pending",
      label: tileLabel(alpha),
      pinned: false,
    };
    this.upsertTile(tile);
    return this.settleTile(tile);
  }

  /** α-sweep: one render job per alpha, all sharing one seed.  Jobs are
   * all submitted before any polling starts, then settled into gallery
   * tiles ordered by (alpha, seed). */
  async runSweep(params: {
    seed: number;
    steps: number;
    alphas?: number[];
  }): Promise<GalleryTile[]> {
    const session = this.activeSession;
    const alphas =
      params.alphas ?? this.capabilities?.defaults.sweep ?? [0.4, 0.5, 0.6];
    const { seed, steps } = params;
    const tiles: GalleryTile[] = [];
    for (const alpha of alphas) {
      const submitted = await this.client.submitJob(
        session.sceneId,
        "render",
        { alpha, seed, steps },
        `sweep-${session.sceneId}-${seed}-${alpha}-${steps}`,
      );
      this.recordJob(submitted);
      const tile: GalleryTile = {
        key: tileKey(alpha, seed),
        alpha,
        seed,
        steps,
        jobId: submitted.job_id,
        status: "pending",
        label: tileLabel(alpha),
        pinned: false,
      };
      tiles.push(tile);
      this.upsertTile(tile);
    }
    for (const tile of tiles) {
      await this.settleTile(tile);
    }
    return orderTiles(tiles);
  }

  /** Pin a finished tile as the reference for the next tweak. */
  pinTile(key: string): void {
    let found = false;
    for (const tile of this.gallery) {
      tile.pinned = tile.key === key;
      found ||= tile.pinned;
    }
    if (!found) throw new Error(`no gallery tile ${JSON.stringify(key)}`);
    this.pinnedKey = key;
  }
}
