/** One scripted studio session with fixed inputs, used two ways:
 *
 *  - `scripts/record.mjs` runs it against a live toy-backend service and
 *    records every HTTP exchange into `tests/fixtures/recorded-service.json`;
 *  - the test suite replays it against that recording offline and asserts
 *    on the captured outputs.
 *
 * Because recorder and tests execute this exact code, the traffic the
 * studio produces is verified request-for-request against what the real
 * service accepted and answered. */

import { ApiError, StudioClient, type FetchLike } from "./api.js";
import type { GalleryTile, SaveOutcome } from "./studio.js";
import { StudioApp } from "./studio.js";
import type {
  CapabilitiesDoc,
  EventDoc,
  JobDoc,
  RenderManifest,
  SceneDocument,
  SceneEnvelope,
  SceneRef,
  ViolationDoc,
} from "./types.js";

export const SCENE_ID = "studio-demo";
export const CANVAS_SIZE = 32;
export const CREATED_AT = "2026-01-01T00:00:00+00:00";
export const BACKGROUND_TEXT = "in a courtyard";
export const RENDER_SEED = 3;
export const RENDER_STEPS = 6;
export const REROLL_SEEDS = [7, 8] as const;

export interface ScenarioOutputs {
  capabilities: CapabilitiesDoc;
  /** Document posted on first save, byte-for-byte what the UI produced. */
  savedDocument: SceneDocument;
  createRef: SceneRef;
  reloaded: SceneEnvelope;
  editedDocument: SceneDocument;
  editRef: SceneRef;
  reloadedAfterEdit: SceneEnvelope;
  /** Stale-revision save from the first tab after a second tab saved. */
  conflictOutcome: SaveOutcome;
  conflictResolvedRevision: number;
  mergedPrompt: string | null;
  /** Create attempt with an empty class label. */
  invalidOutcome: SaveOutcome;
  invalidInlineViolations: ViolationDoc[];
  scenes: SceneRef[];
  rerollJobs: JobDoc[];
  historySnapshot: Record<string, Array<{ seed: number; jobId: string }>>;
  serverValidation: ViolationDoc[];
  sketchBytes: Uint8Array;
  localSketchPixels: Uint8Array;
  noBlendTile: GalleryTile;
  sweepTiles: GalleryTile[];
  galleryAfterSweep: GalleryTile[];
  pinnedKey: string | null;
  renders: RenderManifest[];
  trainJob: JobDoc;
  cancelRejection: { status: number; errorType: string } | null;
  listedJobs: JobDoc[];
  events: EventDoc[];
}

/** Draw and annotate the two-object demo scene: a cat and a tree, each
 * with strokes inside its box, plus one loose horizon stroke that only
 * lands in the sketch PNG. */
export function annotateDemoScene(app: StudioApp): void {
  const session = app.newScene({
    sceneId: SCENE_ID,
    width: CANVAS_SIZE,
    height: CANVAS_SIZE,
    backgroundText: BACKGROUND_TEXT,
    createdAt: CREATED_AT,
  });
  session.addObject({
    objectId: "cat",
    classLabel: "cat",
    promptText: "a fluffy cat",
    box: { left: 4, top: 4, width: 10, height: 12 },
  });
  session.addStroke("cat", [
    [5, 5],
    [12, 14],
  ]);
  session.addObject({
    objectId: "tree",
    classLabel: "tree",
    promptText: "an old oak tree",
    box: { left: 18, top: 14, width: 8, height: 10 },
  });
  session.addStroke("tree", [
    [19, 15],
    [24, 22],
  ]);
  session.addStroke(null, [
    [1, 28],
    [30, 28],
  ]);
}

export async function runScenario(
  fetchLike: FetchLike,
  baseUrl: string,
): Promise<{ app: StudioApp; outputs: ScenarioOutputs }> {
  const options = { pollIntervalMs: 10 };
  const app = new StudioApp(new StudioClient(baseUrl, fetchLike), options);

  // Boot: health check + capability discovery.
  const capabilities = await app.boot();

  // Annotate the two-object scene and save it.
  annotateDemoScene(app);
  const savedDocument = app.session!.toDocument();
  const firstSave = await app.saveScene();
  if (!firstSave.ok) throw new Error("initial save failed");
  const createRef: SceneRef = {
    scene_id: app.session!.sceneId,
    revision: app.session!.revision!,
  };

  // Reload and compare (round-trip).
  const reloaded = await app.client.getScene(SCENE_ID);

  // Edit a prompt and save again (optimistic update).
  await app.reloadScene(SCENE_ID);
  app.session!.updateObject("tree", { promptText: "an old oak tree at dusk" });
  const editedDocument = app.session!.toDocument();
  const secondSave = await app.saveScene();
  if (!secondSave.ok) throw new Error("edit save failed");
  const editRef: SceneRef = {
    scene_id: SCENE_ID,
    revision: app.session!.revision!,
  };
  const reloadedAfterEdit = await app.client.getScene(SCENE_ID);

  // Concurrent edit in a second tab: tab B saves first, tab A's save
  // hits 409 and resolves by reloading the server copy.
  const tabB = new StudioApp(new StudioClient(baseUrl, fetchLike), options);
  await tabB.reloadScene(SCENE_ID);
  tabB.session!.updateObject("cat", { promptText: "a sleepy cat" });
  const tabBSave = await tabB.saveScene();
  if (!tabBSave.ok) throw new Error("tab B save failed");

  app.session!.updateObject("tree", { promptText: "a willow tree" });
  const conflictOutcome = await app.saveScene();
  await app.reloadScene(SCENE_ID);
  const conflictResolvedRevision = app.session!.revision!;
  const mergedPrompt = app.session!.objectById("cat").promptText;

  // Saving a scene with an empty class label is rejected inline.
  const invalidApp = new StudioApp(new StudioClient(baseUrl, fetchLike), options);
  invalidApp.newScene({
    sceneId: "studio-bad",
    width: CANVAS_SIZE,
    height: CANVAS_SIZE,
    backgroundText: BACKGROUND_TEXT,
    createdAt: CREATED_AT,
  });
  invalidApp.session!.addObject({
    objectId: "mystery",
    classLabel: "",
    box: { left: 2, top: 2, width: 8, height: 8 },
  });
  const invalidOutcome = await invalidApp.saveScene();
  const invalidInlineViolations = invalidApp.violationsFor("mystery");

  const scenes = await app.client.listScenes();

  // Object panel: generate, then reroll under a fresh seed.
  const rerollJobs: JobDoc[] = [];
  for (const seed of REROLL_SEEDS) {
    rerollJobs.push(await app.generateObjects(seed));
  }
  const historySnapshot: ScenarioOutputs["historySnapshot"] = {};
  for (const [objectId, strip] of app.objectHistory) {
    historySnapshot[objectId] = strip.map((a) => ({
      seed: a.seed,
      jobId: a.jobId,
    }));
  }

  const serverValidation = await app.client.getValidation(SCENE_ID);
  const sketchBytes = await app.client.getSketchPng(SCENE_ID);
  const localSketchPixels = app.session!.rasterize();

  // Render deck: α=1 single render, then the preset sweep.
  const noBlendTile = await app.renderOne({
    alpha: 1,
    seed: RENDER_SEED,
    steps: RENDER_STEPS,
  });
  const sweepTiles = await app.runSweep({
    seed: RENDER_SEED,
    steps: RENDER_STEPS,
  });
  const galleryAfterSweep = [...app.gallery];
  if (sweepTiles.length > 1) app.pinTile(sweepTiles[1]!.key);

  const renders = await app.client.listRenders(SCENE_ID);

  // Identity training, plus a cancel attempt on the finished job (the
  // cancel button stays live in the UI; the service answers 409).
  const trainJob = await app.trainIdentities(RENDER_STEPS, RENDER_SEED);
  let cancelRejection: ScenarioOutputs["cancelRejection"] = null;
  try {
    await app.client.cancelJob(trainJob.job_id);
  } catch (error) {
    if (error instanceof ApiError) {
      cancelRejection = { status: error.status, errorType: error.errorType };
    } else {
      throw error;
    }
  }

  const listedJobs = await app.client.listJobs(SCENE_ID);
  const events = await app.pumpEvents(0);

  return {
    app,
    outputs: {
      capabilities,
      savedDocument,
      createRef,
      reloaded,
      editedDocument,
      editRef,
      reloadedAfterEdit,
      conflictOutcome,
      conflictResolvedRevision,
      mergedPrompt,
      invalidOutcome,
      invalidInlineViolations,
      scenes,
      rerollJobs,
      historySnapshot,
      serverValidation,
      sketchBytes,
      localSketchPixels,
      noBlendTile,
      sweepTiles,
      galleryAfterSweep,
      pinnedKey: app.pinnedKey,
      renders,
      trainJob,
      cancelRejection,
      listedJobs,
      events,
    },
  };
}
