/** Render deck behavior: the α-sweep button issues exactly one render
 * job per preset alpha — all under one shared seed — and the gallery
 * shows the finished tiles in ascending α order with their diagnostic
 * badges; α=1 renders as the single "no blending" tile; rerolls stack a
 * history strip per object. */

import { describe, expect, it } from "vitest";

import { replayScenario } from "./harness.js";
import { REROLL_SEEDS, RENDER_SEED, SCENE_ID } from "../src/scenario.js";
import { orderTiles, tileLabel } from "../src/studio.js";

const PNG_MAGIC = [137, 80, 78, 71, 13, 10, 26, 10];

describe("alpha sweep", () => {
  it("issues exactly 3 render jobs sharing one seed", async () => {
    const { service } = await replayScenario();
    const sweepSubmits = service.log.filter((entry) =>
      entry.idempotencyKey?.startsWith("sweep-"),
    );
    expect(sweepSubmits).toHaveLength(3);
    for (const entry of sweepSubmits) {
      expect(entry.method).toBe("POST");
      expect(entry.path).toBe(`/scenes/${SCENE_ID}/jobs`);
      const body = entry.body as {
        kind: string;
        params: { alpha: number; seed: number };
      };
      expect(body.kind).toBe("render");
      expect(body.params.seed).toBe(RENDER_SEED);
    }
    const alphas = sweepSubmits.map(
      (e) => (e.body as { params: { alpha: number } }).params.alpha,
    );
    expect(alphas).toEqual([0.4, 0.5, 0.6]);
    const keys = new Set(sweepSubmits.map((e) => e.idempotencyKey));
    expect(keys.size).toBe(3);
  });

  it("renders 3 tiles ordered by ascending alpha, all finished", async () => {
    const { outputs } = await replayScenario();
    expect(outputs.sweepTiles).toHaveLength(3);
    expect(outputs.sweepTiles.map((t) => t.alpha)).toEqual([0.4, 0.5, 0.6]);
    for (const tile of outputs.sweepTiles) {
      expect(tile.status).toBe("done");
      expect(tile.seed).toBe(RENDER_SEED);
      expect(tile.renderId).toMatch(/^r-[0-9a-f]{12}$/);
      expect(tile.imageDigest).toMatch(/^[0-9a-f]{64}$/);
      expect(Array.from(tile.imageBytes!.subarray(0, 8))).toEqual(PNG_MAGIC);
      expect(tile.fgFidelity).toBeTypeOf("number");
      expect(tile.seamScore).toBeTypeOf("number");
      expect(tile.label).toBe(`α=${tile.alpha.toFixed(2)}`);
    }
    // Tiles are real distinct renders per α (manifest ids differ even
    // when two alphas happen to produce identical images).
    const renderIds = new Set(outputs.sweepTiles.map((t) => t.renderId));
    expect(renderIds.size).toBe(3);
  });

  it("keeps the whole gallery ordered by (alpha, seed) including α=1", async () => {
    const { outputs } = await replayScenario();
    expect(outputs.galleryAfterSweep.map((t) => t.alpha)).toEqual([
      0.4, 0.5, 0.6, 1,
    ]);
    expect(outputs.galleryAfterSweep).toEqual(
      orderTiles(outputs.galleryAfterSweep),
    );
  });

  it("labels the α=1 render as the single no-blending tile", async () => {
    const { outputs } = await replayScenario();
    expect(outputs.noBlendTile.label).toBe("no blending");
    expect(outputs.noBlendTile.status).toBe("done");
    expect(outputs.noBlendTile.alpha).toBe(1);
    expect(tileLabel(1)).toBe("no blending");
    expect(tileLabel(0.4)).toBe("α=0.40");
  });

  it("pins a tile as the reference for the next tweak", async () => {
    const { outputs, app } = await replayScenario();
    expect(outputs.pinnedKey).toBe(outputs.sweepTiles[1]!.key);
    const pinned = app.gallery.filter((t) => t.pinned);
    expect(pinned).toHaveLength(1);
    expect(pinned[0]!.key).toBe(outputs.pinnedKey);
  });

  it("lists every render in the server-side manifest index", async () => {
    const { outputs } = await replayScenario();
    const manifestIds = new Set(outputs.renders.map((m) => m.render_id));
    expect(manifestIds.has(outputs.noBlendTile.renderId!)).toBe(true);
    for (const tile of outputs.sweepTiles) {
      expect(manifestIds.has(tile.renderId!)).toBe(true);
    }
    for (const manifest of outputs.renders) {
      expect(manifest.scene_id).toBe(SCENE_ID);
      expect(manifest.diagnostics.fg_fidelity).toBeTypeOf("number");
      expect(manifest.diagnostics.seam_score).toBeTypeOf("number");
    }
  });
});

describe("object panel", () => {
  it("reroll submits a fresh-seed job and stacks the history strip", async () => {
    const { outputs } = await replayScenario();
    expect(outputs.rerollJobs).toHaveLength(2);
    for (const job of outputs.rerollJobs) {
      expect(job.status).toBe("succeeded");
      expect(job.kind).toBe("objects");
    }
    const jobIds = new Set(outputs.rerollJobs.map((j) => j.job_id));
    expect(jobIds.size).toBe(2);
    expect(
      outputs.rerollJobs.map((j) => (j.params as { seed: number }).seed),
    ).toEqual([...REROLL_SEEDS]);
    for (const objectId of ["cat", "tree"]) {
      const strip = outputs.historySnapshot[objectId]!;
      expect(strip).toHaveLength(2);
      // Most recent generation first; the backend derives a distinct
      // per-object seed from each scene-level reroll seed.
      expect(strip[0]!.jobId).toBe(outputs.rerollJobs[1]!.job_id);
      expect(strip[1]!.jobId).toBe(outputs.rerollJobs[0]!.job_id);
      expect(strip[0]!.seed).not.toBe(strip[1]!.seed);
    }
  });

  it("trains identities for both objects and reports 409 on cancelling a finished job", async () => {
    const { outputs } = await replayScenario();
    expect(outputs.trainJob.status).toBe("succeeded");
    const identities = (outputs.trainJob.result as {
      identities: Record<string, { token: string; steps_trained: number }>;
    }).identities;
    expect(Object.keys(identities).sort()).toEqual(["cat", "tree"]);
    expect(outputs.cancelRejection).toEqual({
      status: 409,
      errorType: "JobStateError",
    });
  });

  it("streams ordered job events covering every submitted job", async () => {
    const { outputs } = await replayScenario();
    const seqs = outputs.events.map((e) => e.event_seq);
    expect(seqs).toEqual([...seqs].sort((a, b) => a - b));
    expect(new Set(seqs).size).toBe(seqs.length);
    const succeeded = new Set(
      outputs.events
        .filter((e) => e.type === "job_succeeded")
        .map((e) => e.job_id),
    );
    for (const job of outputs.listedJobs) {
      if (job.status === "succeeded") {
        expect(succeeded.has(job.job_id)).toBe(true);
      }
    }
    expect(outputs.listedJobs).toHaveLength(7);
  });
});
