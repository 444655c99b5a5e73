/** Traffic audit: the whole studio session speaks only the documented
 * service endpoints, and every state-changing request matches the
 * recorded exchange with the real toy-backend service — same order,
 * same body, same idempotency key (the replay harness rejects any
 * deviation while the session runs). */

import { describe, expect, it } from "vitest";

import { replayScenario } from "./harness.js";
import { DOCUMENTED_ENDPOINTS, isDocumented } from "./replay.js";

describe("service traffic", () => {
  it("uses only documented endpoints", async () => {
    const { service } = await replayScenario();
    expect(service.log.length).toBeGreaterThan(0);
    for (const entry of service.log) {
      expect(
        isDocumented(entry.method, entry.path),
        `${entry.method} ${entry.path} is not a documented endpoint`,
      ).toBe(true);
    }
  });

  it("replays every recorded state change in order", async () => {
    const { service } = await replayScenario();
    service.assertMutationsComplete();
    const mutations = service.log.filter((e) => e.method !== "GET");
    // create, update, tab-B update, conflicting update, invalid create,
    // 2 rerolls, 1 render, 3 sweep renders, 1 train, 1 cancel
    expect(mutations).toHaveLength(13);
  });

  it("exercises the full documented endpoint surface", async () => {
    const { service } = await replayScenario();
    for (const endpoint of DOCUMENTED_ENDPOINTS) {
      const hit = service.log.some(
        (entry) =>
          entry.method === endpoint.method &&
          endpoint.pattern.test(entry.path.split("?")[0]!),
      );
      expect(
        hit,
        `${endpoint.method} ${endpoint.pattern} never exercised`,
      ).toBe(true);
    }
  });

  it("maps service error statuses onto studio states, not crashes", async () => {
    const { service } = await replayScenario();
    const statuses = service.log.map((e) => e.status);
    expect(statuses).toContain(409); // stale revision save + cancel race
    expect(statuses).toContain(422); // invalid scene document
    expect(statuses.filter((s) => s >= 500)).toHaveLength(0);
  });
});
