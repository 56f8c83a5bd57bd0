/**
 * Loopback round trip with real timers: a threshold change issued from the
 * console must be acknowledged and visible in the rendered meters within
 * 200 ms.
 */

import { afterEach, describe, expect, it } from "vitest";

import { ConsoleClient } from "../src/client.js";
import { MeterModel } from "../src/meters.js";
import { MockEngine, settle } from "./helpers.js";

describe("console round trip", () => {
  let engine: MockEngine;

  afterEach(() => {
    engine.shutdown();
  });

  it("reflects SET_THRESHOLD in the meters within 200 ms", async () => {
    engine = new MockEngine();
    const model = new MeterModel();
    model.setRate(20);
    const client = new ConsoleClient("ws://loopback/ws", engine.connect, {
      onMetrics: (frame) => model.push(frame),
    });
    client.connect();
    await settle();
    expect(client.state).toBe("open");

    // wait for the subscription to produce its first frame
    await waitFor(() => model.lastFrame !== null, 1000);
    expect(model.thresholdLine()).toBeCloseTo(0.01, 12);

    const t0 = performance.now();
    const result = (await client.setThreshold(0.02)) as { applied_at_us: number };
    expect(result.applied_at_us).toBeGreaterThanOrEqual(0);
    await waitFor(() => model.thresholdLine() === 0.02, 1000);
    const elapsed = performance.now() - t0;
    expect(elapsed).toBeLessThan(200);

    client.close();
  });
});

async function waitFor(cond: () => boolean, budgetMs: number): Promise<void> {
  const start = performance.now();
  while (!cond()) {
    if (performance.now() - start > budgetMs) {
      throw new Error(`condition not met within ${budgetMs} ms`);
    }
    await new Promise((r) => setTimeout(r, 2));
  }
}
