// Canvas replay harness: a recorded pointer drag, replayed against a fresh
// session with the same seed, must produce a byte-identical server event
// log (samples, frames, everything).

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Client, type PoseSample } from "../src/api.js";
import { DragSampler, linearCanvasMap, type PointerSample } from "../src/teachCanvas.js";
import { startServer, type TestServer } from "./server.js";

let server: TestServer;

beforeAll(async () => {
  server = await startServer();
}, 120_000);

afterAll(async () => {
  await server.stop();
});

// A recorded drag: down, a sweep across the canvas with uneven pointer
// timing (as real pointermove events arrive), then release.
function recordedDrag(): PointerSample[] {
  const events: PointerSample[] = [{ kind: "down", x: 20, y: 300, tMs: 0 }];
  let t = 0;
  for (let i = 1; i <= 60; i++) {
    t += 12 + (i % 5) * 7; // 12-40 ms between pointer events
    events.push({
      kind: "move",
      x: 20 + i * 11,
      y: 300 - ((Math.sin(i / 8) + 1) / 2) * 250,
      tMs: t,
    });
  }
  events.push({ kind: "up", x: 20 + 60 * 11, y: 300, tMs: t + 15 });
  return events;
}

function samplesFromTrace(trace: PointerSample[]): PoseSample[] {
  const sampler = new DragSampler(linearCanvasMap(720, 360, 3.0, 1.0));
  const out: PoseSample[] = [];
  for (const event of trace) {
    out.push(...sampler.feed(event));
  }
  return out;
}

async function runSession(client: Client, samples: PoseSample[]): Promise<string> {
  const handle = await client.createSession("three_segment", "global", 21);
  await client.advance(handle.id); // demo1
  // stream in small batches like the UI's flush loop
  for (let i = 0; i < samples.length; i += 8) {
    await client.streamSamples(handle.id, samples.slice(i, i + 8));
  }
  return client.exportLog(handle.id);
}

describe("canvas replay", () => {
  it("emits >= 30 Hz samples inside the canvas bounds while dragging", () => {
    const trace = recordedDrag();
    const samples = samplesFromTrace(trace);
    const durationS = (trace[trace.length - 1].tMs - trace[0].tMs) / 1000;
    expect(samples.length / durationS).toBeGreaterThanOrEqual(30);
    for (const sample of samples) {
      expect(sample.x).toBeGreaterThanOrEqual(0);
      expect(sample.x).toBeLessThanOrEqual(3.0);
      expect(sample.y).toBeGreaterThanOrEqual(0);
      expect(sample.y).toBeLessThanOrEqual(1.0);
    }
  });

  it("stops emitting once the pointer is released", () => {
    const sampler = new DragSampler(linearCanvasMap(720, 360, 3.0, 1.0));
    sampler.feed({ kind: "down", x: 10, y: 10, tMs: 0 });
    sampler.feed({ kind: "move", x: 60, y: 10, tMs: 40 });
    sampler.feed({ kind: "up", x: 80, y: 10, tMs: 60 });
    const after = sampler.feed({ kind: "move", x: 200, y: 10, tMs: 120 });
    expect(after).toEqual([]);
    expect(sampler.isDragging).toBe(false);
  });

  it("replaying a recorded drag is deterministic sample for sample", () => {
    const trace = recordedDrag();
    const a = samplesFromTrace(trace);
    const b = samplesFromTrace(trace);
    expect(JSON.stringify(a)).toBe(JSON.stringify(b));
  });

  it(
    "replaying a recorded drag produces a byte-identical server event log",
    async () => {
      const client = new Client(server.baseUrl);
      const trace = recordedDrag();
      const logA = await runSession(client, samplesFromTrace(trace));
      const logB = await runSession(client, samplesFromTrace(trace));
      expect(logA.length).toBeGreaterThan(0);
      expect(logA).toBe(logB);
    },
    240_000,
  );
});
