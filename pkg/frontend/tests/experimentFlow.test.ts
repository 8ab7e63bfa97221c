// Headless scripted client: the full 48-trial odd-one-out flow against the
// live service over loopback. All responses must be logged and the
// client-measured rt must agree with the server's cross-check within 50 ms.

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Client, type TripletTrialPayload } from "../src/api.js";
import { ExperimentFlow } from "../src/experiment.js";
import { startServer, type TestServer } from "./server.js";

let server: TestServer;

beforeAll(async () => {
  server = await startServer();
}, 60_000);

afterAll(async () => {
  await server.stop();
});

describe("experiment flow", () => {
  it(
    "completes all 48 triplet trials with rt agreement within 50 ms",
    async () => {
      const client = new Client(server.baseUrl);
      const flow = new ExperimentFlow(client);
      const info = await flow.start("triplet", 7);
      expect(info.total_trials).toBe(48);

      let completed = 0;
      for (;;) {
        const trial = (await flow.next()) as TripletTrialPayload | null;
        if (trial === null) break;
        expect(flow.light).toBe("green");
        // scripted participant: pick the highest-pressure channel
        const answer = Object.entries(trial.pressures).sort(
          (a, b) => b[1] - a[1],
        )[0][0];
        flow.select(answer);
        const result = await flow.submit();
        expect(result).not.toBeNull();
        expect(result!.correct).toBe(true);
        completed += 1;
        if (result!.complete) break;
      }
      expect(completed).toBe(48);

      const events = client.parseEvents(await client.exportLog(flow.id!));
      const responses = events.filter((event) => event.type === "response");
      expect(responses.length).toBe(48);

      // client/server rt agreement over loopback
      for (const event of responses) {
        const clientRt = Number(event.data.rt_seconds);
        const serverRt = Number(event.data.server_rt_seconds);
        expect(Math.abs(clientRt - serverRt)).toBeLessThanOrEqual(0.05);
        expect(event.data.flagged).toBe(false);
      }
    },
    180_000,
  );

  it("blocks answering before the green light", async () => {
    const client = new Client(server.baseUrl);
    const flow = new ExperimentFlow(client);
    await flow.start("triplet", 8);
    // no next() yet: light is red, selection and submit are no-ops
    flow.select("left");
    expect(flow.selected).toBeNull();
    const result = await flow.submit();
    expect(result).toBeNull();
    const info = await client.experimentInfo(flow.id!);
    expect(info.answered).toBe(0);
  });

  it("resumes at the next pending trial after a dropped client", async () => {
    const client = new Client(server.baseUrl);
    const first = new ExperimentFlow(client);
    await first.start("triplet", 9);
    const trial = (await first.next()) as TripletTrialPayload;
    first.select("left");
    await first.submit();

    // a fresh flow (new tab) attached to the same experiment id
    const second = new ExperimentFlow(client);
    second.id = first.id;
    const resumed = (await second.next()) as TripletTrialPayload;
    expect(resumed.trial_id).toBe(trial.trial_id + 1);
  }, 30_000);
});
