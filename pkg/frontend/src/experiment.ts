// Forced-choice experiment flow: Next -> wait for the server's
// steady-state signal (red light turns green) -> participant answers ->
// Enter submits with the client-measured response time.

import type { Client, ExperimentInfo, ResponseResult, TrialPayload } from "./api.js";

export type LightState = "red" | "green";

export interface TrialRun {
  trialId: number;
  answer: string;
  clientRtSeconds: number;
  result: ResponseResult;
}

const POLL_INTERVAL_MS = 25;

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class ExperimentFlow {
  id: string | null = null;
  light: LightState = "red";
  current: TrialPayload | null = null;
  selected: string | null = null;
  runs: TrialRun[] = [];
  private greenAtMs: number | null = null;

  constructor(
    private readonly client: Client,
    private readonly nowMs: () => number = () => performance.now(),
  ) {}

  async start(kind: string, seed: number): Promise<ExperimentInfo> {
    const created = await this.client.createExperiment(kind, seed);
    this.id = created.id;
    return this.client.experimentInfo(this.id);
  }

  // "Next": fetch the pending trial and wait until the displays reach
  // steady state. The green instant is computed from the server's
  // remaining-time answer so client and server timers agree.
  async next(): Promise<TrialPayload | null> {
    if (this.id === null) throw new Error("experiment not started");
    this.light = "red";
    this.selected = null;
    this.greenAtMs = null;
    const info = await this.client.experimentInfo(this.id);
    if (info.complete || info.next === null) {
      this.current = null;
      return null;
    }
    this.current = info.next;
    let readyIn = info.next.ready ? 0 : (info.next.ready_in_s ?? 0);
    while (readyIn > 0) {
      // sleep out the server's remaining settle time, then confirm; the
      // green instant is then one loopback round-trip behind the server's
      await sleep(Math.max(readyIn * 1000, 1));
      const poll = await this.client.experimentInfo(this.id);
      if (poll.next === null) break;
      readyIn = poll.next.ready ? 0 : Math.max(poll.next.ready_in_s ?? 0, POLL_INTERVAL_MS / 1000);
    }
    this.light = "green";
    this.greenAtMs = this.nowMs();
    return this.current;
  }

  select(choice: string): void {
    if (this.light !== "green") {
      // answering is blocked until the light turns green
      return;
    }
    this.selected = choice;
  }

  // "Enter": submit the selected answer with the measured rt.
  async submit(): Promise<ResponseResult | null> {
    if (this.id === null || this.current === null) return null;
    if (this.light !== "green" || this.selected === null || this.greenAtMs === null) {
      return null;
    }
    const clientRt = (this.nowMs() - this.greenAtMs) / 1000;
    const result = await this.client.submitResponse(
      this.id,
      this.current.trial_id,
      this.selected,
      clientRt,
    );
    this.runs.push({
      trialId: this.current.trial_id,
      answer: this.selected,
      clientRtSeconds: clientRt,
      result,
    });
    this.light = "red";
    this.current = null;
    this.selected = null;
    this.greenAtMs = null;
    return result;
  }
}
