// Browser sandbox: teach the simulated arm by dragging, watch the wrapped
// displays inflate live, run the forced-choice experiments, and read the
// teaching metrics. All state beyond this tab comes from the server log.

import { Client, type FramePayload, type TripletTrialPayload } from "./api.js";
import { ExperimentFlow } from "./experiment.js";
import { bandsForFrame, LOCATIONS } from "./inflation.js";
import { metricLines } from "./metricsPanel.js";
import { applyFrame, initialViewState, reduce, type ViewState } from "./state.js";
import { DragSampler, linearCanvasMap, type PointerSample } from "./teachCanvas.js";

const WORLD_WIDTH = 3.0;
const WORLD_HEIGHT = 1.0;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

class SandboxApp {
  private client = new Client(location.origin);
  private sessionId: string | null = null;
  private view: ViewState = initialViewState();
  private sampler: DragSampler | null = null;
  private socket: WebSocket | null = null;
  private flow = new ExperimentFlow(this.client);
  private canvas = el<HTMLCanvasElement>("teach-canvas");
  private ctx = this.canvas.getContext("2d")!;
  private pending: ReturnType<typeof setTimeout> | null = null;
  private queue: { t: number; x: number; y: number; theta: number }[] = [];

  constructor() {
    this.bindSession();
    this.bindCanvas();
    this.bindExperiment();
    this.render();
  }

  private bindSession(): void {
    el("new-session").addEventListener("click", () => void this.newSession());
    el("advance").addEventListener("click", () => void this.advance());
    el("restore").addEventListener("click", () => void this.restoreFromLog());
  }

  private async newSession(): Promise<void> {
    const feedback = el<HTMLSelectElement>("feedback-mode").value;
    const seed = Number(el<HTMLInputElement>("seed").value) || 0;
    const handle = await this.client.createSession("three_segment", feedback, seed);
    this.sessionId = handle.id;
    this.view = initialViewState(feedback);
    this.sampler = new DragSampler(
      linearCanvasMap(this.canvas.width, this.canvas.height, WORLD_WIDTH, WORLD_HEIGHT),
    );
    this.openFrames();
    el("session-label").textContent = `${handle.id} (${handle.status})`;
    this.render();
  }

  private openFrames(): void {
    this.socket?.close();
    if (!this.sessionId) return;
    this.socket = new WebSocket(this.client.framesUrl(this.sessionId));
    this.socket.onmessage = (message) => {
      const frame = JSON.parse(message.data as string) as FramePayload;
      this.view = applyFrame(this.view, frame);
      this.render();
    };
  }

  private async advance(): Promise<void> {
    if (!this.sessionId) return;
    const result = await this.client.advance(this.sessionId);
    this.view = { ...this.view, phase: result.status, metrics: result.metrics };
    el("session-label").textContent = `${this.sessionId} (${result.status})`;
    this.render();
  }

  // Reload-mid-session path: rebuild the whole ViewState from the event log.
  private async restoreFromLog(): Promise<void> {
    if (!this.sessionId) return;
    const events = this.client.parseEvents(await this.client.exportLog(this.sessionId));
    this.view = events.reduce(reduce, initialViewState());
    this.render();
  }

  private bindCanvas(): void {
    const toSample = (kind: PointerSample["kind"], ev: PointerEvent): PointerSample => {
      const rect = this.canvas.getBoundingClientRect();
      return { kind, x: ev.clientX - rect.left, y: ev.clientY - rect.top, tMs: ev.timeStamp };
    };
    this.canvas.addEventListener("pointerdown", (ev) => {
      this.canvas.setPointerCapture(ev.pointerId);
      this.pushSamples(toSample("down", ev));
    });
    this.canvas.addEventListener("pointermove", (ev) => this.pushSamples(toSample("move", ev)));
    this.canvas.addEventListener("pointerup", (ev) => this.pushSamples(toSample("up", ev)));
  }

  private pushSamples(event: PointerSample): void {
    if (!this.sampler || !this.sessionId) return;
    const samples = this.sampler.feed(event);
    if (samples.length === 0) return;
    this.queue.push(...samples);
    this.pending ??= setTimeout(() => void this.flush(), 40);
  }

  private async flush(): Promise<void> {
    this.pending = null;
    if (!this.sessionId || this.queue.length === 0) return;
    const batch = this.queue.splice(0, this.queue.length);
    try {
      await this.client.streamSamples(this.sessionId, batch);
      const last = batch[batch.length - 1];
      this.view = { ...this.view, pose: { x: last.x, y: last.y, theta: last.theta } };
      this.render();
    } catch {
      // wrong phase: drop silently, the phase label already explains
    }
  }

  private bindExperiment(): void {
    el("exp-start").addEventListener("click", () => void this.startExperiment());
    el("exp-next").addEventListener("click", () => void this.nextTrial());
    el("exp-enter").addEventListener("click", () => void this.submitTrial());
    for (const choice of ["left", "center", "right", "first", "second"]) {
      el(`choice-${choice}`).addEventListener("click", () => {
        this.flow.select(choice);
        this.renderExperiment();
      });
    }
  }

  private async startExperiment(): Promise<void> {
    const kind = el<HTMLSelectElement>("exp-kind").value;
    const seed = Number(el<HTMLInputElement>("seed").value) || 0;
    const info = await this.flow.start(kind, seed);
    el("exp-label").textContent = `${info.id}: trial 1/${info.total_trials}`;
    this.renderExperiment();
  }

  private async nextTrial(): Promise<void> {
    const trial = await this.flow.next();
    this.renderExperiment();
    if (trial === null) el("exp-label").textContent += " — complete";
  }

  private async submitTrial(): Promise<void> {
    const result = await this.flow.submit();
    if (result) {
      el("exp-feedback").textContent = result.correct ? "correct" : "wrong";
    }
    this.renderExperiment();
  }

  private renderExperiment(): void {
    const light = el("light");
    light.className = `light ${this.flow.light}`;
    const trial = this.flow.current;
    if (trial && "pressures" in trial) {
      const t = trial as TripletTrialPayload;
      el("exp-question").textContent =
        this.flow.light === "green" ? "Which one has the different pressure?" : "wait for green";
      el("exp-trial").textContent = `trial ${t.trial_id + 1}`;
    } else if (trial) {
      el("exp-question").textContent =
        this.flow.light === "green" ? "Which pressure felt higher?" : "wait for green";
      el("exp-trial").textContent = `trial ${trial.trial_id + 1}`;
    } else {
      el("exp-question").textContent = "";
      el("exp-trial").textContent = "";
    }
  }

  private render(): void {
    const ctx = this.ctx;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);

    // arm: a horizontal bar with three wrapped-display locations
    const armY = height * 0.55;
    ctx.fillStyle = "#556";
    ctx.fillRect(20, armY - 10, width - 40, 20);

    const bands = bandsForFrame({
      t: 0,
      locations: LOCATIONS.map((id) => ({ id, pressures: this.view.inflation[id] })),
    });
    const xs: Record<string, number> = {
      base: width * 0.18,
      middle: width * 0.5,
      end_effector: width * 0.82,
    };
    for (const band of bands) {
      const gap = this.view.feedbackMode === "local" ? 0 : band.ring * 14;
      ctx.beginPath();
      ctx.lineWidth = band.thickness;
      ctx.strokeStyle = `rgba(216, 96, 64, ${0.45 + 0.18 * band.ring})`;
      ctx.arc(xs[band.location], armY, 24 + gap, 0, 2 * Math.PI);
      ctx.stroke();
    }

    if (this.view.guiPercent !== null) {
      ctx.fillStyle = "#222";
      ctx.font = "16px sans-serif";
      const value = Array.isArray(this.view.guiPercent)
        ? this.view.guiPercent.map((v) => `${v.toFixed(0)}%`).join(" / ")
        : `${this.view.guiPercent.toFixed(0)}%`;
      ctx.fillText(`uncertainty: ${value}`, 24, 28);
    }

    if (this.view.pose) {
      const px = (this.view.pose.x / WORLD_WIDTH) * width;
      const py = height - (this.view.pose.y / WORLD_HEIGHT) * height;
      ctx.beginPath();
      ctx.fillStyle = "#27c";
      ctx.arc(px, py, 6, 0, 2 * Math.PI);
      ctx.fill();
    }

    el("phase-label").textContent = this.view.phase;
    const metrics = metricLines(this.view.metrics);
    el("metrics").innerHTML = metrics
      .map((line) => (line.label ? `<dt>${line.label}</dt><dd>${line.value}</dd>` : `<dd>${line.value}</dd>`))
      .join("");
  }
}

window.addEventListener("DOMContentLoaded", () => new SandboxApp());
