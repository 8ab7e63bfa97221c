// Pointer-drag to pose-sample conversion. Samples are emitted on a fixed
// time grid derived from the pointer event timestamps (not the wall
// clock), so replaying a recorded drag reproduces the sample stream
// exactly.

import type { PoseSample } from "./api.js";

export interface PointerSample {
  kind: "down" | "move" | "up";
  x: number;
  y: number;
  tMs: number;
}

export interface WorldPose {
  x: number;
  y: number;
  theta: number;
}

export type CanvasToWorld = (x: number, y: number) => WorldPose;

export const SAMPLE_HZ = 50; // >= 30 Hz contract

export class DragSampler {
  private dragging = false;
  private startMs = 0;
  private baseIndex = 0; // demo time continues across drags within a phase
  private nextSampleIndex = 0;
  private last: PointerSample | null = null;
  private emitted: PoseSample[] = [];

  constructor(
    private readonly toWorld: CanvasToWorld,
    private readonly sampleHz: number = SAMPLE_HZ,
  ) {}

  get samples(): readonly PoseSample[] {
    return this.emitted;
  }

  get isDragging(): boolean {
    return this.dragging;
  }

  // Feed one pointer event; returns the pose samples it produced. Idle
  // periods (after release) produce nothing.
  feed(event: PointerSample): PoseSample[] {
    const out: PoseSample[] = [];
    if (event.kind === "down") {
      this.dragging = true;
      this.startMs = event.tMs;
      this.baseIndex = this.emitted.length === 0 ? 0 : this.baseIndex + this.nextSampleIndex;
      this.nextSampleIndex = 0;
      this.last = event;
      out.push(this.emit(event, 0));
      this.nextSampleIndex = 1;
      return out;
    }
    if (!this.dragging || this.last === null) {
      return out;
    }
    const stepMs = 1000 / this.sampleHz;
    const endMs = event.tMs;
    // interpolate grid samples between the previous event and this one
    while (this.startMs + this.nextSampleIndex * stepMs <= endMs) {
      const gridMs = this.startMs + this.nextSampleIndex * stepMs;
      const span = endMs - this.last.tMs;
      const alpha = span > 0 ? (gridMs - this.last.tMs) / span : 1;
      const x = this.last.x + (event.x - this.last.x) * Math.min(Math.max(alpha, 0), 1);
      const y = this.last.y + (event.y - this.last.y) * Math.min(Math.max(alpha, 0), 1);
      out.push(this.emit({ ...event, x, y, tMs: gridMs }, this.nextSampleIndex));
      this.nextSampleIndex += 1;
    }
    this.last = event;
    if (event.kind === "up") {
      this.dragging = false;
      this.last = null;
    }
    return out;
  }

  private emit(event: PointerSample, index: number): PoseSample {
    const pose = this.toWorld(event.x, event.y);
    const sample: PoseSample = {
      t: roundTime((this.baseIndex + index) / this.sampleHz),
      x: pose.x,
      y: pose.y,
      theta: pose.theta,
    };
    this.emitted.push(sample);
    return sample;
  }
}

// Keep timestamps exactly representable so serialized streams are stable.
function roundTime(seconds: number): number {
  return Math.round(seconds * 1e6) / 1e6;
}

// Default canvas-to-world map for the teaching sandbox: canvas pixels to
// task-plane meters with y flipped; heading follows the drag direction in
// the UI layer, so the core map keeps theta 0.
export function linearCanvasMap(
  canvasWidth: number,
  canvasHeight: number,
  worldWidth: number,
  worldHeight: number,
): CanvasToWorld {
  return (x, y) => ({
    x: (x / canvasWidth) * worldWidth,
    y: ((canvasHeight - y) / canvasHeight) * worldHeight,
    theta: 0,
  });
}
