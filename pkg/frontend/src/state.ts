// ViewState derived purely from the server event stream: reloading
// mid-session and replaying the exported log restores the identical view.

import type { EventEnvelope, FramePayload, TrialPayload } from "./api.js";
import { LOCATIONS, type LocationId } from "./inflation.js";

export interface ViewState {
  phase: string;
  feedbackMode: string;
  pose: { x: number; y: number; theta: number } | null;
  // per-location ring pressures (psi); GUI mode carries a percent instead
  inflation: Record<LocationId, number[]>;
  guiPercent: number | number[] | null;
  metrics: Record<string, number> | null;
  pendingTrial: TrialPayload | null;
  sampleCount: number;
}

export function initialViewState(feedbackMode = "global"): ViewState {
  const inflation = Object.fromEntries(
    LOCATIONS.map((loc) => [loc, [1.0, 1.0, 1.0]]),
  ) as Record<LocationId, number[]>;
  return {
    phase: "idle",
    feedbackMode,
    pose: null,
    inflation,
    guiPercent: null,
    metrics: null,
    pendingTrial: null,
    sampleCount: 0,
  };
}

export function reduce(state: ViewState, event: EventEnvelope): ViewState {
  switch (event.type) {
    case "session_created":
      return {
        ...initialViewState(String(event.data.feedback ?? state.feedbackMode)),
      };
    case "phase_change":
      return { ...state, phase: String(event.data.to) };
    case "demo_sample":
      return {
        ...state,
        sampleCount: state.sampleCount + 1,
        pose: {
          x: Number(event.data.x),
          y: Number(event.data.y),
          theta: Number(event.data.theta),
        },
      };
    case "frame":
      return applyFrame(state, event.data as unknown as FramePayload);
    case "metric":
      return { ...state, metrics: event.data as Record<string, number> };
    default:
      return state;
  }
}

export function applyFrame(
  state: ViewState,
  frame: FramePayload | { t: number; percent: number | number[] },
): ViewState {
  if ("percent" in frame) {
    return { ...state, guiPercent: frame.percent };
  }
  const inflation = { ...state.inflation };
  for (const loc of frame.locations) {
    inflation[loc.id as LocationId] = [...loc.pressures];
  }
  return { ...state, inflation };
}

export function restore(events: EventEnvelope[]): ViewState {
  return events.reduce(reduce, initialViewState());
}
