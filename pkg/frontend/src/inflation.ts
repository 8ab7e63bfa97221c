// Visual mapping from rendered pressure to band thickness. Thickness is
// linear in pressure over the display's 1-3 psi range, so the visual
// argmax always equals the pressure argmax.

import type { FramePayload } from "./api.js";

export const MIN_PSI = 1.0;
export const MAX_PSI = 3.0;
export const MIN_BAND_PX = 3;
export const MAX_BAND_PX = 18;

export const LOCATIONS = ["base", "middle", "end_effector"] as const;
export type LocationId = (typeof LOCATIONS)[number];

export function bandThickness(pressurePsi: number): number {
  const clamped = Math.min(Math.max(pressurePsi, MIN_PSI), MAX_PSI);
  const fraction = (clamped - MIN_PSI) / (MAX_PSI - MIN_PSI);
  return MIN_BAND_PX + fraction * (MAX_BAND_PX - MIN_BAND_PX);
}

export interface Band {
  location: LocationId;
  ring: number;
  pressure: number;
  thickness: number;
}

// Local mode draws one inflating band per location; Global mode draws one
// band per channel at every location (concentric rings).
export function bandsForFrame(frame: FramePayload): Band[] {
  const bands: Band[] = [];
  for (const loc of frame.locations) {
    loc.pressures.forEach((pressure, ring) => {
      bands.push({
        location: loc.id as LocationId,
        ring,
        pressure,
        thickness: bandThickness(pressure),
      });
    });
  }
  return bands;
}
