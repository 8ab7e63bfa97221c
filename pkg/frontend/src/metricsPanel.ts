// Metrics panel model: formats the GET /sessions/{id}/metrics payload for
// display once the session completes; placeholder otherwise.

export interface MetricLine {
  label: string;
  value: string;
}

const LABELS: Record<string, { label: string; unit: string; digits: number }> = {
  teaching_time: { label: "Teaching Time", unit: "s", digits: 2 },
  correct_segment: { label: "Correct Segment", unit: "%", digits: 1 },
  improvement_u: { label: "Improvement", unit: "%", digits: 1 },
  improvement_weld: { label: "Improvement (weld)", unit: "%", digits: 1 },
  u1: { label: "U1", unit: "", digits: 3 },
  u2: { label: "U2", unit: "", digits: 3 },
  e_init: { label: "Initial error", unit: "", digits: 4 },
  e_final: { label: "Final error", unit: "", digits: 4 },
};

export const PLACEHOLDER = "complete both demonstrations to see metrics";

export function metricLines(metrics: Record<string, number> | null): MetricLine[] {
  if (metrics === null || Object.keys(metrics).length === 0) {
    return [{ label: "", value: PLACEHOLDER }];
  }
  const lines: MetricLine[] = [];
  for (const [key, spec] of Object.entries(LABELS)) {
    if (key in metrics) {
      const value = metrics[key].toFixed(spec.digits);
      lines.push({ label: spec.label, value: spec.unit ? `${value} ${spec.unit}` : value });
    }
  }
  return lines;
}
