// Typed client for the simulator service. Mirrors the wire formats
// documented in the repository README; no state beyond the base URL.

export interface FramePayload {
  t: number;
  locations: { id: string; pressures: number[] }[];
}

export interface GuiFramePayload {
  t: number;
  percent: number | number[];
}

export interface SessionHandle {
  id: string;
  status: string;
  task: string;
  feedback: string;
  seed: number;
}

export interface SessionInfo extends SessionHandle {
  sample_counts: Record<string, number>;
  event_count: number;
}

export interface PoseSample {
  t: number;
  x: number;
  y: number;
  theta: number;
}

export interface PairTrialPayload {
  trial_id: number;
  first: number;
  second: number;
  choices: string[];
  ready?: boolean;
  ready_in_s?: number;
}

export interface TripletTrialPayload {
  trial_id: number;
  pressures: Record<string, number>;
  choices: string[];
  ready?: boolean;
  ready_in_s?: number;
}

export type TrialPayload = PairTrialPayload | TripletTrialPayload;

export interface ExperimentInfo {
  id: string;
  kind: string;
  seed: number;
  total_trials: number;
  answered: number;
  complete: boolean;
  next: TrialPayload | null;
}

export interface ResponseResult {
  trial_id: number;
  correct: boolean;
  flagged: boolean;
  complete: boolean;
}

export interface EventEnvelope {
  seq: number;
  time: number;
  type: string;
  data: Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function expectOk(response: Response): Promise<Response> {
  if (!response.ok) {
    const body = await response.text();
    throw new ApiError(response.status, `${response.status}: ${body}`);
  }
  return response;
}

export class Client {
  constructor(readonly baseUrl: string) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await expectOk(
      await fetch(`${this.baseUrl}${path}`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
    return (await response.json()) as T;
  }

  private async get<T>(path: string): Promise<T> {
    const response = await expectOk(await fetch(`${this.baseUrl}${path}`));
    return (await response.json()) as T;
  }

  createSession(task: string, feedbackMode: string, seed: number): Promise<SessionHandle> {
    return this.post("/sessions", { task, feedback_mode: feedbackMode, seed });
  }

  sessionInfo(id: string): Promise<SessionInfo> {
    return this.get(`/sessions/${id}`);
  }

  advance(id: string): Promise<SessionHandle & { metrics: Record<string, number> | null }> {
    return this.post(`/sessions/${id}/advance`, {});
  }

  streamSamples(id: string, samples: PoseSample[]): Promise<{ acks: number[] }> {
    return this.post(`/sessions/${id}/samples`, { samples });
  }

  async metrics(id: string): Promise<Record<string, number> | null> {
    const payload = await this.get<{ metrics: Record<string, number> | null }>(
      `/sessions/${id}/metrics`,
    );
    return payload.metrics;
  }

  createExperiment(kind: string, seed: number): Promise<{ id: string; total_trials: number }> {
    return this.post("/experiments", { kind, seed });
  }

  experimentInfo(id: string): Promise<ExperimentInfo> {
    return this.get(`/experiments/${id}`);
  }

  submitResponse(
    id: string,
    trialId: number,
    answer: string,
    rtSeconds: number,
  ): Promise<ResponseResult> {
    return this.post(`/experiments/${id}/responses`, {
      trial_id: trialId,
      answer,
      rt_seconds: rtSeconds,
    });
  }

  async exportLog(id: string): Promise<string> {
    const response = await expectOk(
      await fetch(`${this.baseUrl}/export/${id}?format=jsonl`),
    );
    return response.text();
  }

  parseEvents(jsonl: string): EventEnvelope[] {
    return jsonl
      .split("\n")
      .filter((line) => line.trim().length > 0)
      .map((line) => JSON.parse(line) as EventEnvelope);
  }

  framesUrl(id: string): string {
    return `${this.baseUrl.replace(/^http/, "ws")}/sessions/${id}/frames`;
  }
}
