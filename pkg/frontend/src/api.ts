// Typed client for the consultation session API. Every number the UI shows
// comes out of these payloads verbatim; the client never computes probabilities.

export interface DistributionPayload {
  entries: Record<string, number>;
  other_mass: number;
}

export interface QuestionPayload {
  id: number;
  text: string;
  rationale: string;
}

export interface DiagnosisPayload {
  disease_id: string;
  name: string;
  probability: number;
  turns: number;
  stop_reason: string;
  distribution: DistributionPayload;
}

export interface SessionPayload {
  session_id: string;
  status: "active" | "diagnosed" | "exhausted";
  iteration: number;
  question: QuestionPayload | null;
  diagnosis: DiagnosisPayload | null;
  distribution: DistributionPayload;
  entropy: number;
  selection: unknown;
}

export interface TracePrediction {
  iteration: number;
  distribution: DistributionPayload;
  entropy: number;
}

export interface TraceSelection {
  iteration: number;
  pool: { id: number; text: string; rationale: string }[];
  report: {
    mode: string;
    prior_entropy: number;
    entries: [number, number][];
    selected_id: number;
    uninformative: boolean;
  };
  selected_asked: string;
}

export interface TraceDoc {
  format: string;
  version: number;
  turns: { question: string; response: string }[];
  predictions: TracePrediction[];
  selections: TraceSelection[];
  diagnosis?: DiagnosisPayload;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  status: number;

  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

async function readError(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") return body.detail;
  } catch {
    // fall through to the generic message
  }
  return `request failed with status ${response.status}`;
}

export class Api {
  private baseUrl: string;
  private fetchImpl: FetchLike;

  constructor(baseUrl = "", fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, `cannot reach the service (${String(err)})`);
    }
    if (!response.ok) {
      throw new ApiError(response.status, await readError(response));
    }
    return (await response.json()) as T;
  }

  createSession(openingStatement: string): Promise<SessionPayload> {
    return this.request<SessionPayload>("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ opening_statement: openingStatement }),
    });
  }

  sendAnswer(sessionId: string, response: string): Promise<SessionPayload> {
    return this.request<SessionPayload>(`/sessions/${sessionId}/answer`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ response }),
    });
  }

  fetchTrace(sessionId: string): Promise<TraceDoc> {
    return this.request<TraceDoc>(`/sessions/${sessionId}/trace`);
  }
}
