/** Wire types of the uqrag service, mirrored verbatim. */

export interface RetrievedContext {
  chunk_id: string;
  score: number;
  text: string;
}

export interface AskResponse {
  answer: string;
  department: string;
  contexts: RetrievedContext[];
  latency_ms: number;
  request_id: string;
}

export interface ErrorEnvelope {
  code: string;
  message: string;
  request_id?: string;
}

export interface HealthResponse {
  status: string;
  index_chunks: number;
}

/** One question/answer exchange; turns are append-only within a session. */
export interface ChatTurn {
  question: string;
  response: AskResponse;
  submitted_at: string;
}

export type AskResult =
  | { ok: true; response: AskResponse }
  | { ok: false; error: ErrorEnvelope; retriable: boolean };
