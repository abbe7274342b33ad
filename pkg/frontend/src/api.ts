import { AskResult, ErrorEnvelope, HealthResponse } from "./types";

type FetchLike = typeof fetch;

/**
 * POST /ask. Network failures and 5xx responses are flagged retriable;
 * 4xx envelopes are not.
 */
export async function askQuestion(
  baseUrl: string,
  question: string,
  fetchImpl: FetchLike = fetch,
): Promise<AskResult> {
  let response: Response;
  try {
    response = await fetchImpl(`${baseUrl}/ask`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ question }),
    });
  } catch {
    return {
      ok: false,
      error: { code: "network_error", message: "سرویس در دسترس نیست" },
      retriable: true,
    };
  }
  if (!response.ok) {
    let envelope: ErrorEnvelope;
    try {
      envelope = (await response.json()) as ErrorEnvelope;
    } catch {
      envelope = { code: `http_${response.status}`, message: response.statusText };
    }
    return { ok: false, error: envelope, retriable: response.status >= 500 };
  }
  return { ok: true, response: await response.json() };
}

export async function fetchHealth(
  baseUrl: string,
  fetchImpl: FetchLike = fetch,
): Promise<HealthResponse | null> {
  try {
    const response = await fetchImpl(`${baseUrl}/healthz`);
    if (!response.ok) return null;
    return (await response.json()) as HealthResponse;
  } catch {
    return null;
  }
}
