/**
 * Service base URL, settable at deploy time via a global defined in
 * index.html (empty string = same origin).
 */
export function serviceBaseUrl(): string {
  const injected = (globalThis as { UQRAG_SERVICE_URL?: unknown }).UQRAG_SERVICE_URL;
  return typeof injected === "string" ? injected.replace(/\/$/, "") : "";
}
