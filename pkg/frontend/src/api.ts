// HTTP client for the session service. Errors carry the server's stable
// code so the UI can branch on it (NOT_FOUND screen, SESSION_CLOSED banner).

import type { AdvanceAction, ApiErrorBody, Snapshot } from './types.js';

export class ApiError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
  ) {
    super(message);
  }
}

export interface FetchLike {
  (input: string, init?: RequestInit): Promise<Response>;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private token: string | null = null,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private headers(): Record<string, string> {
    const headers: Record<string, string> = { 'Content-Type': 'application/json' };
    if (this.token) headers['Authorization'] = `Bearer ${this.token}`;
    return headers;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let code = 'HTTP_ERROR';
      let message = `request failed with status ${response.status}`;
      try {
        const parsed = (await response.json()) as Partial<ApiErrorBody>;
        if (parsed.error) {
          code = parsed.error.code;
          message = parsed.error.message;
        }
      } catch {
        // non-JSON error body, keep defaults
      }
      throw new ApiError(code, message, response.status);
    }
    return (await response.json()) as T;
  }

  healthz(): Promise<{ status: string }> {
    return this.request('GET', '/healthz');
  }

  createSession(orcid: string, query: string): Promise<Snapshot> {
    return this.request('POST', '/sessions', { orcid, query });
  }

  getSession(sessionId: string): Promise<Snapshot> {
    return this.request('GET', `/sessions/${sessionId}`);
  }

  select(sessionId: string, publicationIds: string[]): Promise<Snapshot> {
    return this.request('POST', `/sessions/${sessionId}/select`, { publication_ids: publicationIds });
  }

  setThresholds(sessionId: string, thetaN: number, thetaS: number): Promise<Snapshot> {
    return this.request('POST', `/sessions/${sessionId}/thresholds`, { theta_n: thetaN, theta_s: thetaS });
  }

  advance(sessionId: string, action: AdvanceAction, params: Record<string, unknown> = {}): Promise<Snapshot> {
    return this.request('POST', `/sessions/${sessionId}/advance`, { action, ...params });
  }

  feedback(sessionId: string, text: string): Promise<Snapshot> {
    return this.request('POST', `/sessions/${sessionId}/feedback`, { feedback: text });
  }
}

// Poll-with-backoff used by the session view: transient failures retry with
// growing delays; API errors with a real code surface immediately.
export async function fetchWithRetry<T>(
  attempt: () => Promise<T>,
  attempts = 3,
  baseDelayMs = 250,
  sleep: (ms: number) => Promise<void> = (ms) => new Promise((resolve) => setTimeout(resolve, ms)),
): Promise<T> {
  let lastError: unknown;
  for (let i = 0; i < attempts; i++) {
    try {
      return await attempt();
    } catch (error) {
      if (error instanceof ApiError) throw error;
      lastError = error;
      if (i < attempts - 1) await sleep(baseDelayMs * 2 ** i);
    }
  }
  throw lastError;
}
