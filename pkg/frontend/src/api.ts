/** Typed client for the answer service. All state lives server-side. */

import type { CloseInfo, HealthInfo, SessionInfo, TracePayload } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }

  /** Status 0 marks a transport failure rather than a server verdict. */
  get transport(): boolean {
    return this.status === 0;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

const browserFetch: FetchLike = (input, init) => fetch(input, init);

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = browserFetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, {
        method,
        headers: body === undefined ? undefined : { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, `cannot reach the answer service: ${String(err)}`);
    }
    const text = await response.text();
    if (!response.ok) {
      let detail = text || `request failed with status ${response.status}`;
      try {
        detail = (JSON.parse(text) as { detail?: string }).detail ?? detail;
      } catch {
        // body was not JSON; keep the raw text
      }
      throw new ApiError(response.status, detail);
    }
    return JSON.parse(text) as T;
  }

  health(): Promise<HealthInfo> {
    return this.request<HealthInfo>("GET", "/health");
  }

  openSession(userId: string): Promise<SessionInfo> {
    return this.request<SessionInfo>("POST", "/sessions", { user_id: userId });
  }

  ask(sessionId: string, query: string): Promise<TracePayload> {
    return this.request<TracePayload>("POST", `/sessions/${sessionId}/query`, { query });
  }

  closeSession(sessionId: string): Promise<CloseInfo> {
    return this.request<CloseInfo>("DELETE", `/sessions/${sessionId}`);
  }
}
