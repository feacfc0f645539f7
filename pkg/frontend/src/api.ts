import type { Cell, NextPayload, SessionInfo, SessionStatus, SubmitResult } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/**
 * Thin typed client over the annotation service. These four endpoints are
 * the client's entire surface; nothing here can reach ground truth.
 */
export class ApiClient {
  constructor(
    private baseUrl = "",
    private fetchImpl: typeof fetch = fetch,
  ) {}

  async createSession(
    annotatorId: string,
    seed: number,
    opts: { practiceCount?: number; perType?: number } = {},
  ): Promise<SessionInfo> {
    const body: Record<string, unknown> = { annotator_id: annotatorId, seed };
    if (opts.practiceCount !== undefined) body.practice_count = opts.practiceCount;
    if (opts.perType !== undefined) body.per_type = opts.perType;
    return this.req<SessionInfo>("POST", "/sessions", body);
  }

  async next(sessionId: string): Promise<NextPayload> {
    return this.req<NextPayload>("GET", `/sessions/${encodeURIComponent(sessionId)}/next`);
  }

  async submit(
    sessionId: string,
    stimulusId: string,
    cell: Cell,
    latencyMs: number,
  ): Promise<SubmitResult> {
    return this.req<SubmitResult>(
      "POST",
      `/sessions/${encodeURIComponent(sessionId)}/responses`,
      { stimulus_id: stimulusId, row: cell.row, col: cell.col, latency_ms: latencyMs },
    );
  }

  async status(sessionId: string): Promise<SessionStatus> {
    return this.req<SessionStatus>("GET", `/sessions/${encodeURIComponent(sessionId)}/status`);
  }

  imageUrl(path: string): string {
    return this.baseUrl + path;
  }

  private async req<T>(method: string, path: string, body?: unknown): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchImpl(this.baseUrl + path, {
        method,
        headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
        body: body !== undefined ? JSON.stringify(body) : undefined,
      });
    } catch (err) {
      throw new ApiError(0, `network error: ${String(err)}`);
    }
    const text = await resp.text();
    if (!resp.ok) {
      // surface the server's message verbatim so the annotator sees why
      let message = text;
      try {
        message = (JSON.parse(text) as { error?: string }).error ?? text;
      } catch {
        /* not json */
      }
      throw new ApiError(resp.status, message);
    }
    return JSON.parse(text) as T;
  }
}
