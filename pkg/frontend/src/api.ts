import type {
  ErrorBody,
  HealthResponse,
  QueryRequest,
  QueryResponse,
  SkillInfo,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

/** Raised when the service answers with a non-2xx status. */
export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
  }
}

async function errorMessage(res: Response): Promise<string> {
  // The service reports failures as {"error": "..."}; fall back to the
  // status text for anything that is not JSON (proxies, crashes).
  try {
    const body = (await res.json()) as Partial<ErrorBody>;
    if (typeof body.error === "string" && body.error.length > 0) {
      return body.error;
    }
  } catch {
    // not JSON
  }
  return res.statusText || `request failed with status ${res.status}`;
}

/**
 * Thin typed client for the help service.
 *
 * The fetch implementation is injected so tests can intercept traffic and
 * the app can run against any origin.
 */
export class HelpClient {
  readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    const impl = fetchImpl ?? globalThis.fetch?.bind(globalThis);
    if (!impl) {
      throw new Error("no fetch implementation available");
    }
    this.fetchImpl = impl;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!res.ok) {
      throw new ApiError(res.status, await errorMessage(res));
    }
    return (await res.json()) as T;
  }

  async query(req: QueryRequest): Promise<QueryResponse> {
    return this.request<QueryResponse>("/v1/query", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
  }

  async health(): Promise<HealthResponse> {
    return this.request<HealthResponse>("/v1/health");
  }

  async skills(): Promise<SkillInfo[]> {
    return this.request<SkillInfo[]>("/v1/skills");
  }
}
