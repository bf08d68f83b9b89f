import type {
  HealthResponse,
  OverridesPayload,
  PlanRequest,
  PlanResponse,
  PolicySummary,
  QueueRow,
  ServiceError,
  TraceResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly payload: ServiceError,
    readonly status: number,
  ) {
    super(`${payload.code}: ${payload.message}`);
  }
}

export class ServiceUnreachable extends Error {
  constructor(readonly cause_: unknown) {
    super("service unreachable");
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client over the engine's JSON endpoints. */
export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (cause) {
      throw new ServiceUnreachable(cause);
    }
    if (!response.ok) {
      const payload = (await response.json()) as ServiceError;
      throw new ApiError(payload, response.status);
    }
    return (await response.json()) as T;
  }

  health(): Promise<HealthResponse> {
    return this.request<HealthResponse>("/healthz");
  }

  vulns(): Promise<QueueRow[]> {
    return this.request<QueueRow[]>("/vulns");
  }

  trace(cveId: string): Promise<TraceResponse> {
    return this.request<TraceResponse>(`/trace/${encodeURIComponent(cveId)}`);
  }

  policies(): Promise<PolicySummary[]> {
    return this.request<PolicySummary[]>("/policies");
  }

  /** Raw report text: kept as the exact bytes the service sent. */
  async reportText(): Promise<string> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}/report`);
    } catch (cause) {
      throw new ServiceUnreachable(cause);
    }
    if (!response.ok) {
      throw new ApiError((await response.json()) as ServiceError, response.status);
    }
    return response.text();
  }

  plan(body: PlanRequest): Promise<PlanResponse> {
    return this.request<PlanResponse>("/plan", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  submitOverrides(body: OverridesPayload): Promise<unknown> {
    return this.request<unknown>("/overrides", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }
}
