import type {
  ExplainRequest,
  ExplainResponse,
  HealthResponse,
  PredictResponse,
  SampleStatesResponse,
  SimulateRequest,
  SimulateResponse,
} from "./types.js";

/** Error raised for any non-2xx response, carrying the server's detail. */
export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

function describeDetail(body: unknown, fallback: string): string {
  if (body && typeof body === "object" && "detail" in body) {
    const detail = (body as { detail: unknown }).detail;
    // Validation errors arrive as a list of {loc, msg, ...} objects.
    if (Array.isArray(detail)) {
      return detail
        .map((item) =>
          item && typeof item === "object" && "msg" in item
            ? String((item as { msg: unknown }).msg)
            : JSON.stringify(item),
        )
        .join("; ");
    }
    return String(detail);
  }
  return fallback;
}

/** Thin typed client for the five service endpoints. */
export class ApiClient {
  constructor(private readonly base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.base + path, init);
    const body: unknown = await response.json().catch(() => null);
    if (!response.ok) {
      throw new ApiError(
        response.status,
        describeDetail(body, `HTTP ${response.status}`),
      );
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  health(): Promise<HealthResponse> {
    return this.request("/api/health");
  }

  predict(state: number[]): Promise<PredictResponse> {
    return this.post("/api/predict", { state });
  }

  explain(req: ExplainRequest): Promise<ExplainResponse> {
    return this.post("/api/explain", req);
  }

  simulate(req: SimulateRequest): Promise<SimulateResponse> {
    return this.post("/api/simulate", req);
  }

  sampleStates(count: number, seed: number): Promise<SampleStatesResponse> {
    const query = new URLSearchParams({
      count: String(count),
      seed: String(seed),
    });
    return this.request(`/api/sample-states?${query}`);
  }
}
