// A scripted stand-in for the HTTP service: routes keyed by method and
// path, with every call recorded so tests can assert on request bodies.

export interface RouteResult {
  status?: number;
  body: unknown;
}

export type Route = (
  body: unknown,
  url: string,
) => RouteResult | Promise<RouteResult>;

export interface RecordedCall {
  method: string;
  path: string;
  url: string;
  body: unknown;
  headers: Record<string, string>;
}

export class FakeService {
  readonly calls: RecordedCall[] = [];
  private readonly routes = new Map<string, Route>();

  on(method: string, path: string, route: Route): void {
    this.routes.set(`${method} ${path}`, route);
  }

  callsTo(path: string): RecordedCall[] {
    return this.calls.filter((c) => c.path === path);
  }

  readonly fetch = async (
    input: unknown,
    init?: { method?: string; body?: string; headers?: Record<string, string> },
  ) => {
    const url = String(input);
    const path = url.split("?")[0] ?? url;
    const method = (init?.method ?? "GET").toUpperCase();
    const body = init?.body !== undefined ? JSON.parse(init.body) : undefined;
    this.calls.push({ method, path, url, body, headers: init?.headers ?? {} });
    const route = this.routes.get(`${method} ${path}`);
    if (!route) {
      return {
        ok: false,
        status: 404,
        statusText: "Not Found",
        json: async () => ({ detail: `no route for ${method} ${path}` }),
      };
    }
    const result = await route(body, url);
    const status = result.status ?? 200;
    return {
      ok: status >= 200 && status < 300,
      status,
      statusText: `HTTP ${status}`,
      json: async () => result.body,
    };
  };
}

// -- canned payloads matching the service's JSON contracts -------------------

export const HEALTH = {
  ready: true,
  policy_loaded: true,
  autoencoder_loaded: true,
  config_hash: "0123456789abcdef",
  actions: ["UP", "DOWN", "LEFT", "RIGHT", "SHOOT", "CHOP", "WAIT"],
  feature_length: 9,
  grid_size: 5,
  max_hp: 3,
};

export const FACTUAL = [3, 1, 0, 0, 1, 0, 2, 0, 1];

// One sampled unrolling of ["RIGHT", "SHOOT"] from FACTUAL.
export const WALK = [
  FACTUAL,
  [3, 2, 0, 0, 1, 0, 2, 0, 1],
  [3, 2, 0, 0, 1, 0, 1, 0, 1],
];

export const EXPLAIN_OK = {
  found: true,
  method: "raccer",
  seed: 42,
  diagnostics: {
    nodes_explored: 57,
    valid_candidates: 4,
    timed_out: false,
    elapsed_ms: 123.456,
  },
  counterfactual: {
    state: WALK[2],
    render: "mock",
    actions: ["RIGHT", "SHOOT"],
    properties: {
      reachability_hat: 0.4,
      cost_hat: 0.35,
      uncertainty: 0.3111,
      proximity: 0.1234,
      sparsity: 2,
      dmc: 0.0456,
    },
    loss: 1.2345678,
    success_rate: 0.6889,
  },
};

export const EXPLAIN_IDENTITY = {
  found: true,
  method: "raccer",
  seed: 7,
  diagnostics: {
    nodes_explored: 1,
    valid_candidates: 1,
    timed_out: false,
    elapsed_ms: 2.5,
  },
  counterfactual: {
    state: FACTUAL,
    render: "mock",
    actions: [] as string[],
    properties: {
      reachability_hat: 0,
      cost_hat: 0,
      uncertainty: 0,
      proximity: 0,
      sparsity: 0,
      dmc: 0,
    },
    loss: 0,
    success_rate: 1,
  },
};

export const EXPLAIN_NONE = {
  found: false,
  method: "bo-ts",
  seed: 11,
  diagnostics: {
    nodes_explored: 311,
    valid_candidates: 0,
    timed_out: true,
    elapsed_ms: 9.5,
  },
  counterfactual: null,
};

export const HISTOGRAM = {
  n: 250,
  seed: 42,
  outcomes: [
    {
      state: WALK[2],
      render: "end-a",
      terminal: false,
      count: 175,
      fraction: 0.7,
    },
    {
      state: WALK[1],
      render: "end-b",
      terminal: true,
      count: 75,
      fraction: 0.3,
    },
  ],
  action_frequencies: { SHOOT: 0.7, UP: 0.25 },
};

export function prefixWalkResponse(req: {
  actions: string[];
  seed?: number;
}): RouteResult {
  const idx = req.actions.length;
  return {
    body: {
      n: 1,
      seed: req.seed ?? 0,
      outcomes: [
        {
          state: WALK[idx],
          render: "step",
          terminal: false,
          count: 1,
          fraction: 1,
        },
      ],
      action_frequencies: { SHOOT: 1 },
    },
  };
}

export function defaultService(): FakeService {
  const svc = new FakeService();
  svc.on("GET", "/api/health", () => ({ body: HEALTH }));
  svc.on("POST", "/api/predict", () => ({
    body: { action: "UP", values: [0.1, 0, 0, 0, 0, 0, 0] },
  }));
  svc.on("GET", "/api/sample-states", () => ({
    body: { states: [{ state: FACTUAL, render: "mock", policy_action: "UP" }] },
  }));
  svc.on("POST", "/api/explain", () => ({ body: EXPLAIN_OK }));
  svc.on("POST", "/api/simulate", (body) => {
    const req = body as { n: number; actions: string[]; seed?: number };
    return req.n === 1 ? prefixWalkResponse(req) : { body: HISTOGRAM };
  });
  return svc;
}
