// Request and response shapes for the counterfactual service API.
// These mirror the server's JSON contracts field for field; the UI never
// invents or recomputes any of the numeric values it displays.

export type MethodName = "raccer" | "bo-gen" | "bo-ts";

export const METHOD_NAMES: readonly MethodName[] = ["raccer", "bo-gen", "bo-ts"];

export interface HealthResponse {
  ready: boolean;
  policy_loaded: boolean;
  autoencoder_loaded: boolean;
  config_hash: string;
  actions: string[];
  feature_length: number;
  grid_size: number;
  max_hp: number;
}

export interface PredictResponse {
  action: string;
  values: number[];
}

export interface WeightOverrides {
  alpha?: number;
  beta?: number;
  gamma?: number;
  theta0?: number;
  theta1?: number;
  theta2?: number;
}

export interface ExplainRequest {
  state: number[];
  action: string;
  method?: MethodName;
  T?: number;
  N?: number;
  k?: number;
  weights?: WeightOverrides;
  seed?: number;
}

export interface PropertyDict {
  reachability_hat: number;
  cost_hat: number;
  uncertainty: number;
  proximity: number;
  sparsity: number;
  dmc: number;
}

export interface CounterfactualPayload {
  state: number[];
  render: string;
  actions: string[];
  properties: PropertyDict;
  loss: number;
  success_rate: number;
}

export interface ExplainDiagnostics {
  nodes_explored: number;
  valid_candidates: number;
  elapsed_ms: number;
  timed_out?: boolean;
  generations?: number;
}

export interface ExplainResponse {
  found: boolean;
  method: string;
  seed: number;
  diagnostics: ExplainDiagnostics;
  counterfactual: CounterfactualPayload | null;
}

export interface SimulateRequest {
  state: number[];
  actions: string[];
  n: number;
  seed?: number;
}

export interface OutcomePayload {
  state: number[];
  render: string;
  terminal: boolean;
  count: number;
  fraction: number;
}

export interface SimulateResponse {
  n: number;
  seed: number;
  outcomes: OutcomePayload[];
  action_frequencies: Record<string, number>;
}

export interface SampledState {
  state: number[];
  render: string;
  policy_action: string;
}

export interface SampleStatesResponse {
  states: SampledState[];
}
