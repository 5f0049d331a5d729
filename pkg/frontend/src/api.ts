/** Typed client for the split-inference control API.
 *
 * The console renders server-computed numbers verbatim; every latency
 * figure shown anywhere in the UI originates from one of these calls.
 */

export interface Breakdown {
  split_point: number;
  t_device_ms: number;
  t_tx_ms: number;
  t_server_ms: number;
  total_ms: number;
}

export interface MeasuredCandidate {
  split_point: number;
  total_ms: number;
}

export interface WhatifRequest {
  bandwidth_mbps: number;
  overhead_ms?: number;
  split_point?: number;
  include_endpoints?: boolean;
}

export interface WhatifResponse {
  mode: "predicted" | "measured";
  candidates: Breakdown[] | MeasuredCandidate[];
  argmin: Breakdown | MeasuredCandidate;
  requested?: Breakdown;
}

export interface ModelLayer {
  layer: number;
  name: string;
  kind: string;
  output_shape: number[];
  flops: number;
  output_bytes: number;
}

export interface ModelDoc {
  model_hash: string;
  input_shape: number[] | null;
  input_bytes: number;
  num_layers: number;
  split_point: number | null;
  layers: ModelLayer[];
}

export interface PlanDoc {
  model_hash: string;
  split_point: number;
  strategy_ref: string;
  mode: string;
  predicted: Breakdown;
  link: { bandwidth_mbps: number; overhead_ms: number } | null;
}

export interface LiveEvent {
  kind: string;
  split_point?: number;
  t_device_ms?: number;
  t_tx_ms?: number;
  t_server_ms?: number;
  total_ms?: number;
  server_compute_ms?: number;
  mode?: string;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly base: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchFn(`${this.base}${path}`, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const doc = (await resp.json()) as T & { error?: string };
    if (!resp.ok) {
      throw new Error(doc.error ?? `${method} ${path} failed with ${resp.status}`);
    }
    return doc;
  }

  getModel(): Promise<ModelDoc> {
    return this.request("GET", "/api/model");
  }

  whatif(req: WhatifRequest): Promise<WhatifResponse> {
    return this.request("POST", "/api/whatif", req);
  }

  activatePlan(req: WhatifRequest): Promise<PlanDoc> {
    return this.request("POST", "/api/plan", req);
  }

  getPlan(): Promise<PlanDoc> {
    return this.request("GET", "/api/plan");
  }

  /** Subscribe to the live event stream; returns an unsubscribe handle. */
  subscribeLive(
    onEvent: (e: LiveEvent) => void,
    makeSource: (url: string) => EventSource = (url) => new EventSource(url),
  ): () => void {
    const source = makeSource(`${this.base}/api/live`);
    source.onmessage = (msg) => {
      try {
        onEvent(JSON.parse(msg.data) as LiveEvent);
      } catch {
        // keepalives and malformed lines are dropped
      }
    };
    return () => source.close();
  }
}
