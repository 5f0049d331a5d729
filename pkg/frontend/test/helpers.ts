import type { Breakdown, FetchLike, WhatifResponse } from "../src/api.js";

export function jsonResponse(doc: unknown, status = 200): Response {
  return new Response(JSON.stringify(doc), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/** Router-style fetch stub: one handler per "METHOD path". */
export function fakeFetch(
  handlers: Record<string, (body: unknown) => unknown | Promise<unknown>>,
): { fetchFn: FetchLike; calls: Array<{ key: string; body: unknown }> } {
  const calls: Array<{ key: string; body: unknown }> = [];
  const fetchFn: FetchLike = async (input, init) => {
    const method = init?.method ?? "GET";
    const path = input.replace(/^https?:\/\/[^/]+/, "");
    const key = `${method} ${path}`;
    const handler = handlers[key];
    if (!handler) {
      return jsonResponse({ error: `no handler for ${key}` }, 404);
    }
    const body = init?.body ? JSON.parse(init.body as string) : undefined;
    calls.push({ key, body });
    const result = await handler(body);
    return result instanceof Response ? result : jsonResponse(result);
  };
  return { fetchFn, calls };
}

/** Mirrors the daemon's additive model so tests can derive consistent
 * payloads (the panel itself never does this arithmetic). */
export function predictedWhatif(
  deviceMs: number[],
  serverMs: number[],
  outputBytes: number[],
  inputBytes: number,
  bandwidthMbps: number,
  overheadMs = 0,
): WhatifResponse {
  const candidates: Breakdown[] = [];
  for (let c = 1; c <= deviceMs.length; c++) {
    const t_device = deviceMs.slice(0, c).reduce((a, b) => a + b, 0);
    const t_server = serverMs.slice(c).reduce((a, b) => a + b, 0);
    const bytes = c === 0 ? inputBytes : (outputBytes[c - 1] as number);
    const t_tx = (bytes * 8) / (bandwidthMbps * 1e6) * 1000 + overheadMs;
    candidates.push({
      split_point: c,
      t_device_ms: t_device,
      t_tx_ms: t_tx,
      t_server_ms: t_server,
      total_ms: t_device + t_tx + t_server,
    });
  }
  const argmin = candidates.reduce((a, b) => (b.total_ms < a.total_ms ? b : a));
  return { mode: "predicted", candidates, argmin };
}

export const RECORDED_SWEEP_TOTALS: Record<number, number> = {
  1: 99.91, 2: 166.98, 3: 65.89, 4: 85.03, 5: 31.91,
  6: 20.07, 7: 60.88, 8: 40.98, 9: 55.93, 10: 37.96,
  11: 57.79, 12: 36.11, 13: 27.96, 14: 26.34, 15: 39.15,
  16: 34.57, 17: 31.75, 18: 36.04, 19: 36.67, 20: 36.59,
};

export function measuredWhatif(): WhatifResponse {
  const candidates = Object.entries(RECORDED_SWEEP_TOTALS).map(([c, total]) => ({
    split_point: Number(c),
    total_ms: total,
  }));
  const argmin = candidates.reduce((a, b) => (b.total_ms < a.total_ms ? b : a));
  return { mode: "measured", candidates, argmin };
}
