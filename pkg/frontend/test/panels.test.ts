import { describe, expect, it } from "vitest";

import { ActivateControl } from "../src/activate.js";
import { ApiClient, type LiveEvent, type ModelDoc } from "../src/api.js";
import { LivePanel } from "../src/live.js";
import { renderModelPanel } from "../src/model.js";
import { WhatifPanel } from "../src/whatif.js";
import { fakeFetch, measuredWhatif } from "./helpers.js";

const MODEL: ModelDoc = {
  model_hash: "ab".repeat(32),
  input_shape: [3, 32, 32],
  input_bytes: 12288,
  num_layers: 4,
  split_point: 2,
  layers: [
    { layer: 1, name: "conv1", kind: "conv2d", output_shape: [16, 32, 32], flops: 14155776, output_bytes: 65536 },
    { layer: 2, name: "relu1", kind: "relu", output_shape: [16, 32, 32], flops: 0, output_bytes: 65536 },
    { layer: 3, name: "flatten", kind: "flatten", output_shape: [16384], flops: 0, output_bytes: 65536 },
    { layer: 4, name: "fc", kind: "linear", output_shape: [4], flops: 131072, output_bytes: 16 },
  ],
};

describe("model panel", () => {
  it("renders every layer with server-provided numbers and the split marker", () => {
    const panel = renderModelPanel(MODEL, document);
    const rows = panel.querySelectorAll("tbody tr");
    expect(rows.length).toBe(4);
    const first = rows[0]!;
    const cells = Array.from(first.querySelectorAll("td"), (td) => td.textContent);
    expect(cells).toEqual(["1", "conv1", "conv2d", "14155776", "65536", "device"]);
    expect(rows[1]!.classList.contains("split-here")).toBe(true);
    const sides = Array.from(rows, (r) => r.querySelectorAll("td")[5]!.textContent);
    expect(sides).toEqual(["device", "device", "server", "server"]);
  });
});

describe("live panel", () => {
  function event(total: number, mode = "co"): LiveEvent {
    return {
      kind: "measured", split_point: 2, mode,
      t_device_ms: total / 4, t_tx_ms: total / 2, t_server_ms: total / 4, total_ms: total,
    };
  }

  it("appends measured events verbatim and honors its capacity", () => {
    const panel = new LivePanel(new ApiClient(""), document, 3);
    for (const total of [4, 8, 6, 10]) {
      panel.push(event(total));
    }
    const bars = panel.root.querySelectorAll<HTMLElement>(".live-bar");
    expect(bars.length).toBe(3);
    expect(Array.from(bars, (b) => b.dataset.totalMs)).toEqual(["8", "6", "10"]);
  });

  it("plan events update the prediction baseline instead of charting", () => {
    const panel = new LivePanel(new ApiClient(""), document, 8);
    panel.push({ kind: "plan", split_point: 3, total_ms: 12.5 });
    panel.push(event(5));
    expect(panel.root.querySelector(".legend")!.textContent).toContain("12.5 ms");
    expect(panel.root.querySelectorAll(".live-bar").length).toBe(1);
  });

  it("ignores keepalive-ish events without totals", () => {
    const panel = new LivePanel(new ApiClient(""), document);
    panel.push({ kind: "served", split_point: 2 });
    expect(panel.root.querySelectorAll(".live-bar").length).toBe(0);
  });
});

describe("plan activation", () => {
  it("posts the what-if link settings and reports the re-arm", async () => {
    const { fetchFn, calls } = fakeFetch({
      "POST /api/whatif": () => measuredWhatif(),
      "POST /api/plan": (body) => ({
        model_hash: "00".repeat(32),
        split_point: 6,
        strategy_ref: "",
        mode: "measured",
        predicted: { split_point: 6, t_device_ms: 20.07, t_tx_ms: 0, t_server_ms: 0, total_ms: 20.07 },
        link: body,
      }),
    });
    const api = new ApiClient("", fetchFn);
    const whatif = new WhatifPanel(api, document);
    (whatif.root.querySelector(".bandwidth") as HTMLInputElement).value = "42";
    (whatif.root.querySelector(".overhead") as HTMLInputElement).value = "0.5";
    let activated = -1;
    const control = new ActivateControl(api, whatif, document, (split) => (activated = split));
    await control.activate();
    const planCall = calls.find((c) => c.key === "POST /api/plan");
    expect(planCall?.body).toEqual({ bandwidth_mbps: 42, overhead_ms: 0.5 });
    expect(activated).toBe(6);
    expect(control.root.querySelector(".status")!.textContent).toContain("split 6");
    expect(control.root.querySelector(".status")!.textContent).toContain("re-handshake");
  });
});
