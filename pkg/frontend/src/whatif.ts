/** What-if panel: bandwidth/overhead inputs, per-candidate stacked bars.
 *
 * Numbers come straight from /api/whatif (no client-side latency math);
 * only the bar geometry is derived for presentation. At most one request
 * is in flight per panel: responses from superseded requests are dropped.
 */

import type { ApiClient, Breakdown, MeasuredCandidate, WhatifResponse } from "./api.js";

const SEGMENTS = [
  ["t_device_ms", "seg-device"],
  ["t_tx_ms", "seg-tx"],
  ["t_server_ms", "seg-server"],
] as const;

export class WhatifPanel {
  readonly root: HTMLElement;
  private readonly bandwidth: HTMLInputElement;
  private readonly overhead: HTMLInputElement;
  private readonly results: HTMLElement;
  private readonly status: HTMLElement;
  private requestToken = 0;
  lastResponse: WhatifResponse | null = null;
  onResponse: ((r: WhatifResponse) => void) | null = null;

  constructor(private readonly api: ApiClient, doc: Document) {
    this.root = doc.createElement("section");
    this.root.className = "panel whatif-panel";
    this.root.innerHTML = `
      <h2>What-if</h2>
      <label>bandwidth (Mbps)
        <input class="bandwidth" type="number" min="0.1" step="1" value="50">
      </label>
      <label>overhead (ms)
        <input class="overhead" type="number" min="0" step="0.1" value="0">
      </label>
      <div class="status"></div>
      <div class="results"></div>`;
    this.bandwidth = this.root.querySelector(".bandwidth") as HTMLInputElement;
    this.overhead = this.root.querySelector(".overhead") as HTMLInputElement;
    this.results = this.root.querySelector(".results") as HTMLElement;
    this.status = this.root.querySelector(".status") as HTMLElement;
    for (const input of [this.bandwidth, this.overhead]) {
      input.addEventListener("change", () => void this.refresh());
    }
  }

  params() {
    return {
      bandwidth_mbps: Number(this.bandwidth.value),
      overhead_ms: Number(this.overhead.value),
    };
  }

  async refresh(): Promise<void> {
    const token = ++this.requestToken;
    this.status.textContent = "evaluating candidates…";
    try {
      const resp = await this.api.whatif(this.params());
      if (token !== this.requestToken) {
        return; // a newer request superseded this one
      }
      this.lastResponse = resp;
      this.render(resp);
      this.onResponse?.(resp);
    } catch (err) {
      if (token === this.requestToken) {
        this.status.textContent = `what-if failed: ${(err as Error).message}`;
      }
    }
  }

  private render(resp: WhatifResponse): void {
    this.status.textContent =
      `${resp.mode} mode, best split ${resp.argmin.split_point} at ${resp.argmin.total_ms} ms`;
    this.results.replaceChildren();
    const doc = this.results.ownerDocument;
    const maxTotal = Math.max(...resp.candidates.map((c) => c.total_ms));
    for (const cand of resp.candidates) {
      const row = doc.createElement("div");
      row.className = "candidate-row";
      row.dataset.split = String(cand.split_point);
      row.dataset.total = String(cand.total_ms);
      if (cand.split_point === resp.argmin.split_point) {
        row.classList.add("argmin");
      }
      const label = doc.createElement("span");
      label.className = "split-label";
      label.textContent = `c=${cand.split_point}`;
      row.appendChild(label);

      const bar = doc.createElement("div");
      bar.className = "bar";
      if (isBreakdown(cand)) {
        for (const [field, cls] of SEGMENTS) {
          const seg = doc.createElement("span");
          seg.className = `seg ${cls}`;
          seg.dataset.ms = String(cand[field]);
          seg.title = `${field} = ${cand[field]} ms`;
          seg.style.width = `${(cand[field] / maxTotal) * 100}%`;
          bar.appendChild(seg);
        }
      } else {
        const seg = doc.createElement("span");
        seg.className = "seg seg-total";
        seg.dataset.ms = String(cand.total_ms);
        seg.style.width = `${(cand.total_ms / maxTotal) * 100}%`;
        bar.appendChild(seg);
      }
      row.appendChild(bar);

      const total = doc.createElement("span");
      total.className = "total";
      total.textContent = `${cand.total_ms} ms`;
      row.appendChild(total);
      this.results.appendChild(row);
    }
  }
}

function isBreakdown(c: Breakdown | MeasuredCandidate): c is Breakdown {
  return "t_tx_ms" in c;
}
