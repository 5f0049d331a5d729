/** Live panel: rolling chart of measured totals against the active plan's
 * prediction, with device-only/server-only baseline lines when known. */

import type { ApiClient, LiveEvent } from "./api.js";

export interface BaselineLines {
  predicted_total_ms?: number;
  device_only_ms?: number;
  server_only_ms?: number;
}

export class LivePanel {
  readonly root: HTMLElement;
  private readonly chart: HTMLElement;
  private readonly legend: HTMLElement;
  private readonly events: LiveEvent[] = [];
  private unsubscribe: (() => void) | null = null;

  constructor(
    private readonly api: ApiClient,
    doc: Document,
    private readonly capacity = 60,
    private baselines: BaselineLines = {},
  ) {
    this.root = doc.createElement("section");
    this.root.className = "panel live-panel";
    this.root.innerHTML = `<h2>Live measurements</h2>
      <div class="legend"></div><div class="chart"></div>`;
    this.chart = this.root.querySelector(".chart") as HTMLElement;
    this.legend = this.root.querySelector(".legend") as HTMLElement;
    this.renderLegend();
  }

  start(makeSource?: (url: string) => EventSource): void {
    this.unsubscribe = this.api.subscribeLive((e) => this.push(e), makeSource);
  }

  stop(): void {
    this.unsubscribe?.();
    this.unsubscribe = null;
  }

  setBaselines(b: BaselineLines): void {
    this.baselines = b;
    this.renderLegend();
  }

  push(event: LiveEvent): void {
    if (event.kind === "plan" && typeof event.total_ms === "number") {
      this.setBaselines({ ...this.baselines, predicted_total_ms: event.total_ms });
      return;
    }
    if (event.kind !== "measured" || typeof event.total_ms !== "number") {
      return;
    }
    this.events.push(event);
    if (this.events.length > this.capacity) {
      this.events.shift();
    }
    this.render();
  }

  get measuredTotals(): number[] {
    return this.events.map((e) => e.total_ms as number);
  }

  private renderLegend(): void {
    const parts: string[] = [];
    if (this.baselines.predicted_total_ms !== undefined) {
      parts.push(`plan predicts ${this.baselines.predicted_total_ms} ms`);
    }
    if (this.baselines.device_only_ms !== undefined) {
      parts.push(`device-only ${this.baselines.device_only_ms} ms`);
    }
    if (this.baselines.server_only_ms !== undefined) {
      parts.push(`server-only ${this.baselines.server_only_ms} ms`);
    }
    this.legend.textContent = parts.join(" · ");
  }

  private render(): void {
    const doc = this.chart.ownerDocument;
    this.chart.replaceChildren();
    const reference = [
      ...this.measuredTotals,
      this.baselines.predicted_total_ms ?? 0,
      this.baselines.device_only_ms ?? 0,
      this.baselines.server_only_ms ?? 0,
    ];
    const max = Math.max(...reference, 1e-9);
    for (const event of this.events) {
      const bar = doc.createElement("span");
      bar.className = `live-bar mode-${event.mode ?? "co"}`;
      bar.dataset.totalMs = String(event.total_ms);
      bar.style.height = `${((event.total_ms as number) / max) * 100}%`;
      bar.title = `${event.total_ms} ms (split ${event.split_point})`;
      this.chart.appendChild(bar);
    }
  }
}
