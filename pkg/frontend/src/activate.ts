/** Plan activation: push the current what-if link settings as the active
 * plan. The daemon persists it and re-arms; edges holding the old split
 * get handshake status 2 and re-fetch. */

import type { ApiClient } from "./api.js";
import type { WhatifPanel } from "./whatif.js";

export class ActivateControl {
  readonly root: HTMLElement;
  private readonly button: HTMLButtonElement;
  private readonly status: HTMLElement;

  constructor(
    private readonly api: ApiClient,
    private readonly whatif: WhatifPanel,
    doc: Document,
    private readonly onActivated: ((split: number) => void) | null = null,
  ) {
    this.root = doc.createElement("div");
    this.root.className = "activate-control";
    this.root.innerHTML = `<button class="activate">Activate plan</button>
      <span class="status"></span>`;
    this.button = this.root.querySelector(".activate") as HTMLButtonElement;
    this.status = this.root.querySelector(".status") as HTMLElement;
    this.button.addEventListener("click", () => void this.activate());
  }

  async activate(): Promise<void> {
    this.button.disabled = true;
    this.status.textContent = "activating…";
    try {
      const plan = await this.api.activatePlan(this.whatif.params());
      this.status.textContent =
        `active: split ${plan.split_point} (${plan.predicted.total_ms} ms predicted); ` +
        "daemon re-armed, stale edges must re-handshake";
      this.onActivated?.(plan.split_point);
    } catch (err) {
      this.status.textContent = `activation failed: ${(err as Error).message}`;
    } finally {
      this.button.disabled = false;
    }
  }
}
