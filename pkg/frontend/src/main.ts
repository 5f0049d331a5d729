import { ApiClient } from "./api.js";
import { ActivateControl } from "./activate.js";
import { LivePanel } from "./live.js";
import { renderModelPanel } from "./model.js";
import { WhatifPanel } from "./whatif.js";

function apiBase(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("api") ?? "";
}

async function boot(): Promise<void> {
  const api = new ApiClient(apiBase());
  const app = document.getElementById("app");
  if (!app) {
    throw new Error("missing #app container");
  }

  const whatif = new WhatifPanel(api, document);
  const live = new LivePanel(api, document);
  app.appendChild(whatif.root);
  const activate = new ActivateControl(api, whatif, document, () => refreshModel());
  whatif.root.appendChild(activate.root);
  app.appendChild(live.root);

  const modelHolder = document.createElement("div");
  app.appendChild(modelHolder);

  async function refreshModel(): Promise<void> {
    const model = await api.getModel();
    modelHolder.replaceChildren(renderModelPanel(model, document));
  }

  await refreshModel();
  await whatif.refresh();
  try {
    const plan = await api.getPlan();
    live.setBaselines({ predicted_total_ms: plan.predicted.total_ms });
  } catch {
    // no active plan yet
  }
  live.start();
}

void boot();
