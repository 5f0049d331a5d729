/** Model panel: the layer chain with FLOPs/output bytes and a split marker. */

import type { ModelDoc } from "./api.js";

export function renderModelPanel(model: ModelDoc, doc: Document): HTMLElement {
  const root = doc.createElement("section");
  root.className = "panel model-panel";
  const split = model.split_point;
  const head = doc.createElement("h2");
  head.textContent = `Model (${model.num_layers} layers, split at ${split ?? "n/a"})`;
  root.appendChild(head);

  const table = doc.createElement("table");
  table.innerHTML =
    "<thead><tr><th>#</th><th>name</th><th>kind</th><th>FLOPs</th>" +
    "<th>output bytes</th><th>runs on</th></tr></thead>";
  const body = doc.createElement("tbody");
  for (const layer of model.layers) {
    const tr = doc.createElement("tr");
    tr.dataset.layer = String(layer.layer);
    const side = split === null ? "?" : layer.layer <= split ? "device" : "server";
    if (split !== null && layer.layer === split) {
      tr.classList.add("split-here");
    }
    for (const text of [
      String(layer.layer),
      layer.name,
      layer.kind,
      String(layer.flops),
      String(layer.output_bytes),
      side,
    ]) {
      const td = doc.createElement("td");
      td.textContent = text;
      tr.appendChild(td);
    }
    body.appendChild(tr);
  }
  table.appendChild(body);
  root.appendChild(table);
  return root;
}
