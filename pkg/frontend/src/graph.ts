/** Reference-graph panel: pick a paper and a k, render the service's
 * Mermaid source client-side. Rendering failures fall back to showing the
 * raw source; the panel is never blank. */

import { ApiClient } from "./api.js";
import { renderFlowchartSVG } from "./mermaid-lite.js";
import type { PaperInfo } from "./types.js";

export interface GraphPanel {
  element: HTMLElement;
  setPapers(papers: PaperInfo[]): void;
  /** Resolves when the in-flight fetch/render (if any) settles. */
  whenIdle(): Promise<void>;
}

export function createGraphPanel(api: ApiClient): GraphPanel {
  const root = document.createElement("section");
  root.className = "graph-panel";
  const controls = document.createElement("div");
  controls.className = "graph-controls";
  const select = document.createElement("select");
  select.className = "graph-doc-select";
  const slider = document.createElement("input");
  slider.type = "range";
  slider.className = "graph-k-slider";
  slider.min = "1";
  slider.max = "20";
  slider.value = "10";
  const kLabel = document.createElement("span");
  kLabel.className = "graph-k-label";
  kLabel.textContent = "k=10";
  const view = document.createElement("div");
  view.className = "graph-view";
  controls.append(select, slider, kLabel);
  root.append(controls, view);

  let idle: Promise<void> = Promise.resolve();

  async function refresh(): Promise<void> {
    const docId = select.value;
    if (!docId) return;
    const k = Number(slider.value);
    kLabel.textContent = `k=${k}`;
    try {
      const payload = await api.refgraph(docId, k);
      try {
        view.innerHTML = renderFlowchartSVG(payload.mermaid);
      } catch {
        // Invalid source from the service: show it raw rather than a
        // blank panel.
        view.textContent = "";
        const note = document.createElement("div");
        note.className = "graph-fallback-note";
        note.textContent = "Could not render the diagram; showing raw Mermaid source.";
        const pre = document.createElement("pre");
        pre.className = "graph-fallback-source";
        pre.textContent = payload.mermaid;
        view.append(note, pre);
      }
    } catch (error) {
      view.textContent = "";
      const note = document.createElement("div");
      note.className = "graph-error";
      note.textContent = `Could not load the graph: ${String((error as Error).message)}`;
      view.appendChild(note);
    }
  }

  select.addEventListener("change", () => {
    idle = refresh();
  });
  slider.addEventListener("change", () => {
    idle = refresh();
  });

  return {
    element: root,
    whenIdle: () => idle,
    setPapers(papers: PaperInfo[]): void {
      const current = select.value;
      select.textContent = "";
      for (const paper of papers) {
        const option = document.createElement("option");
        option.value = paper.id;
        option.textContent = paper.label;
        select.appendChild(option);
      }
      if (papers.some((p) => p.id === current)) {
        select.value = current;
      }
    },
  };
}
