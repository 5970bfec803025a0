/** Application entry: wire the chat, import, and graph panels to the
 * service and keep the ask input gated on corpus availability. */

import { ApiClient } from "./api.js";
import { createChatPanel } from "./chat.js";
import { createGraphPanel } from "./graph.js";
import { createImportPanel } from "./importer.js";

export async function boot(root: HTMLElement, api: ApiClient): Promise<void> {
  root.textContent = "";
  const header = document.createElement("header");
  header.className = "app-header";
  header.textContent = "paperrag — ask the papers";
  const chat = createChatPanel(api);
  const graph = createGraphPanel(api);

  async function refreshPapers(): Promise<void> {
    const papers = await api.listPapers();
    chat.setCorpusReady(papers.length > 0);
    graph.setPapers(papers);
  }

  const importer = createImportPanel(api, () => {
    void refreshPapers();
  });

  root.append(header, chat.element, importer.element, graph.element);

  if (!(await api.health())) {
    const offline = document.createElement("div");
    offline.className = "service-offline";
    offline.textContent = "Service unreachable; start it with: paperrag serve";
    root.insertBefore(offline, chat.element);
  }
  await refreshPapers();
}

// Browser entry; tests import boot() directly instead.
if (typeof document !== "undefined" && document.getElementById("app")) {
  const base = (window as { PAPERRAG_BASE_URL?: string }).PAPERRAG_BASE_URL ?? "";
  void boot(document.getElementById("app") as HTMLElement, new ApiClient(base));
}
