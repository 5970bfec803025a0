/** Batch-import panel: paste URLs, watch per-URL status until every entry
 * reaches a terminal state. Polling runs independently of the chat. */

import { ApiClient } from "./api.js";
import type { ImportManifest } from "./types.js";

export interface ImportPanel {
  element: HTMLElement;
  /** Resolves when the current import (if any) reaches a terminal state. */
  whenIdle(): Promise<void>;
}

const STATUS_GLYPH: Record<string, string> = {
  pending: "…",
  fetched: "⇣",
  ingested: "✓",
  failed: "✗",
};

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

function renderManifest(list: HTMLElement, manifest: ImportManifest): void {
  list.textContent = "";
  for (const entry of manifest.entries) {
    const row = document.createElement("div");
    row.className = `import-row status-${entry.status}`;
    const glyph = document.createElement("span");
    glyph.className = "status-glyph";
    glyph.textContent = STATUS_GLYPH[entry.status] ?? "?";
    const url = document.createElement("span");
    url.className = "import-url";
    url.textContent = entry.url;
    const status = document.createElement("span");
    status.className = "import-status";
    status.textContent = entry.status;
    row.append(glyph, url, status);
    if (entry.error) {
      const error = document.createElement("span");
      error.className = "import-error";
      error.textContent = entry.error;
      row.appendChild(error);
    }
    list.appendChild(row);
  }
}

export function createImportPanel(
  api: ApiClient,
  onIngested: () => void,
  pollDelayMs = 500,
): ImportPanel {
  const root = document.createElement("section");
  root.className = "import-panel";
  const form = document.createElement("form");
  form.className = "import-form";
  const textarea = document.createElement("textarea");
  textarea.className = "import-urls";
  textarea.placeholder = "One paper URL per line";
  textarea.rows = 3;
  const submit = document.createElement("button");
  submit.type = "submit";
  submit.className = "import-button";
  submit.textContent = "Import";
  submit.disabled = true;
  const list = document.createElement("div");
  list.className = "import-list";
  form.append(textarea, submit);
  root.append(form, list);

  let idle: Promise<void> = Promise.resolve();

  function lines(): string[] {
    return textarea.value
      .split("\n")
      .map((line) => line.trim())
      .filter((line) => line.length > 0);
  }

  textarea.addEventListener("input", () => {
    submit.disabled = lines().length === 0;
  });

  async function runImport(urls: string[]): Promise<void> {
    submit.disabled = true;
    try {
      const job = await api.importUrls(urls);
      renderManifest(list, job.manifest);
      let manifest = job.manifest;
      if (job.job_id !== null) {
        for (;;) {
          const status = await api.importStatus(job.job_id);
          manifest = status.manifest;
          renderManifest(list, manifest);
          if (status.done) break;
          await sleep(pollDelayMs);
        }
      }
      if (manifest.entries.some((entry) => entry.status === "ingested")) {
        onIngested();
      }
    } catch (error) {
      const failure = document.createElement("div");
      failure.className = "import-row status-failed";
      failure.textContent = `Import failed: ${String((error as Error).message)}`;
      list.appendChild(failure);
    } finally {
      submit.disabled = lines().length === 0;
    }
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const urls = lines();
    if (urls.length === 0) return;
    idle = runImport(urls);
  });

  return {
    element: root,
    whenIdle: () => idle,
  };
}
