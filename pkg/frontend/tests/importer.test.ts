import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api";
import { createImportPanel } from "../src/importer";
import type { ImportManifest } from "../src/types";
import { flush, installMockService } from "./mock-service";

afterEach(() => {
  vi.unstubAllGlobals();
  document.body.innerHTML = "";
});

function mount(onIngested: () => void = () => {}) {
  const panel = createImportPanel(new ApiClient(), onIngested, 0);
  document.body.appendChild(panel.element);
  const textarea = panel.element.querySelector(".import-urls") as HTMLTextAreaElement;
  const form = panel.element.querySelector(".import-form") as HTMLFormElement;
  const submit = panel.element.querySelector(".import-button") as HTMLButtonElement;
  return { panel, textarea, form, submit };
}

function type(textarea: HTMLTextAreaElement, value: string): void {
  textarea.value = value;
  textarea.dispatchEvent(new Event("input"));
}

function manifest(statuses: Array<[string, string, string?]>): ImportManifest {
  return {
    entries: statuses.map(([url, status, error]) => ({
      url,
      status: status as ImportManifest["entries"][number]["status"],
      error: error ?? null,
      doc_id: status === "ingested" ? "doc" : null,
    })),
  };
}

describe("import flow", () => {
  it("disables submit while the textarea is blank", () => {
    installMockService([]);
    const { textarea, submit } = mount();
    expect(submit.disabled).toBe(true);
    type(textarea, "   \n  \n");
    expect(submit.disabled).toBe(true);
    type(textarea, "http://papers/one.txt\n");
    expect(submit.disabled).toBe(false);
  });

  it("renders one status row per URL with error details", async () => {
    installMockService([
      [
        /^\/papers$/,
        () => ({
          status: 202,
          json: {
            job_id: null,
            manifest: manifest([
              ["http://papers/ok.txt", "ingested"],
              ["http://papers/bad.txt", "failed", "404 not found"],
            ]),
          },
        }),
      ],
    ]);
    const ingested: string[] = [];
    const { panel, textarea, form } = mount(() => ingested.push("refresh"));
    type(textarea, "http://papers/ok.txt\nhttp://papers/bad.txt");
    form.dispatchEvent(new Event("submit", { cancelable: true }));
    await panel.whenIdle();
    await flush();

    const rows = document.querySelectorAll(".import-row");
    expect(rows).toHaveLength(2);
    expect(rows[0].textContent).toContain("ingested");
    expect(rows[1].textContent).toContain("failed");
    expect(document.querySelectorAll(".import-error")).toHaveLength(1);
    expect(document.querySelector(".import-error")?.textContent).toBe("404 not found");
    expect(ingested).toEqual(["refresh"]);
  });

  it("polls a background job until every entry is terminal", async () => {
    const urls = Array.from({ length: 5 }, (_, i) => `http://papers/p${i}.txt`);
    const pending = manifest(urls.map((u) => [u, "pending"]));
    const half = manifest(
      urls.map((u, i) => [u, i < 3 ? "ingested" : "pending"]),
    );
    const done = manifest(urls.map((u) => [u, "ingested"]));
    const service = installMockService([
      [/^\/papers$/, () => ({ status: 202, json: { job_id: "job9", manifest: pending } })],
      [
        /^\/papers\/imports\/job9$/,
        (_path, _body, callIndex) =>
          callIndex === 0
            ? { json: { job_id: "job9", done: false, manifest: half } }
            : { json: { job_id: "job9", done: true, manifest: done } },
      ],
    ]);
    const { panel, textarea, form } = mount();
    type(textarea, urls.join("\n"));
    form.dispatchEvent(new Event("submit", { cancelable: true }));
    await panel.whenIdle();

    const rows = document.querySelectorAll(".import-row");
    expect(rows).toHaveLength(5);
    for (const row of rows) {
      expect(row.textContent).toContain("ingested");
    }
    const pollCalls = service.calls.filter((c) => c.path.includes("/imports/"));
    expect(pollCalls).toHaveLength(2); // scripted two-step poll sequence
    expect(service.undocumented).toEqual([]);
  });

  it("shows every error and keeps working when all URLs fail", async () => {
    installMockService([
      [
        /^\/papers$/,
        () => ({
          status: 202,
          json: {
            job_id: null,
            manifest: manifest([
              ["http://papers/a.txt", "failed", "unreachable"],
              ["http://papers/b.txt", "failed", "unsupported content type: image/png"],
            ]),
          },
        }),
      ],
    ]);
    const ingested: string[] = [];
    const { panel, textarea, form, submit } = mount(() => ingested.push("refresh"));
    type(textarea, "http://papers/a.txt\nhttp://papers/b.txt");
    form.dispatchEvent(new Event("submit", { cancelable: true }));
    await panel.whenIdle();
    await flush();

    expect(document.querySelectorAll(".import-error")).toHaveLength(2);
    expect(ingested).toEqual([]); // nothing ingested, no refresh
    expect(submit.disabled).toBe(false); // panel still usable
  });

  it("surfaces request-level failures without crashing", async () => {
    installMockService([
      [/^\/papers$/, () => ({ status: 400, json: { detail: "empty url list" } })],
    ]);
    const { panel, textarea, form } = mount();
    type(textarea, "http://papers/a.txt");
    form.dispatchEvent(new Event("submit", { cancelable: true }));
    await panel.whenIdle();
    expect(document.querySelector(".import-list")?.textContent).toContain("empty url list");
  });
});
