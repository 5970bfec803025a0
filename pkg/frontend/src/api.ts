/** Typed client for the paperrag HTTP API.
 *
 * Every network call the UI makes goes through this module, which touches
 * only the documented endpoints: /healthz, /papers, /papers/imports/{id},
 * /papers/{id}/refgraph, /ask.
 */

import type {
  AskMode,
  AskModel,
  AskResponse,
  ImportJobResponse,
  ImportStatusResponse,
  PaperInfo,
  RefGraphResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

async function parseOrThrow<T>(response: Response): Promise<T> {
  if (response.ok) {
    return (await response.json()) as T;
  }
  let detail = response.statusText || "request failed";
  try {
    const body = (await response.json()) as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async health(): Promise<boolean> {
    try {
      const response = await fetch(this.url("/healthz"));
      return response.ok;
    } catch {
      return false;
    }
  }

  async listPapers(): Promise<PaperInfo[]> {
    const response = await fetch(this.url("/papers"));
    const body = await parseOrThrow<{ papers: PaperInfo[] }>(response);
    return body.papers;
  }

  async importUrls(urls: string[]): Promise<ImportJobResponse> {
    const response = await fetch(this.url("/papers"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ urls }),
    });
    return parseOrThrow<ImportJobResponse>(response);
  }

  async importStatus(jobId: string): Promise<ImportStatusResponse> {
    const response = await fetch(this.url(`/papers/imports/${jobId}`));
    return parseOrThrow<ImportStatusResponse>(response);
  }

  async ask(
    question: string,
    mode: AskMode,
    model: AskModel,
    k?: number,
  ): Promise<AskResponse> {
    const payload: Record<string, unknown> = { question, mode, model };
    if (k !== undefined) payload.k = k;
    const response = await fetch(this.url("/ask"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    return parseOrThrow<AskResponse>(response);
  }

  async refgraph(docId: string, k: number): Promise<RefGraphResponse> {
    const response = await fetch(
      this.url(`/papers/${encodeURIComponent(docId)}/refgraph?k=${k}`),
    );
    return parseOrThrow<RefGraphResponse>(response);
  }
}
