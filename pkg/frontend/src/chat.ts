/** Chat panel: ask questions, render cited answers with evidence.
 *
 * One /ask is in flight at a time; the input is disabled while pending and
 * whenever the corpus is empty. Citations render as clickable chips that
 * open the evidence entry whose chunk produced them.
 */

import { ApiClient } from "./api.js";
import { METHOD_CHOICES, type AskResponse } from "./types.js";

export interface ChatTurn {
  question: string;
  response: AskResponse;
  timestamp: number;
}

export interface ChatPanel {
  element: HTMLElement;
  setCorpusReady(ready: boolean): void;
  readonly turns: ChatTurn[];
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function evidenceKey(label: string | null, page: number | null): string {
  return `${label ?? ""}::${page ?? ""}`;
}

function renderTurn(turn: ChatTurn): HTMLElement {
  const wrap = el("article", "chat-turn");
  wrap.appendChild(el("div", "bubble question", turn.question));

  const answer = el("div", "bubble answer");
  answer.appendChild(el("p", "answer-text", turn.response.answer));

  // Evidence list (collapsible), indexed by (label, page) for chip linkage.
  const evidence = el("details", "evidence");
  evidence.appendChild(el("summary", undefined, `Evidence (${turn.response.evidence.length})`));
  const entryByKey = new Map<string, HTMLElement>();
  for (const entry of turn.response.evidence) {
    const item = el("div", "evidence-entry");
    item.dataset.chunkId = entry.chunk_id;
    item.appendChild(
      el(
        "div",
        "evidence-source",
        entry.doc_label !== null ? `(${entry.doc_label}, page ${entry.page})` : entry.chunk_id,
      ),
    );
    item.appendChild(el("div", "evidence-summary", entry.summary));
    item.appendChild(el("div", "evidence-score", `relevance ${entry.score.toFixed(2)}`));
    const key = evidenceKey(entry.doc_label, entry.page);
    if (!entryByKey.has(key)) entryByKey.set(key, item);
    evidence.appendChild(item);
  }

  const chips = el("div", "citation-chips");
  for (const citation of turn.response.citations) {
    const chip = el("button", "citation-chip", `(${citation.doc_label}, page ${citation.page})`);
    chip.type = "button";
    chip.addEventListener("click", () => {
      evidence.open = true;
      for (const entry of entryByKey.values()) entry.classList.remove("highlight");
      const target = entryByKey.get(evidenceKey(citation.doc_label, citation.page));
      if (target) {
        target.classList.add("highlight");
        target.scrollIntoView?.({ block: "nearest" });
      }
    });
    chips.appendChild(chip);
  }

  answer.appendChild(chips);
  answer.appendChild(evidence);
  if (!turn.response.complete) {
    answer.appendChild(el("div", "incomplete-note", "Answer marked incomplete by the agent."));
  }
  wrap.appendChild(answer);
  return wrap;
}

export function createChatPanel(api: ApiClient): ChatPanel {
  const root = el("section", "chat-panel");
  const thread = el("div", "chat-thread");
  const form = el("form", "chat-form");
  const input = el("input", "chat-input") as HTMLInputElement;
  input.type = "text";
  input.placeholder = "Ask about the ingested papers…";
  const methodSelect = el("select", "method-select") as HTMLSelectElement;
  METHOD_CHOICES.forEach((choice, i) => {
    const option = el("option", undefined, choice.label) as HTMLOptionElement;
    option.value = String(i);
    methodSelect.appendChild(option);
  });
  const send = el("button", "send-button", "Ask") as HTMLButtonElement;
  send.type = "submit";
  form.append(methodSelect, input, send);
  root.append(thread, form);

  const turns: ChatTurn[] = [];
  let corpusReady = false;
  let pending = false;

  function syncDisabled(): void {
    const disabled = !corpusReady || pending;
    input.disabled = disabled;
    send.disabled = disabled;
    input.placeholder = corpusReady
      ? "Ask about the ingested papers…"
      : "Import at least one paper first";
  }

  async function submit(question: string): Promise<void> {
    pending = true;
    syncDisabled();
    const choice = METHOD_CHOICES[Number(methodSelect.value)];
    try {
      const response = await api.ask(question, choice.mode, choice.model);
      const turn: ChatTurn = { question, response, timestamp: Date.now() };
      turns.push(turn);
      thread.appendChild(renderTurn(turn));
      input.value = "";
    } catch (error) {
      const bubble = el("div", "bubble error");
      bubble.appendChild(el("span", undefined, `Request failed: ${String((error as Error).message)}`));
      const retry = el("button", "retry-button", "Retry") as HTMLButtonElement;
      retry.type = "button";
      retry.addEventListener("click", () => {
        bubble.remove();
        void submit(question);
      });
      bubble.appendChild(retry);
      thread.appendChild(bubble);
    } finally {
      pending = false;
      syncDisabled();
    }
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const question = input.value.trim();
    if (!question || pending || !corpusReady) return;
    void submit(question);
  });

  syncDisabled();
  return {
    element: root,
    turns,
    setCorpusReady(ready: boolean): void {
      corpusReady = ready;
      syncDisabled();
    },
  };
}
