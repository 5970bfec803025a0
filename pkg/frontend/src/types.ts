/** Wire types for the paperrag service API. */

export interface Citation {
  doc_label: string;
  page: number;
}

export interface EvidenceEntry {
  chunk_id: string;
  summary: string;
  score: number;
  doc_label: string | null;
  page: number | null;
}

export interface AskResponse {
  answer: string;
  citations: Citation[];
  evidence: EvidenceEntry[];
  iterations: number;
  complete: boolean;
  warnings: string[];
  latency_seconds: number;
}

export type ImportEntryStatus = "pending" | "fetched" | "ingested" | "failed";

export interface ImportEntry {
  url: string;
  status: ImportEntryStatus;
  error: string | null;
  doc_id: string | null;
}

export interface ImportManifest {
  entries: ImportEntry[];
}

export interface ImportJobResponse {
  job_id: string | null;
  manifest: ImportManifest;
}

export interface ImportStatusResponse {
  job_id: string;
  done: boolean;
  manifest: ImportManifest;
}

export interface PaperInfo {
  id: string;
  label: string;
  pages: number;
  source_uri: string;
}

export interface GraphNode {
  node_id: string;
  label: string;
}

export interface GraphEdge {
  from: string;
  to: string;
  relation_label: string;
}

export interface RefGraphResponse {
  mermaid: string;
  graph: { nodes: GraphNode[]; edges: GraphEdge[] };
}

export type AskMode = "basic" | "fusion";
export type AskModel = "base" | "finetuned";

/** The three experiment rows exposed by the mode toggle. */
export interface MethodChoice {
  label: string;
  mode: AskMode;
  model: AskModel;
}

export const METHOD_CHOICES: MethodChoice[] = [
  { label: "RAG", mode: "basic", model: "base" },
  { label: "RAG Fusion", mode: "fusion", model: "base" },
  { label: "RAG Fusion + RAFT", mode: "fusion", model: "finetuned" },
];
