"""Composition root: one object wiring corpus, index, retrieval, and the
agent together. The HTTP service and the CLI both call through here, which
is what keeps their outputs derivable from the same code path."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

from .agent import AgentConfig, AgentResources, Answer, run_agent
from .corpus import (
    Chunk,
    ChunkingConfig,
    Corpus,
    Document,
    ImportManifest,
    batch_import,
    chunk_document,
)
from .embedding import DeterministicHashEmbedder, EmbeddingProvider, embed_batch
from .evalharness import MethodRegistry
from .generation import TextGenerator
from .index import ExactIndexBase, InMemoryExactIndex, upsert_chunks
from .refgraph import (
    MermaidDoc,
    RefGraph,
    build_relation_graph,
    emit_mermaid,
    extract_references,
    rank_references_topk,
)
from .retrieval import Query, RetrievalConfig, Retriever

METHOD_BASIC = "RAG"
METHOD_FUSION = "RAG Fusion"
METHOD_FUSION_FT = "RAG Fusion + RAFT"


class EngineError(Exception):
    """Invalid engine operation."""


@dataclass
class Engine:
    corpus: Corpus
    index: ExactIndexBase
    embedder: EmbeddingProvider
    generator: TextGenerator | None = None
    finetuned_generator: TextGenerator | None = None
    chunking: ChunkingConfig = ChunkingConfig()
    retrieval_cfg: RetrievalConfig = RetrievalConfig()
    agent_cfg: AgentConfig = AgentConfig()

    def __post_init__(self) -> None:
        self.chunks: dict[str, Chunk] = {}
        self._index_lock = threading.Lock()
        self.retriever = Retriever(self.index, self.embedder)

    @classmethod
    def fresh(cls, *, dim: int = 64, **kwargs) -> "Engine":
        return cls(
            corpus=Corpus(),
            index=InMemoryExactIndex(dim),
            embedder=DeterministicHashEmbedder(dim),
            **kwargs,
        )

    # -- ingestion -----------------------------------------------------

    def ingest_document(
        self, label: str, pages: list[str], *, source_uri: str = ""
    ) -> Document:
        """Ingest, chunk, embed, and index one document."""
        doc = self.corpus.ingest_text(label, pages, source_uri=source_uri)
        chunks = chunk_document(doc, self.chunking)
        vectors = embed_batch([c.text for c in chunks], self.embedder)
        with self._index_lock:
            upsert_chunks(self.index, list(zip(chunks, vectors)))
            for chunk in chunks:
                self.chunks[chunk.id] = chunk
        return doc

    def import_urls(
        self,
        urls: list[str],
        *,
        fetcher: Callable[[str], tuple[bytes, str]] | None = None,
        manifest: ImportManifest | None = None,
        max_workers: int = 4,
    ) -> ImportManifest:
        """Batch-import URLs; every ingested entry is chunked and indexed."""
        return batch_import(
            urls,
            self.corpus,
            fetcher=fetcher,
            manifest=manifest,
            max_workers=max_workers,
            ingest=lambda label, pages, source_uri: self.ingest_document(
                label, pages, source_uri=source_uri
            ),
        )

    # -- question answering ---------------------------------------------

    def _generator_for(self, model: str) -> TextGenerator:
        if model == "base":
            if self.generator is None:
                raise EngineError("no generator configured")
            return self.generator
        if model == "finetuned":
            if self.finetuned_generator is None:
                raise EngineError("no fine-tuned model configured")
            return self.finetuned_generator
        raise EngineError(f"unknown model: {model}")

    def resources(self) -> AgentResources:
        return AgentResources(
            corpus=self.corpus,
            chunks=self.chunks,
            retriever=self.retriever,
            retrieval_cfg=self.retrieval_cfg,
        )

    def ask(
        self,
        question: str,
        *,
        mode: str | None = None,
        model: str = "base",
        k: int | None = None,
        n_variants: int | None = None,
    ) -> Answer:
        if len(self.corpus) == 0:
            raise EngineError("no papers ingested")
        cfg = self.agent_cfg
        if mode is not None:
            cfg = replace(cfg, mode=mode)
        if k is not None:
            cfg = replace(cfg, evidence_per_iteration=k)
        resources = self.resources()
        if n_variants is not None:
            resources.retrieval_cfg = replace(
                resources.retrieval_cfg, n_variants=n_variants
            )
        return run_agent(Query(question), cfg, self._generator_for(model), resources)

    def chunk_source(self, chunk_id: str) -> tuple[str, int] | None:
        """(doc label, page) for a chunk id, or None if unknown."""
        chunk = self.chunks.get(chunk_id)
        if chunk is None:
            return None
        return self.corpus.get(chunk.doc_id).label, chunk.page

    # -- reference graph -------------------------------------------------

    def reference_graph(self, doc_id: str, k: int = 10) -> tuple[RefGraph, MermaidDoc]:
        doc = self.corpus.get(doc_id)
        refs = extract_references(doc)
        if not refs:
            raise EngineError(f"no references found in {doc.label}")
        generator = self._generator_for("base")
        ranked = rank_references_topk(doc, refs, k, self.embedder)
        graph = build_relation_graph(doc, ranked, generator)
        return graph, emit_mermaid(graph)

    # -- evaluation -------------------------------------------------------

    def method_registry(self) -> MethodRegistry:
        """The three comparison methods, in report order. The RAFT row is
        fusion retrieval with the fine-tuned generator handle; retrieval
        code is identical by design."""
        registry = MethodRegistry()

        def basic(q: Query, k: int) -> list[str]:
            cfg = replace(self.retrieval_cfg, k=k, per_list_depth=max(self.retrieval_cfg.per_list_depth, k))
            return self.retriever.retrieve_basic(q, cfg).chunk_ids()

        def fusion_with(generator: TextGenerator | None) -> Callable[[Query, int], list[str]]:
            def method(q: Query, k: int) -> list[str]:
                cfg = replace(self.retrieval_cfg, k=k, per_list_depth=max(self.retrieval_cfg.per_list_depth, k))
                return self.retriever.retrieve_fusion(q, cfg, generator).chunk_ids()

            return method

        registry.register(METHOD_BASIC, basic)
        registry.register(METHOD_FUSION, fusion_with(self.generator))
        registry.register(
            METHOD_FUSION_FT, fusion_with(self.finetuned_generator or self.generator)
        )
        return registry

    # -- RAFT -------------------------------------------------------------

    def all_chunks(self) -> list[Chunk]:
        """Corpus chunks in document-ingest order, then span order."""
        ordered: list[Chunk] = []
        for doc in self.corpus.documents():
            doc_chunks = [c for c in self.chunks.values() if c.doc_id == doc.id]
            ordered.extend(sorted(doc_chunks, key=lambda c: c.char_span[0]))
        return ordered

    # -- persistence --------------------------------------------------------

    def save(self, corpus_dir: str | Path) -> None:
        root = Path(corpus_dir)
        self.corpus.save(root)
        settings = {
            "chunking": {
                "chunk_size_tokens": self.chunking.chunk_size_tokens,
                "overlap_tokens": self.chunking.overlap_tokens,
            },
            "dim": self.embedder.dim,
        }
        (root / "engine.json").write_text(json.dumps(settings, indent=2), encoding="utf-8")
        if len(self.index):
            from .index import save_index

            save_index(self.index, root / "index.rgdx")

    @classmethod
    def load(
        cls,
        corpus_dir: str | Path,
        *,
        embedder: EmbeddingProvider | None = None,
        **kwargs,
    ) -> "Engine":
        """Rebuild an engine from a saved corpus directory. Chunks are
        re-derived under the persisted chunking config (chunking is
        deterministic), so chunk ids line up with the sidecar index; when
        the index file is absent the vectors are recomputed."""
        root = Path(corpus_dir)
        corpus = Corpus.load(root)
        embedder = embedder or DeterministicHashEmbedder(64)
        chunking = kwargs.pop("chunking", None)
        settings_path = root / "engine.json"
        if chunking is None and settings_path.exists():
            saved = json.loads(settings_path.read_text(encoding="utf-8"))["chunking"]
            chunking = ChunkingConfig(**saved)
        chunking = chunking or ChunkingConfig()

        all_chunks: list[Chunk] = []
        for doc in corpus.documents():
            all_chunks.extend(chunk_document(doc, chunking))

        index: ExactIndexBase | None = None
        index_path = root / "index.rgdx"
        if index_path.exists():
            from .index import load_index

            candidate = load_index(index_path)
            if {cid for cid, _ in candidate.entries()} == {c.id for c in all_chunks}:
                index = candidate
        if index is None:
            # No sidecar index, or it was built under a different chunking:
            # recompute from scratch.
            index = InMemoryExactIndex(embedder.dim)
            vectors = embed_batch([c.text for c in all_chunks], embedder)
            upsert_chunks(index, list(zip(all_chunks, vectors)))

        engine = cls(
            corpus=corpus, index=index, embedder=embedder, chunking=chunking, **kwargs
        )
        for chunk in all_chunks:
            engine.chunks[chunk.id] = chunk
        return engine
