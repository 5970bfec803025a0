"""paperrag: retrieval-augmented question answering over scientific papers.

Library surface re-exported here; see the CLI (``paperrag --help``) and the
HTTP service (:mod:`paperrag.service`) for the other entry points.
"""

from .agent import (
    AgentConfig,
    Answer,
    Citation,
    Evidence,
    parallel_generate_over_refs,
    run_agent,
    tool_answer,
    tool_gather_evidence,
    tool_search,
)
from .corpus import (
    Chunk,
    ChunkingConfig,
    Corpus,
    CorpusError,
    Document,
    ImportManifest,
    batch_import,
    chunk_document,
)
from .embedding import DeterministicHashEmbedder, EmbeddingVector, HttpEmbedder, embed_batch
from .engine import Engine
from .evalharness import (
    EvalItem,
    EvalMetrics,
    ReportTable,
    compare_backends,
    compute_f1,
    compute_precision,
    compute_recall,
    measure_latency,
    run_comparison,
)
from .generation import HttpGenerator, ScriptedGenerator, TextGenerator
from .index import (
    FileBackedExactIndex,
    InMemoryExactIndex,
    SearchHit,
    create_index,
    load_index,
    save_index,
    upsert_chunks,
)
from .raftdata import RaftConfig, RaftRecord, build_records, export_records, validate_export
from .refgraph import (
    MermaidDoc,
    RefGraph,
    build_relation_graph,
    emit_mermaid,
    extract_references,
    parse_mermaid,
    rank_references_topk,
)
from .retrieval import (
    FusedRanking,
    Query,
    RankedList,
    RetrievalConfig,
    Retriever,
    generate_query_variants,
    rrf_fuse,
)

__version__ = "0.1.0"

__all__ = [
    "AgentConfig",
    "Answer",
    "Chunk",
    "ChunkingConfig",
    "Citation",
    "Corpus",
    "CorpusError",
    "DeterministicHashEmbedder",
    "Document",
    "EmbeddingVector",
    "Engine",
    "EvalItem",
    "EvalMetrics",
    "Evidence",
    "FileBackedExactIndex",
    "FusedRanking",
    "HttpEmbedder",
    "HttpGenerator",
    "ImportManifest",
    "InMemoryExactIndex",
    "MermaidDoc",
    "Query",
    "RaftConfig",
    "RaftRecord",
    "RankedList",
    "RefGraph",
    "ReportTable",
    "RetrievalConfig",
    "Retriever",
    "ScriptedGenerator",
    "SearchHit",
    "TextGenerator",
    "batch_import",
    "build_records",
    "build_relation_graph",
    "chunk_document",
    "compare_backends",
    "compute_f1",
    "compute_precision",
    "compute_recall",
    "create_index",
    "embed_batch",
    "emit_mermaid",
    "export_records",
    "extract_references",
    "generate_query_variants",
    "load_index",
    "measure_latency",
    "parallel_generate_over_refs",
    "parse_mermaid",
    "rank_references_topk",
    "rrf_fuse",
    "run_agent",
    "run_comparison",
    "save_index",
    "tool_answer",
    "tool_gather_evidence",
    "tool_search",
    "upsert_chunks",
    "validate_export",
]
