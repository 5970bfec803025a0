#!/usr/bin/env python3
"""Run the method comparison (basic RAG / RAG fusion / fusion + fine-tuned
handle) and the backend comparison on a synthetic self-retrieval gold set,
printing both report tables.

Numbers here characterize the synthetic fixture, not any published result;
the point is the protocol: identical F1 across exact backends, and the
three-row report layout.
"""

import random
import tempfile
from pathlib import Path

from paperrag.corpus import ChunkingConfig, Corpus
from paperrag.embedding import DeterministicHashEmbedder
from paperrag.engine import Engine
from paperrag.evalharness import (
    EvalConfig,
    EvalItem,
    compare_backends,
    render_table,
    run_comparison,
)
from paperrag.generation import ScriptedGenerator, ScriptedRule
from paperrag.index import FileBackedExactIndex, InMemoryExactIndex
from paperrag.retrieval import Query

VARIANT_RULE = ScriptedRule(
    pattern=r"Rewrite the question below",
    reply="first rephrased probe\nsecond rephrased probe",
)


def build_engine(index) -> Engine:
    engine = Engine(
        corpus=Corpus(),
        index=index,
        embedder=DeterministicHashEmbedder(64),
        generator=ScriptedGenerator([VARIANT_RULE]),
        chunking=ChunkingConfig(chunk_size_tokens=12, overlap_tokens=0),
    )
    rng = random.Random(99)
    for d in range(10):
        words = " ".join(f"term{d}_{i}_{rng.randrange(10**6)}" for i in range(60))
        engine.ingest_document(f"paper-{d}", [words])
    return engine


def main() -> None:
    workdir = Path(tempfile.mkdtemp(prefix="paperrag-demo-"))
    engines = {
        "in-memory-exact": build_engine(InMemoryExactIndex(64)),
        "file-backed-exact": build_engine(FileBackedExactIndex(64, workdir / "demo.rgdx")),
    }
    reference = engines["in-memory-exact"]
    rng = random.Random(123)
    items = [
        EvalItem(question=Query(chunk.text), gold_chunk_ids=frozenset({chunk.id}))
        for chunk in rng.sample(reference.all_chunks(), 25)
    ]
    methods = ["RAG", "RAG Fusion", "RAG Fusion + RAFT"]

    table = run_comparison(items, methods, EvalConfig(k=10), reference.method_registry())
    print(render_table(table))

    registries = {name: engine.method_registry() for name, engine in engines.items()}
    backend_table = compare_backends(items, registries, methods, EvalConfig(k=10))
    print(render_table(backend_table))


if __name__ == "__main__":
    main()
