#!/usr/bin/env python3
"""Fully offline demo: ingest three toy papers, ask the same question in
basic and fusion mode with a scripted generator, print both answers.

No network, no model keys; everything is deterministic.
"""

from paperrag.corpus import ChunkingConfig
from paperrag.engine import Engine
from paperrag.generation import ScriptedGenerator, ScriptedRule

PAPERS = [
    (
        "embeddings-survey",
        [
            "Dense vector representations map text into a shared semantic "
            "space where distance tracks meaning.",
            "Long inputs are split into overlapping chunks before embedding.",
        ],
    ),
    (
        "fusion-methods",
        [
            "Merging ranked lists with reciprocal rank scores is robust "
            "because it ignores score scales.",
            "Query rewriting widens recall across corners of the corpus.",
        ],
    ),
    (
        "reading-agents",
        [
            "A reading agent searches, gathers evidence, and drafts cited "
            "answers, checking its own completeness.",
        ],
    ),
]

RULES = [
    ScriptedRule(
        pattern=r"Rewrite the question below",
        reply="How do ranked lists get merged?\nWhy rewrite search queries?",
    ),
    ScriptedRule(
        pattern=r"Passage from \(([^,]+), page (\d+)\)",
        reply=r"score: 0.9" + "\n" + r"summary: Support from \1 page \2.",
    ),
    ScriptedRule(
        pattern=r"Write an answer to the question",
        reply=(
            "Answers are grounded by retrieving chunks and citing them "
            "(embeddings-survey, page 2). Fusion merges rankings from "
            "several query rewrites (fusion-methods, page 1)."
        ),
    ),
    ScriptedRule(pattern=r"Is this answer complete", reply="yes: covered."),
]


def main() -> None:
    engine = Engine.fresh(
        generator=ScriptedGenerator(RULES),
        chunking=ChunkingConfig(chunk_size_tokens=30, overlap_tokens=5),
    )
    for label, pages in PAPERS:
        engine.ingest_document(label, pages)

    question = "How does retrieval keep generated answers grounded?"
    for mode in ("basic", "fusion"):
        answer = engine.ask(question, mode=mode)
        print(f"== mode={mode} (iterations={answer.iterations}, complete={answer.complete})")
        print(answer.text)
        for citation in answer.citations:
            print(f"   cited: {citation.rendered()}")
        print()


if __name__ == "__main__":
    main()
