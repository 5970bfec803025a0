#!/usr/bin/env python3
"""Build a small deterministic RAFT training file from a synthetic corpus
and validate it against the export schema."""

import random
import tempfile
from pathlib import Path

from paperrag.corpus import ChunkingConfig
from paperrag.engine import Engine
from paperrag.generation import ScriptedGenerator, ScriptedRule
from paperrag.raftdata import RaftConfig, build_records, export_records, validate_export

RULES = [
    ScriptedRule(
        pattern=r"Passage:\n(\S+ \S+)[\s\S]*Write \d+ distinct questions",
        reply=r"What does \1 introduce?",
    ),
    ScriptedRule(
        pattern=r"Reason step by step from the passage",
        reply="The passage states its topic directly.\n#### It covers the stated topic.",
    ),
]


def main() -> None:
    engine = Engine.fresh(
        generator=ScriptedGenerator(RULES),
        chunking=ChunkingConfig(chunk_size_tokens=10, overlap_tokens=0),
    )
    rng = random.Random(11)
    for d in range(6):
        words = " ".join(f"corpus{d}_{i}_{rng.randrange(10**6)}" for i in range(50))
        engine.ingest_document(f"paper-{d}", [words])

    cfg = RaftConfig(num_distractors=4, oracle_fraction=0.8, questions_per_chunk=1, seed=42)
    records = build_records(engine.all_chunks(), cfg, engine.generator)
    out = Path(tempfile.mkdtemp(prefix="paperrag-raft-")) / "records.jsonl"
    count = export_records(records, out)
    validate_export(out)
    with_oracle = sum(1 for r in records if r.oracle_chunk_ids)
    print(f"wrote {count} schema-valid records to {out}")
    print(f"oracle share: {with_oracle}/{count}")


if __name__ == "__main__":
    main()
