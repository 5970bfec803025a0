"""RAFT-style fine-tune record construction and export.

Each record pairs a generated question with a context of oracle and
distractor chunks plus a chain-of-thought answer, teaching the target
model to use retrieved context and ignore irrelevant passages. Submitting
the fine-tune job is out of scope; this module only builds and exports the
line-delimited training file.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import Chunk
from .generation import GeneratorError, TextGenerator, render_prompt, system_prompt

logger = logging.getLogger(__name__)

ANSWER_MARKER = "####"
_EXPORT_SYSTEM = (
    "Answer the question using the documents provided in the context. "
    "Reason step by step, then give the final answer after '#### '. "
    "Ignore documents that are irrelevant to the question."
)


class RaftError(Exception):
    """Invalid RAFT configuration or input."""


@dataclass(frozen=True)
class RaftConfig:
    num_distractors: int = 4
    oracle_fraction: float = 0.8
    questions_per_chunk: int = 1
    seed: int = 42

    def __post_init__(self) -> None:
        if self.num_distractors < 0:
            raise RaftError("num_distractors must be non-negative")
        if not 0.0 <= self.oracle_fraction <= 1.0:
            raise RaftError("oracle_fraction must be in [0, 1]")
        if self.questions_per_chunk <= 0:
            raise RaftError("questions_per_chunk must be positive")


@dataclass(frozen=True)
class RaftRecord:
    question: str
    oracle_chunk_ids: tuple[str, ...]  # empty iff this is a no-oracle record
    distractor_chunk_ids: tuple[str, ...]
    context_block: str
    cot_answer: str


def _record_rng(seed: int, record_index: int) -> random.Random:
    # Per-record stream: decisions replay independently of other records.
    return random.Random(f"{seed}:{record_index}")


def generate_questions(chunk: Chunk, n: int, generator: TextGenerator) -> list[str]:
    """Ask for n questions answerable from the chunk; deduplicated."""
    if n <= 0:
        raise RaftError("n must be positive")
    if not chunk.text.strip():
        raise RaftError("chunk is empty")
    reply = generator.generate(
        system_prompt(), render_prompt("raft_questions", chunk=chunk.text, n=n),
        temperature=0.0,
    )
    questions: list[str] = []
    seen: set[str] = set()
    for line in reply.splitlines():
        text = line.strip()
        key = " ".join(text.split())
        if text and key not in seen:
            seen.add(key)
            questions.append(text)
    return questions[:n]


def sample_distractors(
    oracle: Chunk, pool: Sequence[Chunk], m: int, seed: int | random.Random
) -> list[Chunk]:
    """Uniform sample without replacement from chunks of other documents.

    Deterministic for a fixed seed and pool order.
    """
    if m < 0:
        raise RaftError("m must be non-negative")
    candidates = [c for c in pool if c.doc_id != oracle.doc_id]
    if len(candidates) < m:
        raise RaftError(
            f"insufficient distractor pool: need {m}, have {len(candidates)}"
        )
    if m == 0:
        return []
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    return rng.sample(candidates, m)


def _context_block(chunks: Sequence[Chunk]) -> str:
    return "\n\n".join(f"[{c.id}] {c.text}" for c in chunks)


def build_records(
    chunks: Sequence[Chunk], cfg: RaftConfig, generator: TextGenerator
) -> list[RaftRecord]:
    """Build one record per (chunk, question) pair.

    With probability oracle_fraction the context contains the oracle chunk
    plus the distractors; otherwise distractors only. The answer is always
    written from the oracle chunk, even for no-oracle records. Context
    order is shuffled under the seed. Failing chunks or malformed answers
    are skipped, never fatal.
    """
    doc_ids = {c.doc_id for c in chunks}
    if len(doc_ids) < 2:
        raise RaftError("need chunks from at least 2 documents for distractors")

    records: list[RaftRecord] = []
    record_index = 0
    for chunk in chunks:
        try:
            questions = generate_questions(chunk, cfg.questions_per_chunk, generator)
        except (GeneratorError, RaftError) as exc:
            logger.warning("skipping chunk %s: %s", chunk.id, exc)
            continue
        for question in questions:
            rng = _record_rng(cfg.seed, record_index)
            record_index += 1
            include_oracle = rng.random() < cfg.oracle_fraction
            try:
                distractors = sample_distractors(chunk, chunks, cfg.num_distractors, rng)
            except RaftError as exc:
                logger.warning("skipping record for chunk %s: %s", chunk.id, exc)
                continue
            try:
                answer = generator.generate(
                    system_prompt(),
                    render_prompt("raft_answer", chunk=chunk.text, question=question),
                    temperature=0.0,
                )
            except GeneratorError as exc:
                logger.warning("skipping record for chunk %s: %s", chunk.id, exc)
                continue
            if ANSWER_MARKER not in answer:
                logger.warning(
                    "skipping record for chunk %s: answer lacks %r", chunk.id, ANSWER_MARKER
                )
                continue
            context_chunks = ([chunk] if include_oracle else []) + distractors
            rng.shuffle(context_chunks)
            records.append(
                RaftRecord(
                    question=question,
                    oracle_chunk_ids=(chunk.id,) if include_oracle else (),
                    distractor_chunk_ids=tuple(d.id for d in distractors),
                    context_block=_context_block(context_chunks),
                    cot_answer=answer,
                )
            )
    return records


# -- export and validation --------------------------------------------------


def _record_to_line(record: RaftRecord) -> str:
    payload = {
        "messages": [
            {"role": "system", "content": _EXPORT_SYSTEM},
            {
                "role": "user",
                "content": f"{record.context_block}\n\nQuestion: {record.question}",
            },
            {"role": "assistant", "content": record.cot_answer},
        ],
        "oracle_chunk_ids": list(record.oracle_chunk_ids),
        "distractor_chunk_ids": list(record.distractor_chunk_ids),
    }
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def _record_from_line(line: str) -> RaftRecord:
    payload = json.loads(line)
    user = payload["messages"][1]["content"]
    context_block, _, question = user.rpartition("\n\nQuestion: ")
    return RaftRecord(
        question=question,
        oracle_chunk_ids=tuple(payload["oracle_chunk_ids"]),
        distractor_chunk_ids=tuple(payload["distractor_chunk_ids"]),
        context_block=context_block,
        cot_answer=payload["messages"][2]["content"],
    )


def export_records(records: Sequence[RaftRecord], path: str | Path) -> int:
    """Write one chat-format training record per line; returns line count."""
    if not records:
        raise RaftError("nothing to export")
    path = Path(path)
    path.write_text(
        "".join(_record_to_line(r) + "\n" for r in records), encoding="utf-8"
    )
    return len(records)


def load_records(path: str | Path) -> list[RaftRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [_record_from_line(line) for line in lines if line.strip()]


_ROLES = ("system", "user", "assistant")


def validate_export(path: str | Path) -> int:
    """Check every line against the export schema; returns the record
    count or raises RaftError naming the first offending line."""
    path = Path(path)
    if not path.exists():
        raise RaftError(f"no such file: {path}")
    count = 0
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RaftError(f"line {line_no}: invalid json ({exc})") from exc
        messages = payload.get("messages")
        if not isinstance(messages, list) or len(messages) != 3:
            raise RaftError(f"line {line_no}: messages must be a system/user/assistant triple")
        for message, role in zip(messages, _ROLES):
            if message.get("role") != role:
                raise RaftError(f"line {line_no}: expected role {role!r}")
            if not isinstance(message.get("content"), str) or not message["content"]:
                raise RaftError(f"line {line_no}: {role} content must be a non-empty string")
        if "\n\nQuestion: " not in messages[1]["content"]:
            raise RaftError(f"line {line_no}: user content lacks the question suffix")
        if ANSWER_MARKER not in messages[2]["content"]:
            raise RaftError(f"line {line_no}: assistant content lacks {ANSWER_MARKER!r}")
        for key in ("oracle_chunk_ids", "distractor_chunk_ids"):
            ids = payload.get(key)
            if not isinstance(ids, list) or not all(isinstance(i, str) for i in ids):
                raise RaftError(f"line {line_no}: {key} must be a list of strings")
        count += 1
    if count == 0:
        raise RaftError("file contains no records")
    return count
