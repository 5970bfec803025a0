"""The search / gather-evidence / answer loop.

One question runs as an iterative loop: search the corpus, summarize the
retrieved chunks in the context of the question (evidence), draft a cited
answer, then ask the generator whether the answer is complete. On "no" the
generator proposes a refined search query and the loop continues, keeping
all evidence gathered so far. Citations are checked against the corpus:
a label or page the corpus does not contain never survives to the output.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from .corpus import Chunk, Corpus
from .generation import (
    GeneratorError,
    GeneratorTransportError,
    TextGenerator,
    render_prompt,
    system_prompt,
)
from .retrieval import (
    FusedRanking,
    Query,
    RankedList,
    RetrievalConfig,
    Retriever,
)


class AgentError(Exception):
    """Unrecoverable agent failure."""


@dataclass(frozen=True)
class AgentConfig:
    max_iterations: int = 3
    evidence_per_iteration: int = 10
    answer_token_budget: int = 500
    mode: str = "basic"  # basic | fusion
    relevance_threshold: float = 0.5
    concurrency: int = 4
    answer_retries: int = 2

    def __post_init__(self) -> None:
        if self.max_iterations <= 0:
            raise AgentError("max_iterations must be positive")
        if self.evidence_per_iteration <= 0:
            raise AgentError("evidence_per_iteration must be positive")
        if self.answer_token_budget <= 0:
            raise AgentError("answer_token_budget must be positive")
        if self.mode not in ("basic", "fusion"):
            raise AgentError(f"unknown mode: {self.mode}")


@dataclass(frozen=True)
class Evidence:
    chunk_id: str
    question: Query
    summary: str
    relevance_score: float


@dataclass(frozen=True)
class Citation:
    doc_label: str
    page: int

    def rendered(self) -> str:
        return f"({self.doc_label}, page {self.page})"


@dataclass(frozen=True)
class Answer:
    text: str
    citations: tuple[Citation, ...]
    evidence_used: tuple[Evidence, ...]
    complete: bool
    iterations: int
    ungrounded_citations: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()


@dataclass
class AgentResources:
    """Everything a run needs besides the generator: the read-only corpus,
    the chunk map backing retrieval hits, and the retriever itself."""

    corpus: Corpus
    chunks: Mapping[str, Chunk]
    retriever: Retriever
    retrieval_cfg: RetrievalConfig = RetrievalConfig()


def tool_search(
    q: Query, cfg: AgentConfig, res: AgentResources, generator: TextGenerator | None = None
) -> RankedList | FusedRanking:
    """Delegate to basic or fusion retrieval per the configured mode."""
    k = cfg.evidence_per_iteration
    retrieval_cfg = replace(
        res.retrieval_cfg, k=k, per_list_depth=max(res.retrieval_cfg.per_list_depth, k)
    )
    if cfg.mode == "fusion":
        return res.retriever.retrieve_fusion(q, retrieval_cfg, generator)
    return res.retriever.retrieve_basic(q, retrieval_cfg)


_SCORE_RE = re.compile(r"score\s*[:=]\s*([0-9]*\.?[0-9]+)", re.IGNORECASE)
_SUMMARY_RE = re.compile(r"summary\s*[:=]\s*(.+)", re.IGNORECASE | re.DOTALL)


def _parse_evidence_reply(reply: str) -> tuple[float, str]:
    score_match = _SCORE_RE.search(reply)
    summary_match = _SUMMARY_RE.search(reply)
    if score_match is None or summary_match is None:
        raise GeneratorError(f"unparseable evidence reply: {reply[:80]!r}")
    score = float(score_match.group(1))
    if not 0.0 <= score <= 1.0:
        raise GeneratorError(f"relevance score out of range: {score}")
    summary = summary_match.group(1).strip()
    if not summary:
        raise GeneratorError("empty evidence summary")
    return score, summary


def tool_gather_evidence(
    q: Query,
    hits: RankedList | FusedRanking | Sequence[str],
    generator: TextGenerator,
    res: AgentResources,
    *,
    threshold: float = 0.5,
    concurrency: int = 4,
) -> tuple[list[Evidence], list[str]]:
    """Summarize each hit in the context of the question, concurrently.

    Returns (evidence, warnings). Hits scoring under the threshold are
    dropped; a hit whose reply cannot be parsed is dropped with a warning
    and never disturbs the others.
    """
    chunk_ids = hits.chunk_ids() if hasattr(hits, "chunk_ids") else list(hits)
    if not chunk_ids:
        return [], []

    def summarize(chunk_id: str) -> Evidence | str:
        chunk = res.chunks.get(chunk_id)
        if chunk is None:
            return f"hit for unknown chunk dropped: {chunk_id}"
        doc = res.corpus.get(chunk.doc_id)
        prompt = render_prompt(
            "gather_evidence",
            question=q.text,
            label=doc.label,
            page=chunk.page,
            chunk=chunk.text,
        )
        try:
            reply = generator.generate(system_prompt(), prompt, temperature=0.0)
            score, summary = _parse_evidence_reply(reply)
        except GeneratorTransportError:
            raise  # a provider outage fails the run, not just this hit
        except GeneratorError as exc:
            return f"evidence for {chunk_id} dropped: {exc}"
        return Evidence(
            chunk_id=chunk_id, question=q, summary=summary, relevance_score=score
        )

    with ThreadPoolExecutor(max_workers=min(concurrency, len(chunk_ids))) as pool:
        outcomes = list(pool.map(summarize, chunk_ids))

    evidence: list[Evidence] = []
    warnings: list[str] = []
    for outcome in outcomes:
        if isinstance(outcome, str):
            warnings.append(outcome)
        elif outcome.relevance_score >= threshold:
            evidence.append(outcome)
    return evidence, warnings


_CITATION_RE = re.compile(r"\(([^()]+?),\s*page\s+(\d+)\)")
_INSUFFICIENT_TEXT = "Insufficient evidence to answer the question."


def _citation_tag(ev: Evidence, res: AgentResources) -> str:
    chunk = res.chunks[ev.chunk_id]
    label = res.corpus.get(chunk.doc_id).label
    return f"({label}, page {chunk.page})"


def extract_citations(
    text: str, corpus: Corpus
) -> tuple[tuple[Citation, ...], tuple[str, ...]]:
    """Pull (label, page N) citations from answer text and check each one
    against the corpus. Returns (grounded citations, rejected raw tags)."""
    grounded: list[Citation] = []
    rejected: list[str] = []
    seen: set[tuple[str, int]] = set()
    for match in _CITATION_RE.finditer(text):
        label, page = match.group(1).strip(), int(match.group(2))
        key = (label, page)
        if key in seen:
            continue
        seen.add(key)
        if corpus.has_label(label) and 1 <= page <= corpus.get_by_label(label).page_count:
            grounded.append(Citation(doc_label=label, page=page))
        else:
            rejected.append(match.group(0))
    return tuple(grounded), tuple(rejected)


def tool_answer(
    q: Query,
    evidence: Sequence[Evidence],
    generator: TextGenerator,
    res: AgentResources,
    *,
    budget: int = 500,
    retries: int = 2,
) -> Answer:
    """Draft a cited answer from the gathered evidence.

    With no evidence the answer states that and is marked incomplete.
    Citations whose label or page is not in the corpus are rejected and
    reported via ``ungrounded_citations``.
    """
    if not evidence:
        return Answer(
            text=_INSUFFICIENT_TEXT,
            citations=(),
            evidence_used=(),
            complete=False,
            iterations=0,
        )

    evidence_block = "\n".join(
        f"- {_citation_tag(ev, res)} {ev.summary}" for ev in evidence
    )
    prompt = render_prompt("answer", question=q.text, evidence=evidence_block)

    last_error: GeneratorError | None = None
    for _ in range(retries + 1):
        try:
            text = generator.generate(
                system_prompt(), prompt, max_tokens=budget, temperature=0.0
            )
            break
        except GeneratorError as exc:
            last_error = exc
    else:
        if isinstance(last_error, GeneratorTransportError):
            raise last_error  # outages keep their class for the service layer
        raise AgentError(f"answer generation failed: {last_error}")

    citations, rejected = extract_citations(text, res.corpus)
    warnings = tuple(f"ungrounded citation rejected: {tag}" for tag in rejected)
    return Answer(
        text=text,
        citations=citations,
        evidence_used=tuple(evidence),
        complete=False,  # completeness is the loop's call, not the draft's
        iterations=0,
        ungrounded_citations=rejected,
        warnings=warnings,
    )


_YES_RE = re.compile(r"^\s*yes\b", re.IGNORECASE)
_NO_RE = re.compile(r"^\s*no\b", re.IGNORECASE)


def _completeness_check(
    q: Query, draft: Answer, generator: TextGenerator
) -> tuple[bool, str]:
    prompt = render_prompt("completeness_check", question=q.text, answer=draft.text)
    try:
        reply = generator.generate(system_prompt(), prompt, temperature=0.0)
    except GeneratorTransportError:
        raise
    except GeneratorError as exc:
        return False, f"completeness check failed: {exc}"
    if _YES_RE.search(reply):
        return True, reply.strip()
    if _NO_RE.search(reply):
        return False, reply.strip()
    return False, f"unparseable completeness reply: {reply.strip()[:80]}"


def _refine_query(
    q: Query, current: Query, reason: str, generator: TextGenerator
) -> Query:
    prompt = render_prompt(
        "refine_query", question=q.text, query=current.text, reason=reason
    )
    try:
        reply = generator.generate(system_prompt(), prompt, temperature=0.0).strip()
        return Query(reply) if reply else current
    except Exception:  # noqa: BLE001 - refinement is best-effort
        return current


def run_agent(
    q: Query, cfg: AgentConfig, generator: TextGenerator, res: AgentResources
) -> Answer:
    """Run the full loop: search, gather evidence, answer, self-check.

    Evidence accumulates across iterations (earlier summaries are kept as
    is). The loop stops on a "yes" completeness verdict backed by at least
    one grounded citation, or when the iteration budget runs out, in which
    case the best draft comes back with complete=False.
    """
    evidence: list[Evidence] = []
    seen_chunks: set[str] = set()
    warnings: list[str] = []
    query = q
    draft = Answer(
        text=_INSUFFICIENT_TEXT, citations=(), evidence_used=(), complete=False, iterations=0
    )
    iterations = 0

    for iteration in range(1, cfg.max_iterations + 1):
        iterations = iteration
        hits = tool_search(query, cfg, res, generator)
        new_evidence, gather_warnings = tool_gather_evidence(
            query,
            hits,
            generator,
            res,
            threshold=cfg.relevance_threshold,
            concurrency=cfg.concurrency,
        )
        warnings.extend(gather_warnings)
        for ev in new_evidence:
            if ev.chunk_id not in seen_chunks:
                seen_chunks.add(ev.chunk_id)
                evidence.append(ev)

        draft = tool_answer(
            q, evidence, generator, res, budget=cfg.answer_token_budget,
            retries=cfg.answer_retries,
        )
        warnings.extend(draft.warnings)

        complete, reason = _completeness_check(q, draft, generator)
        if complete and draft.citations:
            return replace(
                draft, complete=True, iterations=iteration, warnings=tuple(warnings)
            )
        if iteration < cfg.max_iterations:
            query = _refine_query(q, query, reason, generator)

    return replace(draft, complete=False, iterations=iterations, warnings=tuple(warnings))


@dataclass(frozen=True)
class RefGeneration:
    """One slot of a parallel generation over references: either text or
    an error, never both."""

    ref: object
    text: str | None
    error: str | None = None


def parallel_generate_over_refs(
    task_prompt: str,
    refs: Sequence[tuple[object, str]],
    generator: TextGenerator,
    *,
    concurrency: int = 4,
) -> list[RefGeneration]:
    """Run one generative task per reference, concurrently but bounded.

    ``refs`` is a relevance-ordered list of (reference, context text).
    Results come back in input order regardless of completion order; a
    failing call records its error in its own slot.
    """
    if not refs:
        raise AgentError("refs must be non-empty")

    def run_one(item: tuple[object, str]) -> RefGeneration:
        ref, context = item
        try:
            reply = generator.generate(
                system_prompt(), f"{task_prompt}\n\n{context}", temperature=0.0
            )
            return RefGeneration(ref=ref, text=reply)
        except GeneratorError as exc:
            return RefGeneration(ref=ref, text=None, error=str(exc))

    with ThreadPoolExecutor(max_workers=min(concurrency, len(refs))) as pool:
        return list(pool.map(run_one, refs))
