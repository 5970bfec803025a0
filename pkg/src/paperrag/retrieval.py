"""Basic RAG retrieval and RAG fusion.

Fusion expands one user query into several generated variants, retrieves a
ranked list per variant, and merges the lists with reciprocal-rank scores:
score(d) = sum over lists containing d of 1 / (c + rank). Rank-based
merging is score-scale-free, so lists from different query phrasings can
be fused without calibration.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

from .embedding import EmbeddingProvider
from .generation import GeneratorError, TextGenerator, render_prompt, system_prompt
from .index import ExactIndexBase, SearchHit


class RetrievalError(Exception):
    """Invalid retrieval input."""


@dataclass(frozen=True)
class Query:
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise RetrievalError("query text must be non-empty")


@dataclass(frozen=True)
class ExpandedQueries:
    original: Query
    variants: tuple[Query, ...]
    degraded: bool = False  # set when variant generation failed or deduped away

    def all_queries(self) -> list[Query]:
        return [self.original, *self.variants]


@dataclass(frozen=True)
class RankedList:
    query: Query
    hits: tuple[SearchHit, ...]

    def chunk_ids(self) -> list[str]:
        return [hit.chunk_id for hit in self.hits]


@dataclass(frozen=True)
class FusedItem:
    chunk_id: str
    rrf_score: float
    fused_rank: int


@dataclass(frozen=True)
class FusedRanking:
    items: tuple[FusedItem, ...]
    degraded: bool = False

    def chunk_ids(self) -> list[str]:
        return [item.chunk_id for item in self.items]


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = 10
    n_variants: int = 4
    rrf_constant: float = 60.0
    per_list_depth: int = 20
    concurrency: int = 4

    def __post_init__(self) -> None:
        for name in ("k", "n_variants", "per_list_depth", "concurrency"):
            if getattr(self, name) <= 0:
                raise RetrievalError(f"{name} must be positive")
        if self.rrf_constant <= 0:
            raise RetrievalError("rrf_constant must be positive")
        if self.per_list_depth < self.k:
            raise RetrievalError("per_list_depth must be at least k")


def _normalize(text: str) -> str:
    return " ".join(text.split())


def generate_query_variants(
    q: Query, n: int, generator: TextGenerator
) -> ExpandedQueries:
    """Ask the generator for n rephrasings of q from different perspectives.

    Duplicates of the original or of each other (after whitespace
    normalization) are regenerated once, then dropped, so fewer than n
    variants may come back. Generator failure degrades to the original
    query alone; fusion then behaves exactly like basic retrieval.
    """
    if n <= 0:
        raise RetrievalError("n_variants must be positive")

    def one_round(count: int) -> list[str]:
        reply = generator.generate(
            system_prompt(),
            render_prompt("query_variants", n=count, question=q.text),
            temperature=0.0,
        )
        return [line.strip() for line in reply.splitlines() if line.strip()]

    try:
        candidates = one_round(n)
    except GeneratorError:
        return ExpandedQueries(original=q, variants=(), degraded=True)

    seen = {_normalize(q.text)}
    variants: list[Query] = []

    def absorb(lines: list[str]) -> None:
        for line in lines:
            key = _normalize(line)
            if key in seen or len(variants) >= n:
                continue
            seen.add(key)
            variants.append(Query(line))

    absorb(candidates)
    if len(variants) < n:
        try:
            absorb(one_round(n - len(variants)))
        except GeneratorError:
            pass
    return ExpandedQueries(
        original=q, variants=tuple(variants), degraded=not variants
    )


def rrf_fuse(lists: Sequence[RankedList], rrf_constant: float) -> FusedRanking:
    """Merge ranked lists by reciprocal-rank scoring (1-based ranks).

    Contributions are summed in sorted rank order so the result is exactly
    invariant to the order the lists are supplied in.
    """
    if rrf_constant <= 0:
        raise RetrievalError("rrf_constant must be positive")
    if not lists:
        raise RetrievalError("no ranked lists to fuse")

    ranks_by_chunk: dict[str, list[int]] = {}
    for ranked in lists:
        for hit in ranked.hits:
            ranks_by_chunk.setdefault(hit.chunk_id, []).append(hit.rank)

    scored = [
        (chunk_id, sum(1.0 / (rrf_constant + r) for r in sorted(ranks)))
        for chunk_id, ranks in ranks_by_chunk.items()
    ]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return FusedRanking(
        items=tuple(
            FusedItem(chunk_id=cid, rrf_score=score, fused_rank=rank)
            for rank, (cid, score) in enumerate(scored, start=1)
        )
    )


class Retriever:
    """Embeds queries and searches one index; holds no other state."""

    def __init__(self, index: ExactIndexBase, embedder: EmbeddingProvider) -> None:
        self.index = index
        self.embedder = embedder

    def _ranked(self, q: Query, depth: int) -> RankedList:
        vector = self.embedder.embed([q.text])[0]
        return RankedList(query=q, hits=tuple(self.index.search_topk(vector, depth)))

    def retrieve_basic(self, q: Query, cfg: RetrievalConfig | None = None) -> RankedList:
        cfg = cfg or RetrievalConfig()
        return self._ranked(q, cfg.k)

    def retrieve_fusion(
        self,
        q: Query,
        cfg: RetrievalConfig | None = None,
        generator: TextGenerator | None = None,
    ) -> FusedRanking:
        """Expand, retrieve per query concurrently, fuse, truncate to k."""
        cfg = cfg or RetrievalConfig()
        if generator is None:
            expanded = ExpandedQueries(original=q, variants=(), degraded=True)
        else:
            expanded = generate_query_variants(q, cfg.n_variants, generator)

        queries = expanded.all_queries()
        with ThreadPoolExecutor(max_workers=min(cfg.concurrency, len(queries))) as pool:
            lists = list(
                pool.map(lambda query: self._ranked(query, cfg.per_list_depth), queries)
            )
        fused = rrf_fuse(lists, cfg.rrf_constant)
        truncated = tuple(
            replace(item, fused_rank=rank)
            for rank, item in enumerate(fused.items[: cfg.k], start=1)
        )
        return FusedRanking(items=truncated, degraded=expanded.degraded)
