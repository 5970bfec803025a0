"""Paper ingestion and chunking.

Documents arrive as pre-extracted page texts (PDF extraction is a thin,
lossy adapter in :mod:`paperrag.extract`). Pages are joined with a single
form-feed separator and every chunk is addressed by a half-open character
span into that joined text, so chunking is lossless by construction:
retrieval truncation downstream is the only place information is dropped.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import threading
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable
from urllib.parse import urlparse

PAGE_SEPARATOR = "\f"

_TOKEN_RE = re.compile(r"\S+")

# Reported token estimate per whitespace-delimited word. Chunk boundaries
# walk whole words; the factor only feeds Chunk.approx_tokens.
TOKENS_PER_WORD = 1.3


class CorpusError(Exception):
    """Invalid corpus input or state."""


@dataclass(frozen=True)
class Document:
    """One ingested paper."""

    id: str
    source_uri: str
    label: str
    pages: tuple[str, ...]
    full_text: str
    page_offsets: tuple[int, ...]  # start offset of each page in full_text
    references_text: str | None = None
    ingested_at: str = ""

    @property
    def page_count(self) -> int:
        return len(self.pages)

    def page_of_offset(self, offset: int) -> int:
        """1-based page containing a character offset (separator chars
        belong to the page before them)."""
        if not 0 <= offset <= len(self.full_text):
            raise CorpusError(f"offset {offset} outside document")
        return bisect_right(self.page_offsets, offset)


@dataclass(frozen=True)
class Chunk:
    """Span-addressed piece of a document."""

    id: str
    doc_id: str
    page: int
    char_span: tuple[int, int]  # half-open [start, end)
    text: str
    approx_tokens: int


@dataclass(frozen=True)
class ChunkingConfig:
    chunk_size_tokens: int = 512
    overlap_tokens: int = 64

    def __post_init__(self) -> None:
        if self.chunk_size_tokens <= 0:
            raise CorpusError("chunk_size_tokens must be positive")
        if self.overlap_tokens < 0:
            raise CorpusError("overlap_tokens must be non-negative")
        if self.overlap_tokens >= self.chunk_size_tokens:
            raise CorpusError("overlap_tokens must be smaller than chunk_size_tokens")


@dataclass
class ImportEntry:
    url: str
    status: str = "pending"  # pending | fetched | ingested | failed
    error: str | None = None
    doc_id: str | None = None


@dataclass
class ImportManifest:
    entries: list[ImportEntry] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "entries": [
                {"url": e.url, "status": e.status, "error": e.error, "doc_id": e.doc_id}
                for e in self.entries
            ]
        }

    @property
    def done(self) -> bool:
        return all(e.status in ("ingested", "failed") for e in self.entries)


def _doc_id(label: str, pages: Iterable[str]) -> str:
    h = hashlib.sha256()
    h.update(label.encode("utf-8"))
    for page in pages:
        h.update(b"\x00")
        h.update(page.encode("utf-8"))
    return h.hexdigest()[:16]


def approx_token_count(text: str) -> int:
    """Word-count-based token estimate; model-agnostic on purpose."""
    words = len(_TOKEN_RE.findall(text))
    return math.ceil(words * TOKENS_PER_WORD)


class Corpus:
    """In-memory document store with serialized writes.

    Reads are plain dict lookups and may run concurrently; every mutation
    goes through one lock so batch imports cannot interleave ingests.
    """

    def __init__(self) -> None:
        self._docs: dict[str, Document] = {}
        self._by_label: dict[str, str] = {}
        self._write_lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    def get(self, doc_id: str) -> Document:
        try:
            return self._docs[doc_id]
        except KeyError:
            raise CorpusError(f"unknown document id: {doc_id}") from None

    def get_by_label(self, label: str) -> Document:
        try:
            return self._docs[self._by_label[label]]
        except KeyError:
            raise CorpusError(f"unknown document label: {label}") from None

    def has_label(self, label: str) -> bool:
        return label in self._by_label

    def documents(self) -> list[Document]:
        return list(self._docs.values())

    def ingest_text(
        self,
        label: str,
        pages: list[str],
        *,
        source_uri: str = "",
        references_text: str | None = None,
    ) -> Document:
        """Normalize page texts into a stored Document.

        Rejects empty input ("empty document") and duplicate labels; labels
        stay stable because answers cite them.
        """
        if not label or not label.strip():
            raise CorpusError("label must be non-empty")
        if not pages or all(not p for p in pages):
            raise CorpusError("empty document")

        offsets: list[int] = []
        cursor = 0
        for page in pages:
            offsets.append(cursor)
            cursor += len(page) + len(PAGE_SEPARATOR)
        full_text = PAGE_SEPARATOR.join(pages)

        doc = Document(
            id=_doc_id(label, pages),
            source_uri=source_uri,
            label=label,
            pages=tuple(pages),
            full_text=full_text,
            page_offsets=tuple(offsets),
            references_text=references_text,
            ingested_at=datetime.now(timezone.utc).isoformat(),
        )
        with self._write_lock:
            if label in self._by_label:
                raise CorpusError(f"duplicate label: {label}")
            self._docs[doc.id] = doc
            self._by_label[label] = doc.id
        return doc

    # -- persistence ----------------------------------------------------

    def save(self, directory: str | Path) -> None:
        """One JSON record per document plus an id/label manifest."""
        root = Path(directory)
        root.mkdir(parents=True, exist_ok=True)
        manifest = []
        for doc in self._docs.values():
            manifest.append({"id": doc.id, "label": doc.label})
            record = {
                "id": doc.id,
                "source_uri": doc.source_uri,
                "label": doc.label,
                "pages": list(doc.pages),
                "references_text": doc.references_text,
                "ingested_at": doc.ingested_at,
            }
            (root / f"{doc.id}.json").write_text(
                json.dumps(record, ensure_ascii=False, indent=2), encoding="utf-8"
            )
        (root / "manifest.json").write_text(
            json.dumps({"documents": manifest}, indent=2), encoding="utf-8"
        )

    @classmethod
    def load(cls, directory: str | Path) -> "Corpus":
        root = Path(directory)
        manifest_path = root / "manifest.json"
        if not manifest_path.exists():
            raise CorpusError(f"no corpus manifest in {root}")
        corpus = cls()
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        for item in manifest["documents"]:
            record = json.loads((root / f"{item['id']}.json").read_text(encoding="utf-8"))
            doc = corpus.ingest_text(
                record["label"],
                record["pages"],
                source_uri=record.get("source_uri", ""),
                references_text=record.get("references_text"),
            )
            if doc.id != item["id"]:
                raise CorpusError(f"corpus record {item['id']} fails id check")
        return corpus


def chunk_document(doc: Document, cfg: ChunkingConfig | None = None) -> list[Chunk]:
    """Split a document into overlapping, span-addressed chunks.

    Works in whole-word steps: a chunk holds ``chunk_size_tokens`` words,
    consecutive chunks share ``overlap_tokens`` words, and the walk stops
    once a chunk reaches the end of the text. Spans are stretched over the
    inter-word whitespace so the union of spans covers [0, len(full_text))
    with no gaps and reconstruction is byte-exact.
    """
    cfg = cfg or ChunkingConfig()
    text = doc.full_text
    words = list(_TOKEN_RE.finditer(text))
    n_words = len(words)
    size = cfg.chunk_size_tokens
    stride = size - cfg.overlap_tokens

    # Token-range starts: 0, stride, 2*stride, ... stopping once a chunk
    # covers the final word. Whitespace-only documents get one full-span
    # chunk. Chunk count is ceil(max(n_words - overlap, 1) / stride).
    starts: list[int] = [0]
    while starts[-1] + size < n_words:
        starts.append(starts[-1] + stride)

    chunks: list[Chunk] = []
    for i, word_start in enumerate(starts):
        word_end = min(word_start + size, n_words)
        char_start = 0 if i == 0 else words[word_start].start()
        if word_end >= n_words:
            char_end = len(text)
        else:
            # Stretch to the next chunk's first word so spans stay gapless
            # even with zero overlap.
            next_start_char = words[starts[i + 1]].start() if i + 1 < len(starts) else len(text)
            char_end = max(words[word_end - 1].end(), next_start_char)
        chunk_text = text[char_start:char_end]
        chunks.append(
            Chunk(
                id=f"{doc.id}:{char_start:08d}",
                doc_id=doc.id,
                page=doc.page_of_offset(char_start) if text else 1,
                char_span=(char_start, char_end),
                text=chunk_text,
                approx_tokens=approx_token_count(chunk_text),
            )
        )
    return chunks


def expected_chunk_count(n_tokens: int, cfg: ChunkingConfig) -> int:
    """Closed form for the number of chunks the walk above produces."""
    stride = cfg.chunk_size_tokens - cfg.overlap_tokens
    return math.ceil(max(n_tokens - cfg.overlap_tokens, 1) / stride)


def _label_from_url(url: str) -> str:
    path = urlparse(url).path
    stem = Path(path).name or urlparse(url).netloc
    if stem.endswith((".txt", ".pdf")):
        stem = stem.rsplit(".", 1)[0]
    return stem or url


def batch_import(
    urls: list[str],
    corpus: Corpus,
    *,
    fetcher: Callable[[str], tuple[bytes, str]] | None = None,
    max_workers: int = 4,
    manifest: ImportManifest | None = None,
    ingest: Callable[[str, list[str], str], Document] | None = None,
) -> ImportManifest:
    """Fetch, extract, and ingest a batch of URLs.

    Fetches fan out over a bounded thread pool; ingestion funnels through
    the corpus write lock. One bad URL marks its own entry failed and never
    aborts the batch. Pass ``manifest`` to observe per-entry progress from
    another thread (the service's background import jobs do); pass
    ``ingest`` to route ingestion through a wrapper that also chunks and
    indexes (the engine does).
    """
    from .extract import extract_pages, fetch_url

    if not urls:
        raise CorpusError("empty url list")
    for url in urls:
        parsed = urlparse(url)
        if not parsed.scheme or not parsed.netloc:
            raise CorpusError(f"not a url: {url}")

    fetch = fetcher or fetch_url
    ingest_fn = ingest or (
        lambda label, pages, source_uri: corpus.ingest_text(
            label, pages, source_uri=source_uri
        )
    )
    if manifest is None:
        manifest = ImportManifest()
    manifest.entries = [ImportEntry(url=url) for url in urls]

    def fetch_one(entry: ImportEntry) -> tuple[ImportEntry, bytes | None, str]:
        try:
            data, content_type = fetch(entry.url)
            entry.status = "fetched"
            return entry, data, content_type
        except Exception as exc:  # noqa: BLE001 - per-entry isolation
            entry.status = "failed"
            entry.error = str(exc)
            return entry, None, ""

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        fetched = list(pool.map(fetch_one, manifest.entries))

    for entry, data, content_type in fetched:
        if entry.status == "failed":
            continue
        try:
            pages = extract_pages(data or b"", content_type)
            doc = ingest_fn(_label_from_url(entry.url), pages, entry.url)
            entry.status = "ingested"
            entry.doc_id = doc.id
        except Exception as exc:  # noqa: BLE001 - per-entry isolation
            entry.status = "failed"
            entry.error = str(exc)
    return manifest
