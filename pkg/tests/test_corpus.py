"""Corpus ingestion, chunking, and batch import."""

from __future__ import annotations

import math
import random
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paperrag.corpus import (
    PAGE_SEPARATOR,
    Chunk,
    ChunkingConfig,
    Corpus,
    CorpusError,
    batch_import,
    chunk_document,
    expected_chunk_count,
)

# -- ingest ------------------------------------------------------------------


def test_single_page_identity():
    corpus = Corpus()
    doc = corpus.ingest_text("p1", ["hello world"])
    assert doc.page_count == 1
    assert doc.full_text == "hello world"
    assert doc.page_offsets == (0,)


def test_page_boundaries_use_separator_length():
    # Hand-computed: page 2 starts after page 1 plus the one-char separator.
    corpus = Corpus()
    doc = corpus.ingest_text("p2", ["a", "b"])
    assert doc.full_text == "a" + PAGE_SEPARATOR + "b"
    assert doc.page_offsets == (0, 1 + len(PAGE_SEPARATOR))
    assert len(doc.full_text) == 1 + len(PAGE_SEPARATOR) + 1


def test_empty_document_rejected():
    corpus = Corpus()
    with pytest.raises(CorpusError, match="empty document"):
        corpus.ingest_text("p1", [""])
    with pytest.raises(CorpusError, match="empty document"):
        corpus.ingest_text("p1", [])


def test_duplicate_label_rejected():
    corpus = Corpus()
    corpus.ingest_text("p1", ["text"])
    with pytest.raises(CorpusError, match="duplicate label"):
        corpus.ingest_text("p1", ["other text"])


def test_page_of_offset_strictly_increasing_boundaries():
    corpus = Corpus()
    doc = corpus.ingest_text("p3", ["one two", "three", "four"])
    assert list(doc.page_offsets) == sorted(set(doc.page_offsets))
    assert doc.page_of_offset(0) == 1
    assert doc.page_of_offset(doc.page_offsets[1]) == 2
    # Separator chars belong to the page before them.
    assert doc.page_of_offset(doc.page_offsets[1] - 1) == 1


def test_ids_deterministic_across_corpora():
    a = Corpus().ingest_text("x", ["one", "two"])
    b = Corpus().ingest_text("x", ["one", "two"])
    assert a.id == b.id


# -- chunking ----------------------------------------------------------------


def _words(n: int, seed: int = 0) -> str:
    rng = random.Random(seed)
    return " ".join(f"w{rng.randrange(1000)}" for _ in range(n))


def _make_doc(text_pages: list[str]):
    return Corpus().ingest_text("doc", text_pages)


def check_chunks(doc, chunks: list[Chunk]) -> None:
    """Invariant oracle: spans valid, ordered, gapless, reconstructible."""
    full = doc.full_text
    assert chunks, "at least one chunk"
    assert chunks[0].char_span[0] == 0
    assert chunks[-1].char_span[1] == len(full)
    previous_end = None
    previous_start = -1
    for chunk in chunks:
        start, end = chunk.char_span
        assert 0 <= start < end <= len(full)
        assert chunk.text == full[start:end]
        assert start > previous_start
        if previous_end is not None:
            assert start <= previous_end, "gap between consecutive chunks"
        previous_start, previous_end = start, end
        assert chunk.page == doc.page_of_offset(start)
    # Reconstruction: drop each chunk's leading overlap, concatenate.
    rebuilt = chunks[0].text
    for prev, cur in zip(chunks, chunks[1:]):
        overlap = prev.char_span[1] - cur.char_span[0]
        rebuilt += cur.text[overlap:]
    assert rebuilt == full


def test_single_chunk_when_size_covers_doc():
    doc = _make_doc([_words(10)])
    chunks = chunk_document(doc, ChunkingConfig(chunk_size_tokens=10, overlap_tokens=0))
    assert len(chunks) == 1
    assert chunks[0].text == doc.full_text
    check_chunks(doc, chunks)


def test_stride_is_size_minus_overlap():
    # 100 words, size 40, overlap 10: stride 30, chunks start at words
    # 0/30/60 and the walk stops once the end is covered.
    doc = _make_doc([_words(100)])
    cfg = ChunkingConfig(chunk_size_tokens=40, overlap_tokens=10)
    chunks = chunk_document(doc, cfg)
    word_starts = [m.start() for m in re.finditer(r"\S+", doc.full_text)]
    assert [c.char_span[0] for c in chunks] == [0, word_starts[30], word_starts[60]]
    assert len(chunks) == expected_chunk_count(100, cfg)
    check_chunks(doc, chunks)


def test_chunk_count_formula_brute_force():
    # ceil(max(N - o, 1) / (s - o)) verified against the real walk for all
    # small documents and configs.
    for n_tokens in range(0, 201, 7):
        text = _words(n_tokens) if n_tokens else "   "
        doc = Corpus().ingest_text(f"doc{n_tokens}", [text])
        for size in range(1, 51, 7):
            for overlap in range(0, size, 5):
                cfg = ChunkingConfig(chunk_size_tokens=size, overlap_tokens=overlap)
                chunks = chunk_document(doc, cfg)
                assert len(chunks) == expected_chunk_count(n_tokens, cfg), (
                    n_tokens, size, overlap,
                )


def test_overlap_is_exact_in_words():
    doc = _make_doc([_words(100)])
    cfg = ChunkingConfig(chunk_size_tokens=40, overlap_tokens=10)
    chunks = chunk_document(doc, cfg)
    for prev, cur in zip(chunks, chunks[1:-1]):
        shared = doc.full_text[cur.char_span[0] : prev.char_span[1]]
        assert len(shared.split()) == 10


def test_chunking_deterministic():
    doc_a = Corpus().ingest_text("d", ["alpha beta", _words(50, seed=3)])
    doc_b = Corpus().ingest_text("d", ["alpha beta", _words(50, seed=3)])
    cfg = ChunkingConfig(chunk_size_tokens=12, overlap_tokens=3)
    chunks_a = chunk_document(doc_a, cfg)
    chunks_b = chunk_document(doc_b, cfg)
    assert [(c.id, c.char_span) for c in chunks_a] == [
        (c.id, c.char_span) for c in chunks_b
    ]


def test_invalid_config_rejected():
    with pytest.raises(CorpusError):
        ChunkingConfig(chunk_size_tokens=0)
    with pytest.raises(CorpusError):
        ChunkingConfig(chunk_size_tokens=10, overlap_tokens=10)
    with pytest.raises(CorpusError):
        ChunkingConfig(chunk_size_tokens=10, overlap_tokens=-1)


@settings(max_examples=150, deadline=None)
@given(
    pages=st.lists(
        st.text(
            alphabet=st.sampled_from(list("ab \n\t.")), min_size=0, max_size=400
        ),
        min_size=1,
        max_size=4,
    ),
    size=st.integers(min_value=1, max_value=50),
    data=st.data(),
)
def test_chunk_coverage_property(pages, size, data):
    overlap = data.draw(st.integers(min_value=0, max_value=size - 1))
    corpus = Corpus()
    try:
        doc = corpus.ingest_text("doc", pages)
    except CorpusError:
        return  # all-empty pages are rejected upstream
    chunks = chunk_document(doc, ChunkingConfig(size, overlap))
    check_chunks(doc, chunks)


def test_approx_tokens_reported():
    doc = _make_doc(["one two three four"])
    chunks = chunk_document(doc, ChunkingConfig(chunk_size_tokens=10, overlap_tokens=0))
    assert chunks[0].approx_tokens == math.ceil(4 * 1.3)


# -- batch import -------------------------------------------------------------


def test_batch_import_empty_list_rejected():
    with pytest.raises(CorpusError, match="empty url list"):
        batch_import([], Corpus())


def test_batch_import_rejects_non_urls():
    with pytest.raises(CorpusError, match="not a url"):
        batch_import(["not-a-url"], Corpus())


def test_batch_import_single_success(fixture_server):
    base, routes = fixture_server
    routes["/paper-one.txt"] = (200, "text/plain", b"page one text" + b"\x0c" + b"page two")
    corpus = Corpus()
    manifest = batch_import([f"{base}/paper-one.txt"], corpus)
    entry = manifest.entries[0]
    assert entry.status == "ingested"
    assert entry.doc_id is not None
    assert corpus.get(entry.doc_id).label == "paper-one"
    assert corpus.get(entry.doc_id).page_count == 2


def test_batch_import_partial_failure(fixture_server):
    base, routes = fixture_server
    routes["/good.txt"] = (200, "text/plain", b"good content here")
    corpus = Corpus()
    manifest = batch_import([f"{base}/good.txt", f"{base}/missing.txt"], corpus)
    statuses = [e.status for e in manifest.entries]
    assert statuses == ["ingested", "failed"]
    assert manifest.entries[1].error
    assert manifest.done


def test_batch_import_unsupported_content_fails_entry(fixture_server):
    base, routes = fixture_server
    routes["/image.png"] = (200, "image/png", b"\x89PNG")
    manifest = batch_import([f"{base}/image.png"], Corpus())
    assert manifest.entries[0].status == "failed"
    assert "unsupported content type" in manifest.entries[0].error


def test_batch_import_duplicate_label_fails_entry(fixture_server):
    base, routes = fixture_server
    routes["/dup.txt"] = (200, "text/plain", b"content a")
    corpus = Corpus()
    corpus.ingest_text("dup", ["existing"])
    manifest = batch_import([f"{base}/dup.txt"], corpus)
    assert manifest.entries[0].status == "failed"
    assert "duplicate label" in manifest.entries[0].error


def test_batch_import_fetch_fanout_is_bounded():
    import threading
    import time as time_mod

    state = {"active": 0, "peak": 0}
    lock = threading.Lock()

    def slow_fetcher(url: str) -> tuple[bytes, str]:
        with lock:
            state["active"] += 1
            state["peak"] = max(state["peak"], state["active"])
        time_mod.sleep(0.02)
        with lock:
            state["active"] -= 1
        return f"content for {url}".encode(), "text/plain"

    urls = [f"http://papers/p{i}.txt" for i in range(10)]
    manifest = batch_import(urls, Corpus(), fetcher=slow_fetcher, max_workers=4)
    assert all(e.status == "ingested" for e in manifest.entries)
    assert 1 < state["peak"] <= 4


# -- persistence ---------------------------------------------------------------


def test_corpus_save_load_round_trip(tmp_path):
    corpus = Corpus()
    corpus.ingest_text("one", ["page a", "page b"], source_uri="file:///one")
    corpus.ingest_text("two", ["page c"], references_text="[1] X. 2020.")
    corpus.save(tmp_path / "corpus")

    loaded = Corpus.load(tmp_path / "corpus")
    assert len(loaded) == 2
    doc = loaded.get_by_label("one")
    assert doc.pages == ("page a", "page b")
    assert doc.source_uri == "file:///one"
    assert loaded.get_by_label("two").references_text == "[1] X. 2020."


def test_corpus_load_missing_manifest(tmp_path):
    with pytest.raises(CorpusError, match="manifest"):
        Corpus.load(tmp_path / "nowhere")
