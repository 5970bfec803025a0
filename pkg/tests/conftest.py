"""Shared fixtures: a small three-paper corpus, scripted generator rules,
and a local HTTP fixture server for import tests."""

from __future__ import annotations

import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from paperrag.corpus import ChunkingConfig
from paperrag.engine import Engine
from paperrag.generation import ScriptedGenerator, ScriptedRule

ALPHA_PAGES = [
    "Alpha embeddings survey. Dense vector representations map text into a "
    "shared semantic space where distance tracks meaning. This paper reviews "
    "how embedding models are trained with contrastive objectives.",
    "Longer inputs are split into chunks before embedding. Chunk size trades "
    "context against precision, and overlapping windows reduce boundary loss.\n"
    "References\n"
    "[1] A. Author. Contrastive Pretraining of Text Encoders. 2020.\n"
    "[2] B. Writer. Scaling Dense Retrieval. 2021.",
]

BETA_PAGES = [
    "Beta retrieval methods. Sparse and dense retrievers rank passages for a "
    "query; merging their ranked lists with reciprocal rank scores is robust "
    "because it ignores score scales.",
    "Query rewriting widens recall: several rephrasings of one question reach "
    "different corners of the corpus, and rank fusion merges the results.",
]

GAMMA_PAGES = [
    "Gamma agents for literature work. A reading agent searches the corpus, "
    "summarizes retrieved passages as evidence, and drafts cited answers.",
    "The agent checks its own answer for completeness and refines the search "
    "query when coverage is judged insufficient.",
]

FIXTURE_DOCS = [
    ("alpha-embeddings", ALPHA_PAGES),
    ("beta-retrieval", BETA_PAGES),
    ("gamma-agents", GAMMA_PAGES),
]


def build_fixture_engine(**kwargs) -> Engine:
    engine = Engine.fresh(
        chunking=ChunkingConfig(chunk_size_tokens=40, overlap_tokens=8), **kwargs
    )
    for label, pages in FIXTURE_DOCS:
        engine.ingest_document(label, pages)
    return engine


E2E_RULES = [
    ScriptedRule(
        pattern=r"Rewrite the question below",
        reply=(
            "How do retrieval systems ground generated answers in sources?\n"
            "What does rank fusion add over a single query search?"
        ),
    ),
    ScriptedRule(
        pattern=r"Passage from \(([^,]+), page (\d+)\).*Summarize what this passage",
        reply=r"score: 0.9" + "\n" + r"summary: Grounded support from \1 page \2.",
    ),
    ScriptedRule(
        pattern=r"Write an answer to the question using only the evidence",
        reply=(
            "Retrieval-augmented generation retrieves passages and conditions "
            "the generator on them, which grounds answers in the corpus "
            "(alpha-embeddings, page 1). Query rewriting plus reciprocal rank "
            "fusion merges several searches into one ranking "
            "(beta-retrieval, page 2)."
        ),
    ),
    ScriptedRule(pattern=r"Is this answer complete", reply="yes: both aspects are covered."),
    ScriptedRule(pattern=r"Propose one refined search query", reply="rank fusion evidence"),
]


def build_e2e_generator() -> ScriptedGenerator:
    return ScriptedGenerator(E2E_RULES)


@pytest.fixture
def fixture_engine() -> Engine:
    return build_fixture_engine(generator=build_e2e_generator())


RAFT_RULES = [
    ScriptedRule(
        pattern=r"Passage:\n(\S+ \S+ \S+)[\s\S]*Write \d+ distinct questions",
        reply=r"What does the passage starting with \1 cover?",
    ),
    ScriptedRule(
        pattern=r"Reason step by step from the passage",
        reply="The passage states its topic directly.\n#### It covers the stated topic.",
    ),
]

RELATION_RULES = [
    ScriptedRule(pattern=r"In five words or fewer", reply="builds on"),
]


def rule_dicts(rules) -> list[dict]:
    return [
        {
            "pattern": r.pattern,
            "reply": r.reply,
            **({"error": r.error} if r.error else {}),
            **({"latency_s": r.latency_s} if r.latency_s else {}),
        }
        for r in rules
    ]


def write_cli_workspace(root) -> dict:
    """Materialize a config + scripted fixture + ingested corpus for CLI
    runs. Returns the relevant paths."""
    import yaml

    from paperrag.config import build_engine, load_config

    root.mkdir(parents=True, exist_ok=True)
    fixture_path = root / "rules.yaml"
    fixture_path.write_text(
        yaml.safe_dump(rule_dicts(E2E_RULES + RELATION_RULES + RAFT_RULES)),
        encoding="utf-8",
    )
    corpus_dir = root / "corpus"
    config_path = root / "config.yaml"
    config_path.write_text(
        yaml.safe_dump(
            {
                "listen_address": "127.0.0.1:8123",
                "corpus_dir": str(corpus_dir),
                "generator": {"kind": "scripted", "fixture": str(fixture_path)},
                "embedder": {"kind": "deterministic", "dim": 64},
                "chunking": {"chunk_size_tokens": 40, "overlap_tokens": 8},
            }
        ),
        encoding="utf-8",
    )
    engine = build_engine(load_config(config_path))
    for label, pages in FIXTURE_DOCS:
        engine.ingest_document(label, pages)
    engine.save(corpus_dir)
    return {"config": config_path, "corpus_dir": corpus_dir, "fixture": fixture_path}


@pytest.fixture
def cli_workspace(tmp_path):
    return write_cli_workspace(tmp_path / "ws")


class _FixtureHandler(BaseHTTPRequestHandler):
    routes: dict[str, tuple[int, str, bytes]] = {}

    def do_GET(self):  # noqa: N802 - http.server API
        entry = self.routes.get(self.path)
        if entry is None:
            self.send_response(404)
            self.end_headers()
            self.wfile.write(b"not found")
            return
        status, content_type, body = entry
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):  # silence test output
        pass


@pytest.fixture
def fixture_server():
    """Local HTTP server serving configurable routes; yields (base_url, routes)."""
    routes: dict[str, tuple[int, str, bytes]] = {}
    handler = type("Handler", (_FixtureHandler,), {"routes": routes})
    server = HTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_port}", routes
    finally:
        server.shutdown()
        thread.join(timeout=5)
