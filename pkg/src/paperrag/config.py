"""Service configuration: one YAML file, environment overrides for secrets.

Secrets never live in the file. PROVIDER_API_KEY is read by the provider
clients at call time; PROVIDER_BASE_URL overrides whichever base URLs the
file sets.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import yaml

from .agent import AgentConfig
from .corpus import ChunkingConfig
from .embedding import DeterministicHashEmbedder, EmbeddingProvider, HttpEmbedder
from .generation import HttpGenerator, ScriptedGenerator, TextGenerator
from .retrieval import RetrievalConfig

PROVIDER_BASE_URL_ENV = "PROVIDER_BASE_URL"


class ConfigError(Exception):
    """Missing or invalid configuration."""


@dataclass(frozen=True)
class ProviderConfig:
    kind: str  # generator: scripted|http; embedder: deterministic|http
    base_url: str = ""
    model: str = ""
    finetuned_model: str = ""
    fixture: str = ""  # scripted generator rules file
    dim: int = 64
    timeout: float = 30.0
    max_retries: int = 3


@dataclass(frozen=True)
class ServiceConfig:
    listen_address: str = "127.0.0.1:8000"
    corpus_dir: str = "./corpus"
    generator: ProviderConfig = ProviderConfig(kind="http")
    embedder: ProviderConfig = ProviderConfig(kind="deterministic")
    retrieval: RetrievalConfig = RetrievalConfig()
    agent: AgentConfig = AgentConfig()
    chunking: ChunkingConfig = ChunkingConfig()
    import_workers: int = 4

    def __post_init__(self) -> None:
        host, _, port = self.listen_address.partition(":")
        if not host or not port.isdigit():
            raise ConfigError(f"listen_address must be host:port, got {self.listen_address!r}")
        if self.retrieval.k < 1:
            raise ConfigError("retrieval k must be >= 1")

    @property
    def host(self) -> str:
        return self.listen_address.partition(":")[0]

    @property
    def port(self) -> int:
        return int(self.listen_address.partition(":")[2])


def _provider_config(raw: dict, *, default_kind: str) -> ProviderConfig:
    return ProviderConfig(
        kind=raw.get("kind", default_kind),
        base_url=os.environ.get(PROVIDER_BASE_URL_ENV) or raw.get("base_url", ""),
        model=raw.get("model", ""),
        finetuned_model=raw.get("finetuned_model", ""),
        fixture=raw.get("fixture", ""),
        dim=int(raw.get("dim", 64)),
        timeout=float(raw.get("timeout", 30.0)),
        max_retries=int(raw.get("max_retries", 3)),
    )


def load_config(path: str | Path) -> ServiceConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config not found: {path}")
    raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}

    retrieval_raw = raw.get("retrieval", {})
    agent_raw = raw.get("agent", {})
    chunking_raw = raw.get("chunking", {})
    return ServiceConfig(
        listen_address=raw.get("listen_address", "127.0.0.1:8000"),
        corpus_dir=raw.get("corpus_dir", "./corpus"),
        generator=_provider_config(raw.get("generator", {}), default_kind="http"),
        embedder=_provider_config(raw.get("embedder", {}), default_kind="deterministic"),
        retrieval=RetrievalConfig(
            k=int(retrieval_raw.get("k", 10)),
            n_variants=int(retrieval_raw.get("n_variants", 4)),
            rrf_constant=float(retrieval_raw.get("rrf_constant", 60.0)),
            per_list_depth=int(retrieval_raw.get("per_list_depth", 20)),
            concurrency=int(retrieval_raw.get("concurrency", 4)),
        ),
        agent=AgentConfig(
            max_iterations=int(agent_raw.get("max_iterations", 3)),
            evidence_per_iteration=int(agent_raw.get("evidence_per_iteration", 10)),
            answer_token_budget=int(agent_raw.get("answer_token_budget", 500)),
            mode=agent_raw.get("mode", "basic"),
            relevance_threshold=float(agent_raw.get("relevance_threshold", 0.5)),
            concurrency=int(agent_raw.get("concurrency", 4)),
        ),
        chunking=ChunkingConfig(
            chunk_size_tokens=int(chunking_raw.get("chunk_size_tokens", 512)),
            overlap_tokens=int(chunking_raw.get("overlap_tokens", 64)),
        ),
        import_workers=int(raw.get("import_workers", 4)),
    )


def build_engine(cfg: ServiceConfig):
    """Assemble an Engine from configuration, loading any persisted corpus
    under corpus_dir."""
    from .engine import Engine

    embedder = build_embedder(cfg.embedder)
    generator, finetuned = build_generators(cfg.generator)
    corpus_dir = Path(cfg.corpus_dir)
    if (corpus_dir / "manifest.json").exists():
        return Engine.load(
            corpus_dir,
            embedder=embedder,
            generator=generator,
            finetuned_generator=finetuned,
            chunking=cfg.chunking,
            retrieval_cfg=cfg.retrieval,
            agent_cfg=cfg.agent,
        )
    corpus_dir.mkdir(parents=True, exist_ok=True)
    from .corpus import Corpus
    from .index import InMemoryExactIndex

    return Engine(
        corpus=Corpus(),
        index=InMemoryExactIndex(embedder.dim),
        embedder=embedder,
        generator=generator,
        finetuned_generator=finetuned,
        chunking=cfg.chunking,
        retrieval_cfg=cfg.retrieval,
        agent_cfg=cfg.agent,
    )


def build_embedder(cfg: ProviderConfig) -> EmbeddingProvider:
    if cfg.kind == "deterministic":
        return DeterministicHashEmbedder(cfg.dim)
    if cfg.kind == "http":
        if not cfg.base_url:
            raise ConfigError("http embedder requires base_url")
        return HttpEmbedder(
            cfg.base_url, cfg.dim, model=cfg.model,
            timeout=cfg.timeout, max_retries=cfg.max_retries,
        )
    raise ConfigError(f"unknown embedder kind: {cfg.kind}")


def build_generators(cfg: ProviderConfig) -> tuple[TextGenerator, TextGenerator | None]:
    """Returns (base generator, fine-tuned generator or None)."""
    if cfg.kind == "scripted":
        if not cfg.fixture:
            raise ConfigError("scripted generator requires a fixture path")
        base = ScriptedGenerator.from_file(cfg.fixture)
        # The fine-tuned variant replays the same fixture; it differs only
        # in model id, which a scripted fixture has no use for.
        finetuned = ScriptedGenerator.from_file(cfg.fixture) if cfg.finetuned_model else None
        return base, finetuned
    if cfg.kind == "http":
        if not cfg.base_url:
            raise ConfigError("http generator requires base_url")
        base = HttpGenerator(
            cfg.base_url, cfg.model, timeout=cfg.timeout, max_retries=cfg.max_retries
        )
        finetuned = None
        if cfg.finetuned_model:
            finetuned = HttpGenerator(
                cfg.base_url, cfg.finetuned_model,
                timeout=cfg.timeout, max_retries=cfg.max_retries,
            )
        return base, finetuned
    raise ConfigError(f"unknown generator kind: {cfg.kind}")
