"""HTTP service wrapping the engine for the web UI and scripts.

All endpoints are thin delegations: ingestion and asking go through the
same engine calls the CLI uses. Batch imports run as background jobs whose
manifests are pollable until every entry reaches a terminal status.
"""

from __future__ import annotations

import threading
import uuid
from typing import Literal

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .agent import Answer
from .corpus import CorpusError, ImportManifest
from .embedding import EmbeddingTransportError
from .engine import Engine, EngineError
from .evalharness import measure_latency
from .generation import GeneratorTransportError


class AskRequest(BaseModel):
    question: str
    mode: Literal["basic", "fusion"] | None = None
    model: Literal["base", "finetuned"] = "base"
    k: int | None = None


class PapersRequest(BaseModel):
    urls: list[str] | None = None
    label: str | None = None
    pages: list[str] | None = None
    source_uri: str = ""


def _answer_payload(engine: Engine, answer: Answer, latency_seconds: float) -> dict:
    evidence = []
    for ev in answer.evidence_used:
        source = engine.chunk_source(ev.chunk_id)
        evidence.append(
            {
                "chunk_id": ev.chunk_id,
                "summary": ev.summary,
                "score": ev.relevance_score,
                # Source coordinates let the UI link citation chips to the
                # evidence entries that produced them.
                "doc_label": source[0] if source else None,
                "page": source[1] if source else None,
            }
        )
    return {
        "answer": answer.text,
        "citations": [
            {"doc_label": c.doc_label, "page": c.page} for c in answer.citations
        ],
        "evidence": evidence,
        "iterations": answer.iterations,
        "complete": answer.complete,
        "warnings": list(answer.warnings),
        "latency_seconds": round(latency_seconds, 4),
    }


def create_app(engine: Engine, *, import_workers: int = 4) -> FastAPI:
    app = FastAPI(title="paperrag")
    jobs: dict[str, ImportManifest] = {}

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.get("/papers")
    def list_papers() -> dict:
        return {
            "papers": [
                {
                    "id": doc.id,
                    "label": doc.label,
                    "pages": doc.page_count,
                    "source_uri": doc.source_uri,
                }
                for doc in engine.corpus.documents()
            ]
        }

    @app.post("/papers", status_code=202)
    def import_papers(body: PapersRequest) -> JSONResponse:
        if body.urls is not None:
            if not body.urls:
                raise HTTPException(status_code=400, detail="empty url list")
            manifest = ImportManifest()
            job_id = uuid.uuid4().hex

            def run() -> None:
                try:
                    engine.import_urls(
                        body.urls, manifest=manifest, max_workers=import_workers
                    )
                except Exception as exc:  # noqa: BLE001 - job must terminate
                    for entry in manifest.entries:
                        if entry.status not in ("ingested", "failed"):
                            entry.status = "failed"
                            entry.error = str(exc)

            from .corpus import ImportEntry

            manifest.entries = [ImportEntry(url=url) for url in body.urls]
            jobs[job_id] = manifest
            threading.Thread(target=run, daemon=True).start()
            return JSONResponse(
                status_code=202,
                content={"job_id": job_id, "manifest": manifest.to_dict()},
            )

        if body.label is None or body.pages is None:
            raise HTTPException(
                status_code=400, detail="body must carry either urls or label+pages"
            )
        try:
            doc = engine.ingest_document(
                body.label, body.pages, source_uri=body.source_uri
            )
        except CorpusError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        manifest = ImportManifest()
        from .corpus import ImportEntry

        manifest.entries = [
            ImportEntry(url=body.source_uri or body.label, status="ingested", doc_id=doc.id)
        ]
        return JSONResponse(
            status_code=202, content={"job_id": None, "manifest": manifest.to_dict()}
        )

    @app.get("/papers/imports/{job_id}")
    def import_status(job_id: str) -> dict:
        manifest = jobs.get(job_id)
        if manifest is None:
            raise HTTPException(status_code=404, detail=f"unknown import job: {job_id}")
        return {"job_id": job_id, "done": manifest.done, "manifest": manifest.to_dict()}

    @app.get("/papers/{doc_id}/refgraph")
    def refgraph(doc_id: str, k: int = 10) -> dict:
        try:
            graph, mermaid = engine.reference_graph(doc_id, k=k)
        except CorpusError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except EngineError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return {
            "mermaid": mermaid.source,
            "graph": {
                "nodes": [{"node_id": n.node_id, "label": n.label} for n in graph.nodes],
                "edges": [
                    {"from": e.src, "to": e.dst, "relation_label": e.relation_label}
                    for e in graph.edges
                ],
            },
        }

    @app.post("/ask")
    def ask(body: AskRequest) -> dict:
        if not body.question.strip():
            raise HTTPException(status_code=400, detail="question must be non-empty")
        try:
            answer, latency = measure_latency(
                lambda: engine.ask(
                    body.question, mode=body.mode, model=body.model, k=body.k
                )
            )
        except EngineError as exc:
            status = 409 if "no papers ingested" in str(exc) else 400
            raise HTTPException(status_code=status, detail=str(exc)) from exc
        except (GeneratorTransportError, EmbeddingTransportError) as exc:
            raise HTTPException(
                status_code=502, detail=f"{exc} (provider unavailable; retry later)"
            ) from exc
        return _answer_payload(engine, answer, latency)

    return app


def serve(config_path: str) -> None:
    """Blocking entry point used by the CLI's serve subcommand."""
    import uvicorn

    from .config import build_engine, load_config

    cfg = load_config(config_path)
    engine = build_engine(cfg)
    app = create_app(engine, import_workers=cfg.import_workers)
    uvicorn.run(app, host=cfg.host, port=cfg.port)
