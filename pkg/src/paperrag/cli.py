"""Command-line surface: every engine operation, one subcommand each.

Subcommands delegate to the same engine code paths as the HTTP service.
Exit codes: 0 on success, 1 with a single-line error otherwise, 2 for
usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, build_engine, load_config
from .corpus import PAGE_SEPARATOR, CorpusError
from .embedding import EmbeddingError
from .engine import METHOD_BASIC, METHOD_FUSION, METHOD_FUSION_FT, EngineError
from .evalharness import EvalConfig, EvalError, load_gold_items, render_table, run_comparison, write_report
from .generation import GeneratorError
from .index import VectorIndexError
from .raftdata import RaftConfig, RaftError, build_records, export_records, validate_export
from .refgraph import RefGraphError

_METHOD_ALIASES = {
    "rag": METHOD_BASIC,
    "fusion": METHOD_FUSION,
    "fusion+ft": METHOD_FUSION_FT,
}

_KNOWN_ERRORS = (
    ConfigError,
    CorpusError,
    EngineError,
    EvalError,
    EmbeddingError,
    GeneratorError,
    RaftError,
    RefGraphError,
    VectorIndexError,
    OSError,
)


def _engine(args: argparse.Namespace):
    return build_engine(load_config(args.config))


def cmd_ingest(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    engine = build_engine(cfg)
    for file_path in args.files:
        path = Path(file_path)
        text = path.read_text(encoding="utf-8")
        label, source_uri = args.label or path.stem, str(path)
        sidecar = path.with_name(path.name + ".meta.json")
        if sidecar.exists():
            meta = json.loads(sidecar.read_text(encoding="utf-8"))
            label = args.label or meta.get("label", label)
            source_uri = meta.get("source_uri", source_uri)
        doc = engine.ingest_document(label, text.split(PAGE_SEPARATOR), source_uri=source_uri)
        print(f"ingested {doc.label} ({doc.page_count} pages) id={doc.id}")
    engine.save(cfg.corpus_dir)
    return 0


def cmd_ask(args: argparse.Namespace) -> int:
    engine = _engine(args)
    answer = engine.ask(
        args.question, mode=args.mode, model=args.model, k=args.k,
        n_variants=args.variants,
    )
    print(answer.text)
    print()
    print("Citations:")
    if answer.citations:
        for citation in answer.citations:
            print(f"  {citation.rendered()}")
    else:
        print("  (none)")
    return 0


def cmd_refgraph(args: argparse.Namespace) -> int:
    engine = _engine(args)
    doc_id = args.doc_id
    if doc_id not in engine.corpus and engine.corpus.has_label(doc_id):
        doc_id = engine.corpus.get_by_label(doc_id).id
    _, mermaid = engine.reference_graph(doc_id, k=args.k)
    if args.out:
        Path(args.out).write_text(mermaid.source, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(mermaid.source, end="")
    return 0


def cmd_eval_run(args: argparse.Namespace) -> int:
    engine = _engine(args)
    items = load_gold_items(args.items)
    methods = []
    for name in args.methods.split(","):
        name = name.strip()
        methods.append(_METHOD_ALIASES.get(name, name))
    table = run_comparison(
        items,
        methods,
        EvalConfig(k=args.k, parallel=args.parallel),
        engine.method_registry(),
    )
    print(render_table(table), end="")
    if args.out:
        write_report(table, args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_raft_export(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.corpus:
        from .config import build_embedder, build_generators
        from .engine import Engine

        generator, finetuned = build_generators(cfg.generator)
        engine = Engine.load(
            args.corpus,
            embedder=build_embedder(cfg.embedder),
            generator=generator,
            finetuned_generator=finetuned,
            chunking=cfg.chunking,
        )
    else:
        engine = build_engine(cfg)
    if engine.generator is None:
        raise ConfigError("raft-export requires a configured generator")
    records = build_records(
        engine.all_chunks(),
        RaftConfig(
            num_distractors=args.distractors,
            oracle_fraction=args.oracle_fraction,
            questions_per_chunk=args.questions_per_chunk,
            seed=args.seed,
        ),
        engine.generator,
    )
    count = export_records(records, args.out)
    print(f"wrote {count} records to {args.out}")
    return 0


def cmd_raft_validate(args: argparse.Namespace) -> int:
    count = validate_export(args.file)
    print(f"{args.file}: {count} records, schema ok")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import serve

    serve(args.config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paperrag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default="paperrag.yaml", help="service config file")

    p_ingest = sub.add_parser("ingest", help="ingest text files into the corpus")
    add_config(p_ingest)
    p_ingest.add_argument("files", nargs="+", help="UTF-8 text files (form feed separates pages)")
    p_ingest.add_argument("--label", default=None, help="citation label (default: file stem)")
    p_ingest.set_defaults(handler=cmd_ingest)

    p_ask = sub.add_parser("ask", help="answer a question over the corpus")
    add_config(p_ask)
    p_ask.add_argument("question")
    p_ask.add_argument("--mode", choices=["basic", "fusion"], default=None)
    p_ask.add_argument("--model", choices=["base", "finetuned"], default="base")
    p_ask.add_argument("--k", type=int, default=None, help="evidence per iteration")
    p_ask.add_argument("--variants", type=int, default=None, help="query variants in fusion mode")
    p_ask.set_defaults(handler=cmd_ask)

    p_graph = sub.add_parser("refgraph", help="emit the reference graph for a document")
    add_config(p_graph)
    p_graph.add_argument("doc_id", help="document id or label")
    p_graph.add_argument("--k", type=int, default=10)
    p_graph.add_argument("--out", default=None, help="write Mermaid source here")
    p_graph.set_defaults(handler=cmd_refgraph)

    p_eval = sub.add_parser("eval", help="evaluation harness")
    eval_sub = p_eval.add_subparsers(dest="eval_command", required=True)
    p_eval_run = eval_sub.add_parser("run", help="compare methods on a gold set")
    add_config(p_eval_run)
    p_eval_run.add_argument("--items", required=True, help="gold JSONL file")
    p_eval_run.add_argument("--methods", default="rag,fusion,fusion+ft")
    p_eval_run.add_argument("--k", type=int, default=10)
    p_eval_run.add_argument("--out", default=None, help="write JSON report here")
    p_eval_run.add_argument("--parallel", action="store_true", help="F1-only parallel mode")
    p_eval_run.set_defaults(handler=cmd_eval_run)

    p_raft = sub.add_parser("raft-export", help="build and export RAFT records")
    add_config(p_raft)
    p_raft.add_argument("--corpus", default=None, help="corpus directory (default: config corpus_dir)")
    p_raft.add_argument("--out", required=True)
    p_raft.add_argument("--distractors", type=int, default=4)
    p_raft.add_argument("--oracle-fraction", type=float, default=0.8)
    p_raft.add_argument("--questions-per-chunk", type=int, default=1)
    p_raft.add_argument("--seed", type=int, default=42)
    p_raft.set_defaults(handler=cmd_raft_export)

    p_validate = sub.add_parser("raft-validate", help="validate an exported RAFT file")
    p_validate.add_argument("file")
    p_validate.set_defaults(handler=cmd_raft_validate)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    add_config(p_serve)
    p_serve.set_defaults(handler=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except _KNOWN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
