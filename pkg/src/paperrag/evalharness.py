"""Precision / recall / F1 and latency measurement for retrieval runs.

The harness compares registered retrieval methods over a gold-labeled item
set and emits both machine-readable records and a plain-text table whose
columns mirror the method-comparison reports this engine is evaluated
with: Methods | F1 (%) | Latency (s). Relevance is judged at chunk level,
because chunks are what the system actually retrieves.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .retrieval import Query

RetrievalMethod = Callable[[Query, int], Sequence[str]]


class EvalError(Exception):
    """Invalid evaluation input."""


@dataclass(frozen=True)
class EvalItem:
    question: Query
    gold_chunk_ids: frozenset[str]

    def __post_init__(self) -> None:
        if not self.gold_chunk_ids:
            raise EvalError("gold set must be non-empty")


@dataclass(frozen=True)
class EvalMetrics:
    precision: float
    recall: float
    f1: float
    latency_seconds: float


@dataclass(frozen=True)
class ReportRow:
    method_name: str
    f1_percent: float
    latency_seconds: float | None  # None when latency was suppressed
    group: str | None = None  # backend name in backend comparisons


@dataclass(frozen=True)
class ReportTable:
    rows: tuple[ReportRow, ...]
    caption: str


def compute_precision(retrieved: Sequence[str], gold: frozenset[str] | set[str]) -> float:
    """Fraction of retrieved chunks that are relevant; 0 when nothing was
    retrieved."""
    unique = set(retrieved)
    if not unique:
        return 0.0
    return len(unique & set(gold)) / len(unique)


def compute_recall(retrieved: Sequence[str], gold: frozenset[str] | set[str]) -> float:
    """Fraction of relevant chunks that were retrieved."""
    if not gold:
        raise EvalError("gold set must be non-empty")
    return len(set(retrieved) & set(gold)) / len(gold)


def compute_f1(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall, with 0/0 -> 0."""
    for name, value in (("precision", precision), ("recall", recall)):
        if not 0.0 <= value <= 1.0:
            raise EvalError(f"{name} must be in [0, 1], got {value}")
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * (precision * recall) / (precision + recall)


def measure_latency(run: Callable[[], object]) -> tuple[object, float]:
    """Wall-clock duration of a run on the monotonic clock."""
    start = time.perf_counter()
    result = run()
    return result, time.perf_counter() - start


@dataclass
class MethodRegistry:
    """Named retrieval methods, evaluated in registration order."""

    _methods: dict[str, RetrievalMethod] = field(default_factory=dict)

    def register(self, name: str, method: RetrievalMethod) -> None:
        if not name:
            raise EvalError("method name must be non-empty")
        self._methods[name] = method

    def get(self, name: str) -> RetrievalMethod:
        if name not in self._methods:
            raise EvalError(f"unknown method: {name}")
        return self._methods[name]

    def names(self) -> list[str]:
        return list(self._methods)


@dataclass(frozen=True)
class EvalConfig:
    k: int = 10
    parallel: bool = False  # F1-only mode: items fan out, latency suppressed

    def __post_init__(self) -> None:
        if self.k <= 0:
            raise EvalError("k must be positive")


def evaluate_method(
    items: Sequence[EvalItem],
    method: RetrievalMethod,
    cfg: EvalConfig,
) -> EvalMetrics:
    """Mean precision and recall over items; F1 of those means; mean
    latency (meaningless in parallel mode and reported as 0)."""

    def run_item(item: EvalItem) -> tuple[float, float, float]:
        retrieved, latency = measure_latency(lambda: method(item.question, cfg.k))
        precision = compute_precision(list(retrieved), item.gold_chunk_ids)
        recall = compute_recall(list(retrieved), item.gold_chunk_ids)
        return precision, recall, latency

    if cfg.parallel:
        with ThreadPoolExecutor() as pool:
            outcomes = list(pool.map(run_item, items))
    else:
        outcomes = [run_item(item) for item in items]

    mean_p = sum(o[0] for o in outcomes) / len(outcomes)
    mean_r = sum(o[1] for o in outcomes) / len(outcomes)
    mean_latency = sum(o[2] for o in outcomes) / len(outcomes)
    return EvalMetrics(
        precision=mean_p,
        recall=mean_r,
        f1=compute_f1(mean_p, mean_r),
        latency_seconds=mean_latency,
    )


def run_comparison(
    items: Sequence[EvalItem],
    methods: Sequence[str],
    cfg: EvalConfig,
    registry: MethodRegistry,
    *,
    caption: str = "Method comparison",
) -> ReportTable:
    """Evaluate each registered method over the items, one row per method
    in the order given. Unknown methods fail before any work runs."""
    if not items:
        raise EvalError("items must be non-empty")
    resolved = [(name, registry.get(name)) for name in methods]

    rows = []
    for name, method in resolved:
        metrics = evaluate_method(items, method, cfg)
        rows.append(
            ReportRow(
                method_name=name,
                f1_percent=metrics.f1 * 100.0,
                latency_seconds=None if cfg.parallel else metrics.latency_seconds,
            )
        )
    return ReportTable(rows=tuple(rows), caption=caption)


def compare_backends(
    items: Sequence[EvalItem],
    registries: Mapping[str, MethodRegistry],
    methods: Sequence[str],
    cfg: EvalConfig,
    *,
    caption: str = "Backend comparison",
) -> ReportTable:
    """Run the same method comparison against each backend's registry.

    Rows come back grouped by backend, methods in the given order within
    each group. Exact backends must agree on every F1 column; only latency
    may differ.
    """
    if len(registries) < 2:
        raise EvalError("need >=2 backends")
    rows: list[ReportRow] = []
    for backend_name, registry in registries.items():
        table = run_comparison(items, methods, cfg, registry, caption=backend_name)
        rows.extend(
            ReportRow(
                method_name=row.method_name,
                f1_percent=row.f1_percent,
                latency_seconds=row.latency_seconds,
                group=backend_name,
            )
            for row in table.rows
        )
    return ReportTable(rows=tuple(rows), caption=caption)


# -- report emission --------------------------------------------------------

TABLE_HEADER = "Methods | F1 (%) | Latency (s)"


def render_table(table: ReportTable) -> str:
    """Plain-text table matching the published comparison layout."""
    lines = [table.caption, TABLE_HEADER, "-" * len(TABLE_HEADER)]
    current_group: str | None = None
    for row in table.rows:
        if row.group != current_group:
            if row.group is not None:
                lines.append(f"[{row.group}]")
            current_group = row.group
        latency = "-" if row.latency_seconds is None else f"{row.latency_seconds:.1f}"
        lines.append(f"{row.method_name} | {row.f1_percent:.2f} | {latency}")
    return "\n".join(lines) + "\n"


def table_records(table: ReportTable, *, include_latency: bool = True) -> dict:
    rows = []
    for row in table.rows:
        record: dict[str, object] = {
            "method": row.method_name,
            "f1_percent": round(row.f1_percent, 10),
        }
        if row.group is not None:
            record["backend"] = row.group
        if include_latency:
            record["latency_seconds"] = (
                None if row.latency_seconds is None else round(row.latency_seconds, 4)
            )
        rows.append(record)
    return {"caption": table.caption, "rows": rows}


def write_report(table: ReportTable, path: str | Path, *, include_latency: bool = True) -> None:
    Path(path).write_text(
        json.dumps(table_records(table, include_latency=include_latency),
                   ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )


# -- gold-label file --------------------------------------------------------


def load_gold_items(path: str | Path) -> list[EvalItem]:
    """Line-delimited {question, gold_chunk_ids} records with validation."""
    path = Path(path)
    if not path.exists():
        raise EvalError(f"no such gold file: {path}")
    items: list[EvalItem] = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise EvalError(f"gold line {line_no}: invalid json ({exc})") from exc
        question = payload.get("question")
        gold = payload.get("gold_chunk_ids")
        if not isinstance(question, str) or not question.strip():
            raise EvalError(f"gold line {line_no}: question must be a non-empty string")
        if not isinstance(gold, list) or not gold or not all(isinstance(g, str) for g in gold):
            raise EvalError(f"gold line {line_no}: gold_chunk_ids must be a non-empty list")
        items.append(EvalItem(question=Query(question), gold_chunk_ids=frozenset(gold)))
    if not items:
        raise EvalError("gold file contains no items")
    return items


def save_gold_items(items: Sequence[EvalItem], path: str | Path) -> None:
    lines = [
        json.dumps(
            {"question": item.question.text, "gold_chunk_ids": sorted(item.gold_chunk_ids)},
            ensure_ascii=False, sort_keys=True,
        )
        for item in items
    ]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
