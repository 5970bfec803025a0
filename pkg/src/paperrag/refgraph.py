"""Reference extraction, relevance ranking, and Mermaid graph output.

The reference section is located by its heading, split into entries, and
the entries most relevant to the host paper are selected by embedding
similarity. A generator call names each host-to-reference relationship
with a short label, and the resulting graph is emitted as deterministic
Mermaid flowchart source. A minimal parser for that same subset backs the
round-trip tests; rendering is the UI's job.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import Document
from .embedding import EmbeddingProvider
from .generation import GeneratorError, TextGenerator, render_prompt, system_prompt

logger = logging.getLogger(__name__)


class RefGraphError(Exception):
    """Invalid reference-graph input."""


@dataclass(frozen=True)
class ReferenceEntry:
    index: int  # 1-based position in the reference list
    raw_text: str
    title: str | None = None
    year: int | None = None


@dataclass(frozen=True)
class RankedReferences:
    entries: tuple[tuple[ReferenceEntry, float], ...]  # sorted by score desc
    selected: tuple[ReferenceEntry, ...]  # the top-k subset


@dataclass(frozen=True)
class Node:
    node_id: str
    label: str


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    relation_label: str


_NODE_ID_RE = re.compile(r"^[A-Za-z0-9_]+$")


@dataclass(frozen=True)
class RefGraph:
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self) -> None:
        ids = [n.node_id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise RefGraphError("duplicate node ids")
        for node_id in ids:
            if not _NODE_ID_RE.match(node_id):
                raise RefGraphError(f"invalid node id: {node_id!r}")
        declared = set(ids)
        for edge in self.edges:
            if edge.src not in declared or edge.dst not in declared:
                raise RefGraphError(f"edge endpoint not declared: {edge.src}->{edge.dst}")
            if edge.src == edge.dst:
                raise RefGraphError(f"self-loop on {edge.src}")


@dataclass(frozen=True)
class MermaidDoc:
    source: str


# -- reference extraction ---------------------------------------------------

# Page separators (form feeds) count as line breaks around the heading.
_HEADING_RE = re.compile(
    r"(?:^|[\n\f])[ \t]*(?:references|bibliography)[ \t]*:?[ \t]*(?=\n|\f|$)",
    re.IGNORECASE,
)
_BRACKET_SPLIT_RE = re.compile(r"(?m)^[ \t]*\[(\d+)\][ \t]*")
_DOTTED_SPLIT_RE = re.compile(r"(?m)^[ \t]*(\d{1,3})\.[ \t]+")
_YEAR_RE = re.compile(r"\b(?:19|20)\d{2}\b")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[a-z0-9])\.\s+")


def _parse_entry(index: int, raw: str) -> ReferenceEntry:
    raw = " ".join(raw.split())
    year_match = _YEAR_RE.search(raw)
    parts = [p.strip() for p in _SENTENCE_SPLIT_RE.split(raw) if p.strip()]
    title = parts[1] if len(parts) >= 2 else None
    return ReferenceEntry(
        index=index,
        raw_text=raw,
        title=title,
        year=int(year_match.group(0)) if year_match else None,
    )


def _split_entries(section: str) -> list[str]:
    for splitter in (_BRACKET_SPLIT_RE, _DOTTED_SPLIT_RE):
        pieces = splitter.split(section)
        if len(pieces) >= 3:  # prefix, number, text, number, text, ...
            return [pieces[i] for i in range(2, len(pieces), 2)]
    # Hanging-indent heuristic: a non-indented line starts a new entry,
    # indented or blank-joined lines continue the previous one.
    blocks = [b for b in re.split(r"\n\s*\n", section) if b.strip()]
    if len(blocks) > 1:
        return blocks
    entries: list[str] = []
    for line in section.splitlines():
        if not line.strip():
            continue
        if line[:1].isspace() and entries:
            entries[-1] += " " + line.strip()
        else:
            entries.append(line.strip())
    return entries


def extract_references(doc: Document) -> list[ReferenceEntry]:
    """Locate the reference section and split it into entries.

    Absence of a recognizable section is a diagnostic, not an error: the
    result is simply empty.
    """
    section = doc.references_text
    if section is None:
        matches = list(_HEADING_RE.finditer(doc.full_text))
        if not matches:
            logger.warning("no reference section found in %s", doc.label)
            return []
        section = doc.full_text[matches[-1].end() :]
    raw_entries = [e for e in _split_entries(section.replace("\f", "\n")) if e.strip()]
    return [_parse_entry(i, raw) for i, raw in enumerate(raw_entries, start=1)]


# -- relevance ranking ------------------------------------------------------

_ANCHOR_CHARS = 2000


def host_anchor_text(doc: Document) -> str:
    """Title+abstract approximation: the head of the first page."""
    return doc.pages[0][:_ANCHOR_CHARS]


def rank_references_topk(
    doc: Document,
    refs: Sequence[ReferenceEntry],
    k: int,
    embedder: EmbeddingProvider,
    generator: TextGenerator | None = None,
) -> RankedReferences:
    """Score references against the host paper and select the top k.

    The baseline score is cosine similarity between the reference text and
    the host anchor, mapped onto [0, 1]. When a generator is supplied, a
    parseable generator score overrides the similarity for that entry.
    Ties break by ascending reference index.
    """
    if not refs:
        raise RefGraphError("refs must be non-empty")
    if k <= 0:
        raise RefGraphError("k must be positive")

    anchor = embedder.embed([host_anchor_text(doc)])[0].as_array()
    anchor = anchor / (anchor**2).sum() ** 0.5
    scored: list[tuple[ReferenceEntry, float]] = []
    for ref in refs:
        vec = embedder.embed([ref.raw_text])[0].as_array()
        cosine = float(anchor @ (vec / (vec**2).sum() ** 0.5))
        score = (cosine + 1.0) / 2.0
        if generator is not None:
            score = _generator_rescore(doc, ref, generator, fallback=score)
        scored.append((ref, score))

    scored.sort(key=lambda item: (-item[1], item[0].index))
    selected = tuple(ref for ref, _ in scored[: min(k, len(scored))])
    return RankedReferences(entries=tuple(scored), selected=selected)


_RESCORE_RE = re.compile(r"([01](?:\.\d+)?|0?\.\d+)")


def _generator_rescore(
    doc: Document, ref: ReferenceEntry, generator: TextGenerator, fallback: float
) -> float:
    try:
        reply = generator.generate(
            system_prompt(),
            render_prompt(
                "reference_relevance", host=host_anchor_text(doc), reference=ref.raw_text
            ),
            temperature=0.0,
        )
    except GeneratorError:
        return fallback
    match = _RESCORE_RE.search(reply)
    if match is None:
        return fallback
    return min(max(float(match.group(1)), 0.0), 1.0)


# -- graph construction -----------------------------------------------------

_MAX_LABEL_WORDS = 5
FALLBACK_RELATION = "cites"


def _clip_label(label: str) -> str:
    words = label.split()
    return " ".join(words[:_MAX_LABEL_WORDS]) if words else FALLBACK_RELATION


def build_relation_graph(
    doc: Document,
    ranked: RankedReferences,
    generator: TextGenerator,
    *,
    context_provider: Callable[[ReferenceEntry], str] | None = None,
    concurrency: int = 4,
) -> RefGraph:
    """Name the host-to-reference relationships and assemble the graph.

    Edges run host -> reference. A failing generator call falls back to
    the label "cites"; the node is always kept.
    """
    if not ranked.selected:
        raise RefGraphError("no selected references")

    context_of = context_provider or (lambda ref: ref.raw_text)

    def label_for(ref: ReferenceEntry) -> str:
        try:
            reply = generator.generate(
                system_prompt(),
                render_prompt(
                    "relation_label",
                    host=doc.label,
                    reference=ref.title or ref.raw_text,
                    context=context_of(ref),
                ),
                temperature=0.0,
            )
        except GeneratorError:
            return FALLBACK_RELATION
        return _clip_label(reply.strip())

    with ThreadPoolExecutor(max_workers=min(concurrency, len(ranked.selected))) as pool:
        labels = list(pool.map(label_for, ranked.selected))

    nodes = [Node(node_id="host", label=doc.label)]
    edges = []
    for ref, relation in zip(ranked.selected, labels):
        node_id = f"ref_{ref.index}"
        nodes.append(Node(node_id=node_id, label=ref.title or ref.raw_text))
        edges.append(Edge(src="host", dst=node_id, relation_label=relation))
    return RefGraph(nodes=tuple(nodes), edges=tuple(edges))


# -- Mermaid emission and the matching subset parser ------------------------

MERMAID_HEADER = "flowchart TD"

# Bijective escaping: & first on the way in, last on the way out.
_ESCAPES = [
    ("&", "&amp;"),
    ('"', "&quot;"),
    ("[", "&#91;"),
    ("]", "&#93;"),
    ("|", "&#124;"),
    ("\n", "&#10;"),
]


def _escape(label: str) -> str:
    for raw, entity in _ESCAPES:
        label = label.replace(raw, entity)
    return label


def _unescape(label: str) -> str:
    for raw, entity in reversed(_ESCAPES):
        label = label.replace(entity, raw)
    return label


def emit_mermaid(graph: RefGraph) -> MermaidDoc:
    """Deterministic flowchart source: header, nodes in node order, edges
    in edge order. Labels are escaped so the output stays line-parseable."""
    if not graph.nodes:
        raise RefGraphError("graph has no nodes")
    lines = [MERMAID_HEADER]
    for node in graph.nodes:
        lines.append(f'    {node.node_id}["{_escape(node.label)}"]')
    for edge in graph.edges:
        if edge.relation_label:
            lines.append(f"    {edge.src} -->|{_escape(edge.relation_label)}| {edge.dst}")
        else:
            lines.append(f"    {edge.src} --> {edge.dst}")
    return MermaidDoc(source="\n".join(lines) + "\n")


class MermaidParseError(Exception):
    """Source does not conform to the emitted flowchart subset."""


_NODE_LINE_RE = re.compile(r"^\s+([A-Za-z0-9_]+)\["
                           r'"([^"\[\]]*)"\]$')
_EDGE_LINE_RE = re.compile(
    r"^\s+([A-Za-z0-9_]+) -->(?:\|([^|]*)\|)? ([A-Za-z0-9_]+)$"
)


def parse_mermaid(source: str) -> RefGraph:
    """Parse the emitted subset back into a graph; used by round-trip
    tests and as the grammar check."""
    lines = source.splitlines()
    if not lines or lines[0].strip() != MERMAID_HEADER:
        raise MermaidParseError("missing flowchart header")
    nodes: list[Node] = []
    edges: list[Edge] = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        node_match = _NODE_LINE_RE.match(line)
        if node_match:
            nodes.append(
                Node(node_id=node_match.group(1), label=_unescape(node_match.group(2)))
            )
            continue
        edge_match = _EDGE_LINE_RE.match(line)
        if edge_match:
            edges.append(
                Edge(
                    src=edge_match.group(1),
                    dst=edge_match.group(3),
                    relation_label=_unescape(edge_match.group(2) or ""),
                )
            )
            continue
        raise MermaidParseError(f"line {line_no} is not node, edge, or whitespace: {line!r}")
    try:
        return RefGraph(nodes=tuple(nodes), edges=tuple(edges))
    except RefGraphError as exc:
        raise MermaidParseError(str(exc)) from exc


def validate_mermaid(doc: MermaidDoc) -> None:
    """Raise MermaidParseError unless the source parses under the subset
    grammar into a structurally valid graph."""
    parse_mermaid(doc.source)
