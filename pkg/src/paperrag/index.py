"""Exact top-k cosine search over pluggable vector-store backends.

At the scale this engine targets (a few hundred papers, thousands to tens
of thousands of chunks) an exact scan is fast and keeps recall noise out
of the evaluation, so both shipped backends are exact; they differ only in
where the vectors live. Stored vectors are float32 -- the on-disk record
width -- so a save/load round trip is bit-exact by construction. Scores
are computed in float64.
"""

from __future__ import annotations

import struct
import threading
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import Chunk
from .embedding import EmbeddingVector

MAGIC = b"RGDX"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIQI")  # magic, version, dim, count, crc32 of payload


class VectorIndexError(Exception):
    """Invalid index operation or corrupt index file."""


@dataclass(frozen=True)
class SearchHit:
    chunk_id: str
    score: float
    rank: int  # 1-based


@dataclass(frozen=True)
class IndexBackendDescriptor:
    backend_name: str
    supports_persistence: bool


class ExactIndexBase:
    """Shared exact-scan machinery; subclasses own vector storage."""

    backend_name = ""
    supports_persistence = False

    def __init__(self, dim: int) -> None:
        if dim <= 0:
            raise VectorIndexError("dim must be positive")
        self.dim = dim
        self._ids: list[str] = []
        self._row_of: dict[str, int] = {}
        self._matrix = np.empty((0, dim), dtype=np.float32)
        self._lock = threading.Lock()

    @property
    def descriptor(self) -> IndexBackendDescriptor:
        return IndexBackendDescriptor(self.backend_name, self.supports_persistence)

    def __len__(self) -> int:
        return len(self._ids)

    def upsert(self, items: Sequence[tuple[str, EmbeddingVector]]) -> int:
        """Insert or replace entries; rejects bad input with the index
        unchanged. Returns the number of entries written."""
        seen: set[str] = set()
        for entry_id, vector in items:
            if vector.dim != self.dim:
                raise VectorIndexError(
                    f"vector dim {vector.dim} does not match index dim {self.dim}"
                )
            if vector.norm <= 0.0:
                raise VectorIndexError(f"zero-norm vector for {entry_id}")
            if entry_id in seen:
                raise VectorIndexError(f"duplicate id in upsert batch: {entry_id}")
            seen.add(entry_id)
        if not items:
            return 0

        with self._lock:
            matrix = self._matrix
            appended: list[np.ndarray] = []
            replaced: list[tuple[int, np.ndarray]] = []
            for entry_id, vector in items:
                row = np.asarray(vector.values, dtype=np.float32)
                existing = self._row_of.get(entry_id)
                if existing is None:
                    self._row_of[entry_id] = len(self._ids)
                    self._ids.append(entry_id)
                    appended.append(row)
                else:
                    replaced.append((existing, row))
            if replaced:
                matrix = matrix.copy()
                for pos, row in replaced:
                    matrix[pos] = row
            if appended:
                block = np.stack(appended)
                matrix = np.vstack([matrix, block]) if len(matrix) else block
            self._matrix = matrix
            self._persist()
        return len(items)

    def _persist(self) -> None:  # overridden by persistent backends
        pass

    def search_topk(self, query: EmbeddingVector, k: int) -> list[SearchHit]:
        """Exact cosine top-k; ties break by ascending chunk id."""
        if k <= 0:
            raise VectorIndexError("k must be positive")
        if not self._ids:
            return []
        if query.dim != self.dim:
            raise VectorIndexError(
                f"query dim {query.dim} does not match index dim {self.dim}"
            )
        matrix = self._matrix.astype(np.float64)
        q = query.as_array()
        row_norms = np.linalg.norm(matrix, axis=1)
        scores = (matrix @ q) / (row_norms * np.linalg.norm(q))
        order = sorted(range(len(self._ids)), key=lambda i: (-scores[i], self._ids[i]))
        return [
            SearchHit(chunk_id=self._ids[i], score=float(scores[i]), rank=rank)
            for rank, i in enumerate(order[:k], start=1)
        ]

    def entries(self) -> list[tuple[str, np.ndarray]]:
        """Stored (id, float32 vector) pairs, in insertion order."""
        return [(entry_id, self._matrix[i].copy()) for i, entry_id in enumerate(self._ids)]


class InMemoryExactIndex(ExactIndexBase):
    backend_name = "in-memory-exact"
    supports_persistence = False


class FileBackedExactIndex(ExactIndexBase):
    """Exact scan whose vectors persist to the RGDX file on every upsert."""

    backend_name = "file-backed-exact"
    supports_persistence = True

    def __init__(self, dim: int, path: str | Path) -> None:
        super().__init__(dim)
        self.path = Path(path)
        if self.path.exists():
            loaded = load_index(self.path, backend="in-memory-exact")
            if loaded.dim != dim:
                raise VectorIndexError(
                    f"index file dim {loaded.dim} does not match requested dim {dim}"
                )
            self._ids = loaded._ids
            self._row_of = loaded._row_of
            self._matrix = loaded._matrix

    def _persist(self) -> None:
        _write_index_file(self, self.path)


BACKENDS: dict[str, Callable[..., ExactIndexBase]] = {
    InMemoryExactIndex.backend_name: InMemoryExactIndex,
    FileBackedExactIndex.backend_name: FileBackedExactIndex,
}


def create_index(backend_name: str, dim: int, **kwargs) -> ExactIndexBase:
    try:
        factory = BACKENDS[backend_name]
    except KeyError:
        raise VectorIndexError(f"unregistered backend: {backend_name}") from None
    return factory(dim, **kwargs)


def upsert_chunks(
    index: ExactIndexBase, pairs: Sequence[tuple[Chunk, EmbeddingVector]]
) -> int:
    return index.upsert([(chunk.id, vector) for chunk, vector in pairs])


def _encode_payload(index: ExactIndexBase) -> bytes:
    parts = []
    for entry_id, vector in index.entries():
        raw_id = entry_id.encode("utf-8")
        parts.append(struct.pack("<I", len(raw_id)))
        parts.append(raw_id)
        parts.append(vector.astype("<f4").tobytes())
    return b"".join(parts)


def _write_index_file(index: ExactIndexBase, path: Path) -> None:
    payload = _encode_payload(index)
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, index.dim, len(index), zlib.crc32(payload))
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(header + payload)
    tmp.replace(path)


def save_index(index: ExactIndexBase, path: str | Path) -> None:
    """Write the RGDX binary file: header then fixed-width records."""
    if len(index) == 0:
        raise VectorIndexError("refusing to save an empty index")
    _write_index_file(index, Path(path))


def load_index(path: str | Path, backend: str = "in-memory-exact", **kwargs) -> ExactIndexBase:
    """Load an RGDX file; checksum failure leaves no partial index."""
    path = Path(path)
    if not path.exists():
        raise VectorIndexError("index file not found")
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise VectorIndexError("index file truncated")
    magic, version, dim, count, checksum = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise VectorIndexError("not an index file (bad magic)")
    if version != FORMAT_VERSION:
        raise VectorIndexError(f"unsupported index version: {version}")
    payload = blob[_HEADER.size :]
    if zlib.crc32(payload) != checksum:
        raise VectorIndexError("index file failed checksum")

    items: list[tuple[str, EmbeddingVector]] = []
    offset = 0
    row_bytes = dim * 4
    for _ in range(count):
        (id_len,) = struct.unpack_from("<I", payload, offset)
        offset += 4
        entry_id = payload[offset : offset + id_len].decode("utf-8")
        offset += id_len
        row = np.frombuffer(payload, dtype="<f4", count=dim, offset=offset)
        offset += row_bytes
        items.append(
            (entry_id, EmbeddingVector(dim=dim, values=tuple(float(v) for v in row)))
        )
    if offset != len(payload):
        raise VectorIndexError("index file has trailing bytes")

    index = create_index(backend, dim, **kwargs)
    index.upsert(items)
    return index
