"""Fetching and text extraction for batch import.

The engine proper only ever sees page texts. This adapter turns fetched
bytes into pages and is allowed to be lossy: figures and layout are out of
scope. Plain text splits on form feeds; PDF extraction is delegated to
pypdf when it is installed.
"""

from __future__ import annotations

import requests

from .corpus import PAGE_SEPARATOR


class ExtractionError(Exception):
    """Content that cannot be turned into page texts."""


DEFAULT_TIMEOUT = 30.0


def fetch_url(url: str, timeout: float = DEFAULT_TIMEOUT) -> tuple[bytes, str]:
    """GET a document, returning (body, content-type)."""
    response = requests.get(url, timeout=timeout)
    response.raise_for_status()
    content_type = response.headers.get("content-type", "").split(";")[0].strip()
    return response.content, content_type


def extract_pages(data: bytes, content_type: str) -> list[str]:
    """Convert fetched bytes into a list of page texts."""
    kind = (content_type or "text/plain").lower()
    if kind.startswith("text/") or kind in ("application/json", ""):
        text = data.decode("utf-8", errors="replace")
        if not text.strip():
            raise ExtractionError("empty document")
        return text.split(PAGE_SEPARATOR)
    if kind == "application/pdf":
        return _extract_pdf_pages(data)
    raise ExtractionError(f"unsupported content type: {content_type}")


def _extract_pdf_pages(data: bytes) -> list[str]:
    try:
        from io import BytesIO

        from pypdf import PdfReader
    except ImportError as exc:
        raise ExtractionError("pdf extraction requires the pypdf package") from exc
    reader = PdfReader(BytesIO(data))
    pages = [page.extract_text() or "" for page in reader.pages]
    if not any(p.strip() for p in pages):
        raise ExtractionError("empty document")
    return pages
