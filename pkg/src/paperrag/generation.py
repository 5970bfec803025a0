"""Text-generator handles: the HTTP chat client and the scripted mock.

Every generative step in the engine (query variants, evidence summaries,
answers, completeness checks, relation labels, RAFT questions) goes through
the same synchronous request/reply contract, so pointing the handle at a
fine-tuned model id is a configuration change, not a code change.

The scripted generator replays fixture rules (regex over the user prompt
-> canned reply) with optional artificial latency and a peak-concurrency
counter, which is what keeps end-to-end tests fully offline.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence

import requests
import yaml


class GeneratorError(Exception):
    """Generation failed."""


class GeneratorTransportError(GeneratorError):
    """Provider unreachable after retries; safe to retry later."""


class TextGenerator(Protocol):
    def generate(
        self, system: str, user: str, *, max_tokens: int = 500, temperature: float = 0.0
    ) -> str: ...


# -- prompt templates ------------------------------------------------------


@lru_cache(maxsize=1)
def _prompt_file() -> dict:
    raw = resources.files("paperrag").joinpath("prompts.yaml").read_text(encoding="utf-8")
    return yaml.safe_load(raw)


def prompt_template(name: str) -> str:
    templates = _prompt_file()["templates"]
    if name not in templates:
        raise KeyError(f"unknown prompt template: {name}")
    return templates[name]


_PLACEHOLDER_RE = re.compile(r"\{(\w+)\}")


def render_prompt(name: str, **values: object) -> str:
    """Fill {placeholders}; values may safely contain braces themselves."""
    template = prompt_template(name)
    return _PLACEHOLDER_RE.sub(lambda m: str(values.get(m.group(1), m.group(0))), template)


def system_prompt() -> str:
    return _prompt_file()["system"]


# -- scripted generator ----------------------------------------------------


@dataclass
class ScriptedRule:
    """First rule whose pattern matches the user prompt wins. ``reply``
    supports backreferences into the match (\\1, \\g<name>); ``error``
    makes the call fail instead."""

    pattern: str
    reply: str = ""
    error: str | None = None
    latency_s: float = 0.0

    def compiled(self) -> re.Pattern:
        return re.compile(self.pattern, re.DOTALL)


class ScriptedGenerator:
    def __init__(self, rules: Sequence[ScriptedRule]) -> None:
        self.rules = [(rule, rule.compiled()) for rule in rules]
        self.calls = 0
        self.peak_concurrency = 0
        self._active = 0
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedGenerator":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        raw = yaml.safe_load(text) if path.suffix in (".yaml", ".yml") else json.loads(text)
        rules = [
            ScriptedRule(
                pattern=item["pattern"],
                reply=item.get("reply", ""),
                error=item.get("error"),
                latency_s=float(item.get("latency_s", 0.0)),
            )
            for item in raw
        ]
        return cls(rules)

    def generate(
        self, system: str, user: str, *, max_tokens: int = 500, temperature: float = 0.0
    ) -> str:
        with self._lock:
            self.calls += 1
            self._active += 1
            self.peak_concurrency = max(self.peak_concurrency, self._active)
        try:
            for rule, pattern in self.rules:
                match = pattern.search(user)
                if match is None:
                    continue
                if rule.latency_s > 0:
                    time.sleep(rule.latency_s)
                if rule.error is not None:
                    raise GeneratorError(rule.error)
                return match.expand(rule.reply)
            raise GeneratorError(f"no scripted reply matches prompt: {user[:80]!r}")
        finally:
            with self._lock:
                self._active -= 1


# -- HTTP generator --------------------------------------------------------


@dataclass
class HttpGenerator:
    """Chat-style generation over HTTP.

    Request: {"model", "messages": [system, user], "max_tokens",
    "temperature"}; reply: {"text": "..."}. The API key comes from the
    environment and is scrubbed from every error message.
    """

    base_url: str
    model: str
    timeout: float = 60.0
    max_retries: int = 3
    api_key_env: str = "PROVIDER_API_KEY"
    _session: requests.Session = field(default_factory=requests.Session, repr=False)

    def generate(
        self, system: str, user: str, *, max_tokens: int = 500, temperature: float = 0.0
    ) -> str:
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "max_tokens": max_tokens,
            "temperature": temperature,
        }
        headers = {}
        api_key = os.environ.get(self.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        last_error = "no attempt made"
        for attempt in range(1, self.max_retries + 1):
            try:
                response = self._session.post(
                    f"{self.base_url.rstrip('/')}/generate",
                    json=payload,
                    headers=headers,
                    timeout=self.timeout,
                )
                response.raise_for_status()
                return str(response.json()["text"])
            except (requests.RequestException, KeyError, ValueError) as exc:
                last_error = _scrub(str(exc), api_key)
                if attempt < self.max_retries:
                    time.sleep(min(0.1 * 2**attempt, 2.0))
        raise GeneratorTransportError(
            f"generation failed after {self.max_retries} attempts: {last_error}"
        )


def _scrub(message: str, secret: str) -> str:
    if secret:
        message = message.replace(secret, "***")
    return message
