"""Clients for the external QA and translation services.

Wire format: ``POST {"input": text[, "source": lang]}`` answered by
``{"output": text}``. Every failure mode collapses to ``None``.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Protocol

import httpx

from .langid import LanguageIdentifier

log = logging.getLogger(__name__)

MT_CONFIDENCE = 0.8


def one_line(text: str) -> str:
    return " ".join(text.split())


class ServiceClient(Protocol):
    def ask(self, text: str, **extra: str) -> str | None: ...


class HttpServiceClient:
    def __init__(self, endpoint: str, timeout: float = 10.0,
                 transport: httpx.BaseTransport | None = None, max_connections: int = 8):
        self.endpoint = endpoint
        self.failures = 0
        self._http = httpx.Client(
            timeout=timeout, transport=transport,
            limits=httpx.Limits(max_connections=max_connections))

    def ask(self, text: str, **extra: str) -> str | None:
        try:
            resp = self._http.post(self.endpoint, json={"input": text, **extra})
            resp.raise_for_status()
            out = resp.json().get("output")
        except (httpx.HTTPError, ValueError, AttributeError) as exc:
            self.failures += 1
            log.warning("call to %s failed: %s", self.endpoint, exc)
            return None
        if not isinstance(out, str) or not out.strip():
            return None
        return one_line(out)

    def close(self) -> None:
        self._http.close()


class MockServiceClient:
    """Answers from a fixed ``input -> output`` table."""

    def __init__(self, fixtures: dict[str, str]):
        self.fixtures = dict(fixtures)
        self.failures = 0

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "MockServiceClient":
        table = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    table[rec["input"]] = rec["output"]
        return cls(table)

    def ask(self, text: str, **extra: str) -> str | None:
        out = self.fixtures.get(text)
        return None if out is None else one_line(out)


def qa_ask(client: ServiceClient, question: str) -> str | None:
    return client.ask(question)


def mt_translate(client: ServiceClient, langid: LanguageIdentifier, text: str,
                 min_confidence: float = MT_CONFIDENCE) -> str | None:
    """Translate into English; English input comes back unchanged."""
    if not text.strip():
        return None
    guess = langid.detect(text)
    if guess.language == "en":
        return one_line(text)
    if guess.confidence <= min_confidence:
        return None
    return client.ask(text, source=guess.language)
