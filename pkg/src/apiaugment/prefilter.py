"""Cheap per-tool document gates applied before sampling, and the MT look-ahead filter."""

from __future__ import annotations

import bisect
import datetime as dt
import hashlib
import math
import re
from dataclasses import dataclass

from .core import ApiCall, Document
from .tokenizer import split_pieces
from .tools.calendar import date_from_url
from .tools.langid import LanguageIdentifier, TrigramLanguageIdentifier

NUMBER_RE = re.compile(r"(?<![\w.])[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?(?![\w])")
MARKER_RE = re.compile(r"(?:=|\bequals\b|\bequal to\b|\btotal of\b|\baverage of\b)\s*[-+]?\d", re.IGNORECASE)

CALC_WINDOW = 100
CALC_SUBSAMPLE = 0.01
MT_CHUNK = 10
MT_CONFIDENCE = 0.8


@dataclass(frozen=True)
class PrefilterResult:
    keep: bool
    reason: str | None = None
    date: dt.date | None = None
    spans: tuple[tuple[int, int], ...] = ()


def unit_hash(*parts: object) -> float:
    """Stable pseudo-random number in [0, 1) from the given parts."""
    digest = hashlib.sha256("\x1f".join(map(str, parts)).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def _piece_starts(text: str) -> list[int]:
    starts, pos = [], 0
    for p in split_pieces(text):
        if p.strip():
            starts.append(pos + (len(p) - len(p.lstrip())))
        pos += len(p)
    return starts


def find_numbers(text: str) -> list[tuple[int, float]]:
    """``(token index, value)`` for every decimal literal in ``text``."""
    starts = _piece_starts(text)
    out = []
    for m in NUMBER_RE.finditer(text):
        tok = bisect.bisect_right(starts, m.start()) - 1
        out.append((max(tok, 0), float(m.group().replace(",", ""))))
    return out


def _combos(a: float, b: float):
    yield a + b
    yield a - b
    yield a * b
    if b != 0:
        yield a / b


def has_arithmetic_triple(numbers: list[tuple[int, float]], window: int = CALC_WINDOW) -> bool:
    """Three numbers inside ``window`` tokens where one is ``a op b`` of the other two."""
    n = len(numbers)
    for i in range(n):
        for j in range(n):
            if j == i or abs(numbers[j][0] - numbers[i][0]) >= window:
                continue
            a, b = numbers[i][1], numbers[j][1]
            results = list(_combos(a, b))
            for k in range(n):
                if k in (i, j):
                    continue
                idx = (numbers[i][0], numbers[j][0], numbers[k][0])
                if max(idx) - min(idx) >= window:
                    continue
                c = numbers[k][1]
                if any(math.isclose(r, c, rel_tol=1e-6) for r in results):
                    return True
    return False


def prefilter_calculator(doc: Document, seed: int = 0, subsample: float = CALC_SUBSAMPLE) -> PrefilterResult:
    numbers = find_numbers(doc.text)
    if len(numbers) >= 3 and has_arithmetic_triple(numbers):
        return PrefilterResult(True, "arithmetic")
    if MARKER_RE.search(doc.text):
        return PrefilterResult(True, "marker")
    if len(numbers) >= 3:
        keep = unit_hash(seed, "calculator", doc.id) < subsample
        return PrefilterResult(keep, "numbers")
    return PrefilterResult(False)


def prefilter_calendar(doc: Document) -> PrefilterResult:
    d = date_from_url(doc.url)
    return PrefilterResult(d is not None, "url-date" if d else None, date=d)


def _is_symbolic(chunk: str) -> bool:
    return not any(c.isalpha() for c in chunk)


def text_chunks(text: str, size: int = MT_CHUNK) -> list[tuple[int, int]]:
    """Character spans of consecutive groups of ``size`` non-blank pieces."""
    spans, pos = [], 0
    bounds = []
    for p in split_pieces(text):
        if p.strip():
            start = pos + (len(p) - len(p.lstrip()))
            bounds.append((start, pos + len(p)))
        pos += len(p)
    for i in range(0, len(bounds), size):
        group = bounds[i:i + size]
        spans.append((group[0][0], group[-1][1]))
    return spans


def prefilter_mt(doc: Document, langid: LanguageIdentifier | None = None,
                 size: int = MT_CHUNK, min_confidence: float = MT_CONFIDENCE) -> PrefilterResult:
    """Keep documents holding a confidently non-English chunk with English text on both sides."""
    langid = langid or TrigramLanguageIdentifier()
    chunks = [(s, e) for s, e in text_chunks(doc.text, size) if not _is_symbolic(doc.text[s:e])]
    labels = [langid.detect(doc.text[s:e]) for s, e in chunks]
    english = [g.language == "en" for g in labels]
    spans = []
    for j in range(1, len(chunks) - 1):
        g = labels[j]
        # English somewhere before and somewhere after, not necessarily adjacent
        if (g.language != "en" and g.confidence > min_confidence
                and any(english[:j]) and any(english[j + 1:])):
            spans.append(chunks[j])
    return PrefilterResult(bool(spans), "foreign-chunk" if spans else None, spans=tuple(spans))


def prefilter(doc: Document, tool: str, seed: int = 0, langid: LanguageIdentifier | None = None,
              calc_subsample: float = CALC_SUBSAMPLE) -> PrefilterResult:
    """Dispatch to the tool's gate; tools without one keep everything."""
    if tool == "Calculator":
        return prefilter_calculator(doc, seed, calc_subsample)
    if tool == "Calendar":
        return prefilter_calendar(doc)
    if tool == "MT":
        return prefilter_mt(doc, langid)
    return PrefilterResult(True)


def mt_postfilter(text: str, call: ApiCall, char_pos: int) -> bool:
    """Drop translation calls whose input only shows up after the call site."""
    before, after = text[:char_pos], text[char_pos:]
    return call.input in before or call.input not in after
