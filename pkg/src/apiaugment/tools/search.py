"""BM25 retrieval over (page, section) units of a KILT-style dump."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_TERM_RE = re.compile(r"\w+")

INDEX_FORMAT = "apiaugment.bm25"
INDEX_VERSION = 1


def terms(text: str) -> list[str]:
    return _TERM_RE.findall(text.lower())


@dataclass(frozen=True)
class Section:
    title: str
    heading: str
    text: str

    def snippet(self, limit: int = 320) -> str:
        parts = [self.title]
        if self.heading and self.heading != self.title:
            parts.append(self.heading)
        parts.append(" ".join(self.text.split()))
        return truncate(" > ".join(parts), limit)


def truncate(text: str, limit: int) -> str:
    """Cut to at most ``limit`` characters, backing off to the last space."""
    if len(text) <= limit:
        return text
    cut = text.rfind(" ", 0, limit + 1)
    return text[:cut if cut > 0 else limit].rstrip()


class SearchIndex:
    """Immutable inverted index; build with :meth:`build` or :meth:`load`."""

    def __init__(self, sections: Sequence[Section], postings: dict[str, list[tuple[int, int]]],
                 lengths: Sequence[int], k1: float = 1.2, b: float = 0.75):
        self.sections = tuple(sections)
        self.postings = postings
        self.lengths = np.asarray(lengths, dtype=np.float64)
        self.k1 = k1
        self.b = b
        self.n_docs = len(self.sections)
        self.avg_len = float(self.lengths.mean()) if self.n_docs else 0.0

    @classmethod
    def build(cls, sections: Iterable[Section], k1: float = 1.2, b: float = 0.75) -> "SearchIndex":
        sections = list(sections)
        postings: dict[str, list[tuple[int, int]]] = {}
        lengths = []
        for idx, sec in enumerate(sections):
            toks = terms(f"{sec.title} {sec.heading} {sec.text}")
            lengths.append(len(toks))
            for term, tf in sorted(Counter(toks).items()):
                postings.setdefault(term, []).append((idx, tf))
        return cls(sections, dict(sorted(postings.items())), lengths, k1, b)

    @classmethod
    def from_kilt(cls, path: str | Path, **kw) -> "SearchIndex":
        """Pages as JSONL ``{id, title, sections: [{heading, text}]}``."""
        sections = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                page = json.loads(line)
                for s in page["sections"]:
                    sections.append(Section(page["title"], s.get("heading", ""), s["text"]))
        return cls.build(sections, **kw)

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1 + (self.n_docs - df + 0.5) / (df + 0.5))

    def scores(self, query: str | Sequence[str]) -> np.ndarray:
        """BM25 score of every section."""
        q = terms(query) if isinstance(query, str) else list(query)
        out = np.zeros(self.n_docs)
        if not self.n_docs:
            return out
        norm = self.k1 * (1 - self.b + self.b * self.lengths / self.avg_len)
        for term in q:
            plist = self.postings.get(term)
            if not plist:
                continue
            idx = np.fromiter((p[0] for p in plist), dtype=np.int64, count=len(plist))
            tf = np.fromiter((p[1] for p in plist), dtype=np.float64, count=len(plist))
            out[idx] += self.idf(term) * tf * (self.k1 + 1) / (tf + norm[idx])
        return out

    def save(self, path: str | Path) -> None:
        data = {
            "format": INDEX_FORMAT, "version": INDEX_VERSION, "k1": self.k1, "b": self.b,
            "sections": [[s.title, s.heading, s.text] for s in self.sections],
            "lengths": [int(x) for x in self.lengths],
            "postings": self.postings,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(data, fh, ensure_ascii=False, sort_keys=True, separators=(",", ":"))

    @classmethod
    def load(cls, path: str | Path) -> "SearchIndex":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if data.get("format") != INDEX_FORMAT or data.get("version") != INDEX_VERSION:
            raise ValueError(f"{path}: not a version-{INDEX_VERSION} BM25 index")
        postings = {t: [tuple(p) for p in pl] for t, pl in data["postings"].items()}
        return cls([Section(*s) for s in data["sections"]], postings, data["lengths"],
                   data["k1"], data["b"])


def bm25_score(index: SearchIndex, query_terms: Sequence[str], section: int) -> float:
    """Score of one section, term by term."""
    tf_all = Counter(terms(" ".join(
        (index.sections[section].title, index.sections[section].heading, index.sections[section].text))))
    length = index.lengths[section]
    score = 0.0
    for term in query_terms:
        tf = tf_all.get(term, 0)
        if tf == 0:
            continue
        denom = tf + index.k1 * (1 - index.b + index.b * length / index.avg_len)
        score += index.idf(term) * tf * (index.k1 + 1) / denom
    return score


def wiki_search(index: SearchIndex, query: str, snippet_len: int = 320) -> str | None:
    """Snippet of the best-scoring section; ``None`` when no query term is indexed."""
    q = terms(query)
    if not any(t in index.postings for t in q):
        return None
    scores = index.scores(q)
    return index.sections[int(np.argmax(scores))].snippet(snippet_len)
