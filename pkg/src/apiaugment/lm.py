"""Language-model contract, the reference n-gram model and a scripted test double."""

from __future__ import annotations

import json
import math
import re
from abc import ABC, abstractmethod
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path

import numpy as np

from .core import API_START, TokenSequence
from .tokenizer import Tokenizer

FORMAT = "apiaugment.ngram"
FORMAT_VERSION = 1

Prefix = str | Sequence[int]


class LanguageModel(ABC):
    """Anything that yields a next-token distribution over a tokenizer's vocabulary."""

    tokenizer: Tokenizer

    @property
    def tokenizer_id(self) -> str:
        return self.tokenizer.tokenizer_id

    @property
    def api_token(self) -> int:
        # first token of the <API> surface form
        return self.tokenizer.encode(API_START)[0]

    @abstractmethod
    def next_distribution(self, context: Sequence[int]) -> np.ndarray:
        """Probability vector over the vocabulary for the token after ``context``."""

    def prob(self, context: Sequence[int], token: int) -> float:
        return float(self.next_distribution(context)[token])

    def ids(self, prefix: Prefix) -> list[int]:
        if isinstance(prefix, str):
            return self.tokenizer.encode(prefix)
        return list(prefix)


class ReferenceNgramLm(LanguageModel):
    """Additively smoothed n-gram model; no backoff, so every estimate is a plain count ratio.

    ``p(w | h) = (c(h, w) + alpha) / (c(h) + alpha * |V|)`` where ``h`` is the
    last ``order - 1`` tokens of the context, left-padded with the EOS token.
    """

    def __init__(self, tokenizer: Tokenizer, order: int = 3, alpha: float = 0.1):
        if order < 1:
            raise ValueError("order must be >= 1")
        if alpha <= 0:
            raise ValueError("alpha must be > 0")
        self.tokenizer = tokenizer
        self.order = order
        self.alpha = alpha
        self.counts: dict[tuple[int, ...], dict[int, int]] = defaultdict(dict)
        self.totals: dict[tuple[int, ...], int] = defaultdict(int)

    def history(self, context: Sequence[int]) -> tuple[int, ...]:
        h = self.order - 1
        if h == 0:
            return ()
        ctx = tuple(context[-h:])
        if len(ctx) < h:
            ctx = (self.tokenizer.eos_id,) * (h - len(ctx)) + ctx
        return ctx

    def train(self, texts: Iterable[str]) -> "ReferenceNgramLm":
        eos = self.tokenizer.eos_id
        for text in texts:
            ids = [eos] * (self.order - 1) + self.tokenizer.encode(text) + [eos]
            for j in range(self.order - 1, len(ids)):
                h = tuple(ids[j - self.order + 1:j])
                row = self.counts[h]
                row[ids[j]] = row.get(ids[j], 0) + 1
                self.totals[h] += 1
        return self

    def next_distribution(self, context: Sequence[int]) -> np.ndarray:
        h = self.history(context)
        v = self.tokenizer.vocab_size
        dist = np.full(v, self.alpha, dtype=np.float64)
        row = self.counts.get(h)
        if row:
            idx = np.fromiter(row.keys(), dtype=np.int64, count=len(row))
            dist[idx] += np.fromiter(row.values(), dtype=np.float64, count=len(row))
        return dist / (self.totals.get(h, 0) + self.alpha * v)

    def prob(self, context: Sequence[int], token: int) -> float:
        h = self.history(context)
        row = self.counts.get(h, {})
        return (row.get(token, 0) + self.alpha) / (
            self.totals.get(h, 0) + self.alpha * self.tokenizer.vocab_size)

    def save(self, path: str | Path) -> None:
        """Write a JSONL dump: a header line, then one line per history."""
        with open(path, "w", encoding="utf-8") as fh:
            header = {"format": FORMAT, "version": FORMAT_VERSION, "order": self.order,
                      "alpha": self.alpha, "tokenizer": self.tokenizer.to_dict()}
            fh.write(json.dumps(header, ensure_ascii=False) + "\n")
            for h in sorted(self.counts):
                row = self.counts[h]
                fh.write(json.dumps({"h": list(h), "next": sorted(row.items())}) + "\n")

    @classmethod
    def load(cls, path: str | Path, expect_tokenizer_id: str | None = None) -> "ReferenceNgramLm":
        with open(path, encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            if header.get("format") != FORMAT or header.get("version") != FORMAT_VERSION:
                raise ValueError(f"{path}: not a version-{FORMAT_VERSION} n-gram dump")
            tok = Tokenizer.from_dict(header["tokenizer"])
            if expect_tokenizer_id is not None and tok.tokenizer_id != expect_tokenizer_id:
                raise ValueError(f"{path}: tokenizer {tok.tokenizer_id} != {expect_tokenizer_id}")
            lm = cls(tok, order=header["order"], alpha=header["alpha"])
            for line in fh:
                rec = json.loads(line)
                h = tuple(rec["h"])
                row = {int(t): int(c) for t, c in rec["next"]}
                lm.counts[h] = row
                lm.totals[h] = sum(row.values())
        return lm


Rule = tuple[str | re.Pattern, Mapping[str, float]]


class ScriptedLm(LanguageModel):
    """Deterministic test double.

    ``rules`` is an ordered list of ``(pattern, {piece: prob})``. A string
    pattern matches when the decoded context ends with it, a compiled regex
    when ``pattern.search(context_text)`` succeeds; the first match wins.
    Mass left over by a rule is spread evenly over the other pieces. No
    match gives the uniform distribution.
    """

    def __init__(self, tokenizer: Tokenizer, rules: Sequence[Rule] = ()):
        self.tokenizer = tokenizer
        self.rules: list[tuple[str | re.Pattern, np.ndarray]] = []
        for pattern, probs in rules:
            self.rules.append((pattern, self._vector(probs)))

    def _vector(self, probs: Mapping[str, float]) -> np.ndarray:
        v = self.tokenizer.vocab_size
        dist = np.zeros(v)
        for piece, p in probs.items():
            dist[self.tokenizer.token_id(piece)] = p
        total = dist.sum()
        if total > 1 + 1e-12 or (dist < 0).any():
            raise ValueError(f"scripted probabilities must be >= 0 and sum to <= 1: {probs}")
        rest = 1.0 - total
        free = dist == 0
        if rest > 1e-15 and free.any():
            # listed probabilities stay exact; only the leftover is spread
            dist[free] = rest / free.sum()
            return dist
        return dist / dist.sum()

    @classmethod
    def chain(cls, tokenizer: Tokenizer, prompt: str, continuation: str,
              rules: Sequence[Rule] = ()) -> "ScriptedLm":
        """Greedily emit ``continuation`` after ``prompt``; extra rules take precedence."""
        ids = tokenizer.encode(continuation)
        chained: list[Rule] = []
        for k in range(len(ids) - 1, -1, -1):
            chained.append((prompt + tokenizer.decode(ids[:k]), {tokenizer.piece(ids[k]): 1.0}))
        return cls(tokenizer, [*rules, *chained])

    def _match(self, text: str, pattern: str | re.Pattern) -> bool:
        if isinstance(pattern, str):
            return text.endswith(pattern)
        return pattern.search(text) is not None

    def next_distribution(self, context: Sequence[int]) -> np.ndarray:
        text = self.tokenizer.decode(context)
        for pattern, dist in self.rules:
            if self._match(text, pattern):
                return dist.copy()
        v = self.tokenizer.vocab_size
        return np.full(v, 1.0 / v)

    @classmethod
    def from_json(cls, tokenizer: Tokenizer, path: str | Path) -> "ScriptedLm":
        """Rules file: ``[{"suffix": ..., "probs": {...}} | {"regex": ..., "probs": {...}}]``."""
        with open(path, encoding="utf-8") as fh:
            spec = json.load(fh)
        rules: list[Rule] = []
        for r in spec:
            pattern = re.compile(r["regex"]) if "regex" in r else r["suffix"]
            rules.append((pattern, r["probs"]))
        return cls(tokenizer, rules)


def api_token_prob(lm: LanguageModel, prefix: Prefix) -> float:
    """Probability that the next token opens an API call."""
    return lm.prob(lm.ids(prefix), lm.api_token)


def score_suffix(lm: LanguageModel, prefix: Prefix, suffix: TokenSequence | Sequence[int]) -> list[float]:
    tokens = suffix.tokens if isinstance(suffix, TokenSequence) else tuple(suffix)
    if not tokens:
        raise ValueError("suffix must be non-empty")
    ctx = lm.ids(prefix)
    out = []
    for t in tokens:
        p = lm.prob(ctx, t)
        out.append(math.log(p) if p > 0 else -math.inf)
        ctx.append(t)
    return out


def _draw(dist: np.ndarray, temperature: float, rng: np.random.Generator) -> int:
    if temperature <= 0:
        return int(np.argmax(dist))
    if temperature != 1.0:
        with np.errstate(divide="ignore"):
            logits = np.log(dist) / temperature
        logits -= logits.max()
        dist = np.exp(logits)
        dist /= dist.sum()
    return int(rng.choice(len(dist), p=dist))


def sample_until(lm: LanguageModel, prefix: Prefix, end_token: int | str, m: int,
                 max_len: int = 64, temperature: float = 1.0, seed: int = 0) -> list[TokenSequence]:
    """Draw ``m`` continuations; only those that reach ``end_token`` within ``max_len`` survive."""
    if m < 1 or max_len < 1:
        raise ValueError("m and max_len must be >= 1")
    if isinstance(end_token, str):
        end_token = lm.tokenizer.token_id(end_token)
    rng = np.random.default_rng(seed)
    base = lm.ids(prefix)
    out = []
    for _ in range(m):
        ctx = list(base)
        generated: list[int] = []
        for _ in range(max_len):
            t = _draw(lm.next_distribution(ctx), temperature, rng)
            generated.append(t)
            ctx.append(t)
            if t == end_token:
                out.append(TokenSequence(tuple(generated), lm.tokenizer_id))
                break
    return out
