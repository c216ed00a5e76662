"""Candidate positions and candidate calls for one document and one tool."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .core import API_END, ARROW, ApiCall, Document, ParseError, TokenSequence, parse_call
from .lm import LanguageModel, sample_until

PLACEHOLDER = "\nInput: x\n"
PROMPT_VERSION = 1


@dataclass(frozen=True)
class ToolPrompt:
    tool: str
    template: str

    def __post_init__(self):
        if self.template.count(PLACEHOLDER) != 1:
            raise ValueError(f"{self.tool} prompt needs exactly one {PLACEHOLDER.strip()!r} line")

    def render(self, text: str) -> str:
        return self.template.replace(PLACEHOLDER, f"\nInput: {text}\n").rstrip()

    @classmethod
    def load(cls, tool: str, directory: str | Path | None = None) -> "ToolPrompt":
        if directory is None:
            template = resources.files("apiaugment").joinpath("prompts", f"{tool}.txt").read_text("utf-8")
        else:
            template = Path(directory, f"{tool}.txt").read_text("utf-8")
        return cls(tool, template)


@dataclass(frozen=True)
class SamplingConfig:
    tau_s: float = 0.05
    k: int = 5
    m: int = 5
    temperature: float = 1.0
    max_call_len: int = 64
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.tau_s <= 1:
            raise ValueError("tau_s must lie in [0, 1]")
        if self.k < 1 or self.m < 1 or self.max_call_len < 1:
            raise ValueError("k, m and max_call_len must be >= 1")


# calculator and translation see few documents after the prefilter, so sample wider
DEFAULT_SAMPLING = {
    "QA": SamplingConfig(),
    "WikiSearch": SamplingConfig(),
    "Calendar": SamplingConfig(),
    "Calculator": SamplingConfig(tau_s=0.0, k=20, m=10),
    "MT": SamplingConfig(tau_s=0.0, k=20, m=10),
}


@dataclass(frozen=True)
class CandidatePosition:
    position: int
    p: float


def _tokens(lm: LanguageModel, doc: Document | TokenSequence | str) -> TokenSequence:
    if isinstance(doc, TokenSequence):
        return doc
    text = doc.text if isinstance(doc, Document) else doc
    return TokenSequence.encode(lm.tokenizer, text)


def sample_positions(lm: LanguageModel, doc: Document | TokenSequence | str, prompt: ToolPrompt,
                     cfg: SamplingConfig) -> list[CandidatePosition]:
    """Positions whose ``<API>`` probability exceeds ``tau_s``; the ``k`` most likely, in text order.

    Position ``i`` (0-based) means "before token ``i``"; the context is the
    rendered prompt followed by tokens ``0..i-1``.
    """
    x = _tokens(lm, doc)
    if not len(x):
        return []
    text = lm.tokenizer.decode(x.tokens)
    ctx = lm.tokenizer.encode(prompt.render(text)) + list(x.tokens)
    base = len(ctx) - len(x)
    offsets = lm.tokenizer.char_offsets(x.tokens)
    api = lm.api_token
    found = []
    for i in range(len(x)):
        if offsets[i] is None:
            continue
        p = lm.prob(ctx[:base + i], api)
        if p > cfg.tau_s:
            found.append(CandidatePosition(i, p))
    found.sort(key=lambda c: (-c.p, c.position))
    return sorted(found[:cfg.k], key=lambda c: c.position)


def position_seed(seed: int, position: int) -> int:
    return int(np.random.SeedSequence([seed, position]).generate_state(1)[0])


def sample_calls(lm: LanguageModel, doc: Document | TokenSequence | str, position: int,
                 prompt: ToolPrompt, cfg: SamplingConfig) -> list[ApiCall]:
    """Up to ``m`` distinct calls to the prompt's tool sampled after ``<API>`` at ``position``."""
    x = _tokens(lm, doc)
    text = lm.tokenizer.decode(x.tokens)
    prefix = lm.tokenizer.encode(prompt.render(text)) + list(x.tokens[:position]) + [lm.api_token]
    end = lm.tokenizer.token_id(API_END)
    samples = sample_until(lm, prefix, end, cfg.m, cfg.max_call_len, cfg.temperature,
                           position_seed(cfg.seed, position))
    calls: list[ApiCall] = []
    for s in samples:
        body = lm.tokenizer.decode(s.tokens[:-1]).split(ARROW, 1)[0]
        try:
            call = parse_call(body, tools=(prompt.tool,))
        except ParseError:
            continue
        if call not in calls:
            calls.append(call)
    return calls


def with_seed(cfg: SamplingConfig, seed: int) -> SamplingConfig:
    return dataclasses.replace(cfg, seed=seed)
