"""Greedy decoding that pauses at ``->``, runs the pending call and splices its result."""

from __future__ import annotations

import time
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .core import API_END, ARROW, ApiCall, ParseError, parse_call
from .lm import LanguageModel
from .tools import ToolRegistry, build_registry


@dataclass(frozen=True)
class DecodeConfig:
    k_api: int = 10
    max_api_calls_per_input: int = 1
    api_disabled: bool = False
    max_tokens: int = 128
    max_call_tokens: int = 64
    tools: ToolRegistry | None = None

    def __post_init__(self):
        if self.k_api < 1:
            raise ValueError("k_api must be >= 1")
        if self.max_api_calls_per_input < 0:
            raise ValueError("max_api_calls_per_input must be >= 0")


@dataclass(frozen=True)
class ApiEvent:
    position: int  # character offset of the call inside the emitted text
    call: ApiCall
    result: str | None
    latency: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class DecodeTrace:
    text: str
    api_events: tuple[ApiEvent, ...]
    termination: str  # "eos" | "max_tokens"

    @property
    def called(self) -> bool:
        return bool(self.api_events)

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "termination": self.termination,
            "api_events": [{"position": e.position, "tool": e.call.tool, "input": e.call.input,
                            "result": e.result, "latency": round(e.latency, 6)} for e in self.api_events],
        }


def _in_top_k(dist: np.ndarray, token: int, k: int) -> bool:
    p = dist[token]
    return p > 0 and int(np.count_nonzero(dist > p)) < k


def generate(lm: LanguageModel, prompt: str, cfg: DecodeConfig = DecodeConfig()) -> DecodeTrace:
    """Greedy generation with API interception.

    ``<API>`` is emitted whenever it ranks among the ``k_api`` most likely
    tokens and call budget remains; the call is then decoded greedily up to
    ``->``, executed, and ``" result]"`` is appended before decoding resumes.
    A call that ends early, runs too long or does not parse stays in the text
    as plain tokens and costs no budget. Once the budget is spent, ``<API>``
    gets probability zero for the rest of the generation.
    """
    if not prompt:
        raise ValueError("prompt must be non-empty")
    tok = lm.tokenizer
    tools = cfg.tools if cfg.tools is not None else build_registry()
    api = lm.api_token
    arrow_ids = {tok.token_id(p) for p in (" " + ARROW, ARROW) if p in tok}
    end_id = tok.token_id(API_END)
    eos = tok.eos_id

    ctx = tok.encode(prompt)
    start = len(ctx)
    events: list[ApiEvent] = []
    budget = cfg.max_api_calls_per_input
    emitted = 0
    termination = "max_tokens"

    def step_dist() -> np.ndarray:
        dist = lm.next_distribution(ctx)
        if cfg.api_disabled or budget <= 0:
            dist = dist.copy()
            dist[api] = 0.0
        return dist

    while emitted < cfg.max_tokens:
        dist = step_dist()
        if budget > 0 and not cfg.api_disabled and _in_top_k(dist, api, cfg.k_api):
            call_start = len(tok.decode(ctx[start:]))
            ctx.append(api)
            emitted += 1
            body: list[int] = []
            closed_by = None
            while emitted < cfg.max_tokens and len(body) < cfg.max_call_tokens:
                t = int(np.argmax(step_dist()))
                ctx.append(t)
                emitted += 1
                if t in arrow_ids or t in (end_id, eos):
                    closed_by = t
                    break
                body.append(t)
            if closed_by == eos:
                termination = "eos"
                ctx.pop()
                break
            if closed_by not in arrow_ids:
                continue  # plain text
            try:
                call = parse_call(tok.decode(body), tools=tools)
            except ParseError:
                continue
            t0 = time.perf_counter()
            executed = tools.execute(call)
            latency = time.perf_counter() - t0
            events.append(ApiEvent(call_start, call, executed.result, latency))
            budget -= 1
            ctx.extend(tok.encode(f" {executed.result or ''}{API_END}"))
            continue
        t = int(np.argmax(dist))
        if t == eos:
            termination = "eos"
            break
        ctx.append(t)
        emitted += 1
    return DecodeTrace(tok.decode(ctx[start:]), tuple(events), termination)


@dataclass
class UsageReport:
    total: int
    with_call: int
    per_tool: dict[str, int]
    accuracy_all: float | None = None
    accuracy_called: float | None = None
    accuracy_not_called: float | None = None

    @property
    def percent(self) -> float:
        return 100.0 * self.with_call / self.total if self.total else 0.0

    @property
    def per_tool_percent(self) -> dict[str, float]:
        return {t: 100.0 * n / self.total for t, n in sorted(self.per_tool.items())} if self.total else {}

    def to_dict(self) -> dict:
        return {
            "all": self.total, "AC": self.with_call, "NC": self.total - self.with_call,
            "percent": self.percent, "per_tool_percent": self.per_tool_percent,
            "accuracy": {"All": self.accuracy_all, "AC": self.accuracy_called,
                         "NC": self.accuracy_not_called},
        }


def _mean(xs: Sequence[bool]) -> float | None:
    return 100.0 * sum(xs) / len(xs) if xs else None


def trace_stats(traces: Iterable[DecodeTrace], correct: Iterable[bool] | None = None) -> UsageReport:
    """Share of generations that called an API, split by tool; with correctness, All/AC/NC accuracy."""
    traces = list(traces)
    per_tool: Counter[str] = Counter()
    for t in traces:
        if t.api_events:
            per_tool[t.api_events[0].call.tool] += 1
    report = UsageReport(len(traces), sum(1 for t in traces if t.called), dict(per_tool))
    if correct is not None:
        ok = list(correct)
        if len(ok) != len(traces):
            raise ValueError("need one correctness flag per trace")
        report.accuracy_all = _mean(ok)
        report.accuracy_called = _mean([c for t, c in zip(traces, ok) if t.called])
        report.accuracy_not_called = _mean([c for t, c in zip(traces, ok) if not t.called])
    return report
