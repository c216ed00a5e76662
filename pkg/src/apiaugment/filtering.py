"""Loss-based usefulness scoring of executed calls and assembly of the augmented dataset."""

from __future__ import annotations

import math
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import AnnotatedExample, ExecutedCall, Insertion, TokenSequence, linearize_with_result
from .lm import LanguageModel, Prefix

STATS_THRESHOLDS = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class WeightScheme:
    """Linearly decaying weights ``max(0, 1 - decay*t)`` normalised to sum to one."""

    decay: Fraction = Fraction(1, 5)

    def __post_init__(self):
        object.__setattr__(self, "decay", Fraction(self.decay).limit_denominator(10**9))
        if not 0 < self.decay <= 1:
            raise ValueError("decay must lie in (0, 1]")

    @property
    def support(self) -> int:
        return math.ceil(1 / self.decay)

    @property
    def exact(self) -> tuple[Fraction, ...]:
        raw = [max(Fraction(0), 1 - self.decay * t) for t in range(self.support)]
        total = sum(raw)
        return tuple(w / total for w in raw)

    @property
    def weights(self) -> np.ndarray:
        return np.array([float(w) for w in self.exact])


DEFAULT_SCHEME = WeightScheme()


@dataclass(frozen=True)
class ScoredCall:
    doc_id: str
    position: int
    char_pos: int
    executed: ExecutedCall
    l_plus: float
    l_minus: float

    @property
    def gain(self) -> float:
        return self.l_minus - self.l_plus

    @property
    def tool(self) -> str:
        return self.executed.call.tool


@dataclass(frozen=True)
class FilterConfig:
    tau_f: float = 1.0
    cap: int = 25_000

    def __post_init__(self):
        if self.tau_f <= 0:
            raise ValueError("tau_f must be > 0")


DEFAULT_FILTER = {
    "QA": FilterConfig(),
    "WikiSearch": FilterConfig(),
    "Calendar": FilterConfig(),
    "Calculator": FilterConfig(tau_f=0.5),
    "MT": FilterConfig(tau_f=0.5),
}


def weighted_loss(lm: LanguageModel, prefix: Prefix, x: TokenSequence, i: int,
                  scheme: WeightScheme = DEFAULT_SCHEME) -> float:
    """``-sum_t w_t log p(x_{i+t} | prefix, x_{<i+t})``; zero when nothing follows ``i``."""
    if not 0 <= i <= len(x):
        raise IndexError(f"position {i} outside 0..{len(x)}")
    w = scheme.weights.tolist()
    tokens = x.tokens[i:i + len(w)]
    if not tokens:
        return 0.0
    ctx = lm.ids(prefix) + list(x.tokens[:i])
    loss = 0.0
    for t, tok in enumerate(tokens):
        p = lm.prob(ctx, tok)
        loss -= w[t] * (math.log(p) if p > 0 else -math.inf)
        ctx.append(tok)
    return loss


def score_call(lm: LanguageModel, doc_id: str, x: TokenSequence, executed: ExecutedCall, i: int,
               scheme: WeightScheme = DEFAULT_SCHEME, no_call_loss: float | None = None,
               char_pos: int | None = None) -> ScoredCall | None:
    """Losses with the call and result as a prefix vs. the better of no call / call without result.

    Returns ``None`` for calls that cannot be scored: no result, or no token after ``i``.
    """
    if executed.result is None or i >= len(x):
        return None
    call = executed.call
    l_plus = weighted_loss(lm, linearize_with_result(call, executed.result), x, i, scheme)
    if no_call_loss is None:
        no_call_loss = weighted_loss(lm, "", x, i, scheme)
    l_empty = weighted_loss(lm, linearize_with_result(call, ""), x, i, scheme)
    if char_pos is None:
        char_pos = lm.tokenizer.char_offsets(x.tokens)[i]
    return ScoredCall(doc_id, i, char_pos, executed, l_plus, min(no_call_loss, l_empty))


def score_document(lm: LanguageModel, doc_id: str, x: TokenSequence,
                   calls: Iterable[tuple[int, ExecutedCall]],
                   scheme: WeightScheme = DEFAULT_SCHEME) -> list[ScoredCall]:
    """Score every ``(position, call)`` of one document, sharing the no-call loss per position."""
    offsets = lm.tokenizer.char_offsets(x.tokens)
    no_call: dict[int, float] = {}
    out = []
    for i, executed in calls:
        if executed.result is None or i >= len(x):
            continue
        if i not in no_call:
            no_call[i] = weighted_loss(lm, "", x, i, scheme)
        out.append(score_call(lm, doc_id, x, executed, i, scheme, no_call[i], offsets[i]))
    return out


def _config(configs: Mapping[str, FilterConfig] | FilterConfig, tool: str) -> FilterConfig:
    if isinstance(configs, FilterConfig):
        return configs
    return configs.get(tool, FilterConfig())


def _rank(sc: ScoredCall):
    # larger gain first, then tool name, then input
    return (-sc.gain, sc.tool, sc.executed.call.input)


def resolve_collisions(calls: Iterable[ScoredCall]) -> list[ScoredCall]:
    """One call per (document, position), sorted by document then position."""
    best: dict[tuple[str, int], ScoredCall] = {}
    for sc in calls:
        key = (sc.doc_id, sc.position)
        if key not in best or _rank(sc) < _rank(best[key]):
            best[key] = sc
    return [best[k] for k in sorted(best)]


def filter_calls(scored: Iterable[ScoredCall],
                 configs: Mapping[str, FilterConfig] | FilterConfig = DEFAULT_FILTER) -> list[ScoredCall]:
    """Calls whose gain reaches their tool's threshold, one per position."""
    return resolve_collisions(sc for sc in scored if sc.gain >= _config(configs, sc.tool).tau_f)


def apply_caps(kept: Iterable[ScoredCall],
               configs: Mapping[str, FilterConfig] | FilterConfig = DEFAULT_FILTER) -> list[ScoredCall]:
    """Per tool, admit documents in order of their best gain until the tool's cap is reached."""
    by_tool: dict[str, list[ScoredCall]] = defaultdict(list)
    for sc in kept:
        by_tool[sc.tool].append(sc)
    out = []
    for tool, calls in by_tool.items():
        cap = _config(configs, tool).cap
        admitted: set[str] = set()
        for sc in sorted(calls, key=lambda s: (-s.gain, s.doc_id, s.position)):
            if sc.doc_id in admitted or len(admitted) < cap:
                admitted.add(sc.doc_id)
                out.append(sc)
    return out


@dataclass
class DatasetStats:
    scored: dict[str, int] = field(default_factory=dict)
    by_threshold: dict[str, dict[float, int]] = field(default_factory=dict)
    kept_calls: dict[str, int] = field(default_factory=dict)
    examples_per_tool: dict[str, int] = field(default_factory=dict)
    capped: dict[str, int] = field(default_factory=dict)
    examples: int = 0

    def to_dict(self) -> dict:
        return {
            "examples": self.examples,
            "scored_calls": dict(sorted(self.scored.items())),
            "examples_by_threshold": {t: {str(k): v for k, v in sorted(c.items())}
                                      for t, c in sorted(self.by_threshold.items())},
            "kept_calls": dict(sorted(self.kept_calls.items())),
            "examples_per_tool": dict(sorted(self.examples_per_tool.items())),
            "dropped_by_cap": dict(sorted(self.capped.items())),
        }

    def table(self) -> str:
        cols = [f"tau_f={t}" for t in STATS_THRESHOLDS]
        head = f"{'API':<12}" + "".join(f"{c:>12}" for c in cols) + f"{'kept':>8}{'examples':>10}"
        lines = [head, "-" * len(head)]
        for tool in sorted(set(self.scored) | set(self.by_threshold)):
            counts = self.by_threshold.get(tool, {})
            lines.append(f"{tool:<12}" + "".join(f"{counts.get(t, 0):>12}" for t in STATS_THRESHOLDS)
                         + f"{self.kept_calls.get(tool, 0):>8}{self.examples_per_tool.get(tool, 0):>10}")
        lines.append(f"total examples: {self.examples}")
        return "\n".join(lines)


def build_dataset(docs: Mapping[str, TokenSequence], scored: Sequence[ScoredCall],
                  configs: Mapping[str, FilterConfig] | FilterConfig = DEFAULT_FILTER,
                  thresholds: Sequence[float] = STATS_THRESHOLDS) -> tuple[list[AnnotatedExample], DatasetStats]:
    """Filter, cap and merge scored calls into annotated examples ordered by document id.

    Documents left without any call are dropped.
    """
    stats = DatasetStats()
    for sc in scored:
        stats.scored[sc.tool] = stats.scored.get(sc.tool, 0) + 1
    for tool in stats.scored:
        stats.by_threshold[tool] = {
            t: len({sc.doc_id for sc in scored if sc.tool == tool and sc.gain >= t}) for t in thresholds}

    passed = [sc for sc in scored if sc.gain >= _config(configs, sc.tool).tau_f]
    capped = apply_caps(passed, configs)
    for tool in stats.scored:
        before = {sc.doc_id for sc in passed if sc.tool == tool}
        after = {sc.doc_id for sc in capped if sc.tool == tool}
        stats.capped[tool] = len(before - after)
    merged = resolve_collisions(capped)

    by_doc: dict[str, list[ScoredCall]] = defaultdict(list)
    for sc in merged:
        by_doc[sc.doc_id].append(sc)
    examples = []
    for doc_id in sorted(by_doc):
        calls = by_doc[doc_id]
        examples.append(AnnotatedExample(doc_id, docs[doc_id], tuple(
            Insertion(sc.position, sc.char_pos, sc.executed, sc.gain) for sc in calls)))
        for sc in calls:
            stats.kept_calls[sc.tool] = stats.kept_calls.get(sc.tool, 0) + 1
        for tool in {sc.tool for sc in calls}:
            stats.examples_per_tool[tool] = stats.examples_per_tool.get(tool, 0) + 1
    stats.examples = len(examples)
    return examples, stats
