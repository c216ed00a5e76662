"""Zero-shot prompt builders and the lenient answer matchers."""

from __future__ import annotations

import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

FAMILIES = ("lama", "math", "qa", "mlqa", "temporal")

LAMA_WORDS = 5
QA_WORDS = 20
MLQA_WORDS = 10


@dataclass(frozen=True)
class EvalItem:
    task_id: str
    prompt: str
    golds: tuple[str, ...]
    family: str

    def __post_init__(self):
        if not self.golds:
            raise ValueError("an eval item needs at least one gold answer")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")


def _question(q: str) -> str:
    q = q.strip()
    return q if q.endswith("?") else q + "?"


def build_prompt(family: str, x: str = "", q: str = "") -> str:
    """Prompt text for one item. ``x`` is the context/statement, ``q`` the question."""
    if family == "lama":
        return f"Please complete the following text so that it is factually correct: {x}"
    if family == "math":
        return " ".join(p for p in (x.strip(), q.strip(), "The answer is") if p)
    if family in ("qa", "temporal"):
        return f"Answer the following question: {_question(q or x)}"
    if family == "mlqa":
        return (f"Your task is to answer a question based on the following paragraph: {x} "
                f"Now answer the following question in English: {q}")
    raise ValueError(f"unknown family {family!r}")


_LEADING_PUNCT = re.compile(r"^[^\w]+", re.UNICODE)


def words(text: str, cap: int | None = None) -> list[str]:
    """Whitespace-separated words with leading punctuation removed; pure punctuation is skipped."""
    out = []
    for raw in text.split():
        w = _LEADING_PUNCT.sub("", raw)
        if w:
            out.append(w)
            if cap is not None and len(out) == cap:
                break
    return out


def _contains(prediction: str, golds: Iterable[str], cap: int) -> bool:
    head = " ".join(words(prediction, cap)).lower()
    return any(g.strip() and g.strip().lower() in head for g in golds)


def lama_match(prediction: str, gold: str | Sequence[str]) -> bool:
    golds = [gold] if isinstance(gold, str) else gold
    return _contains(prediction, golds, LAMA_WORDS)


def qa_match(prediction: str, golds: str | Sequence[str], cap: int = QA_WORDS) -> bool:
    golds = [golds] if isinstance(golds, str) else golds
    return _contains(prediction, golds, cap)


_NUM = r"[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?|[-+]?\.\d+"
NUMBER_RE = re.compile(_NUM)
EQUATION_RE = re.compile(rf"(?:{_NUM})(?:\s*[-+*/x×÷]\s*(?:{_NUM}))+\s*=\s*({_NUM})")


def _to_float(s: str) -> float:
    return float(s.replace(",", ""))


def predicted_number(prediction: str) -> float | None:
    """First number, or the right-hand side of the first ``a op b = c`` equation."""
    eq = EQUATION_RE.search(prediction)
    if eq is not None:
        return _to_float(eq.group(1))
    m = NUMBER_RE.search(prediction)
    return _to_float(m.group()) if m else None


def math_match(prediction: str, gold: float | str, tol: float = 1e-6) -> bool:
    value = predicted_number(prediction)
    if value is None:
        return False
    gold = _to_float(gold) if isinstance(gold, str) else float(gold)
    return abs(value - gold) <= tol * max(1.0, abs(gold))


def match(family: str, prediction: str, golds: Sequence[str]) -> bool:
    if family in ("lama", "temporal"):
        return lama_match(prediction, golds)
    if family == "math":
        return any(math_match(prediction, g) for g in golds)
    if family == "qa":
        return qa_match(prediction, golds, QA_WORDS)
    if family == "mlqa":
        return qa_match(prediction, golds, MLQA_WORDS)
    raise ValueError(f"unknown family {family!r}")
