"""Domain types, call linearization and sequence splicing."""

from __future__ import annotations

import json
import re
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

from .tokenizer import Tokenizer

# surface forms of <API>, </API> and the result arrow
API_START = " ["
API_END = "]"
ARROW = "->"

TOOL_NAMES = ("QA", "WikiSearch", "Calculator", "Calendar", "MT")


class ParseError(ValueError):
    """Raised when text does not hold a well-formed call to a known tool."""


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    url: str | None = None
    lang_hint: str | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError(f"document {self.id!r} has empty text")

    @classmethod
    def from_dict(cls, d: dict) -> "Document":
        return cls(id=str(d["id"]), text=d["text"], url=d.get("url"), lang_hint=d.get("lang_hint"))


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[int, ...]
    tokenizer_id: str

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def encode(cls, tokenizer: Tokenizer, text: str) -> "TokenSequence":
        return cls(tuple(tokenizer.encode(text)), tokenizer.tokenizer_id)


@dataclass(frozen=True)
class ApiCall:
    tool: str
    input: str = ""

    def __post_init__(self):
        if API_END in self.input:
            raise ValueError(f"call input may not contain {API_END!r}: {self.input!r}")


@dataclass(frozen=True)
class ExecutedCall:
    call: ApiCall
    result: str | None = None

    def __post_init__(self):
        if self.result is not None and ("\n" in self.result or "\r" in self.result):
            raise ValueError("call results must be a single line")


@dataclass(frozen=True, order=True)
class Insertion:
    token_pos: int
    char_pos: int
    executed: ExecutedCall = field(compare=False)
    gain: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class AnnotatedExample:
    doc_id: str
    original: TokenSequence
    insertions: tuple[Insertion, ...]

    def __post_init__(self):
        positions = [ins.token_pos for ins in self.insertions]
        if positions != sorted(positions) or len(set(positions)) != len(positions):
            raise ValueError("insertions must be sorted with one per position")

    def render(self, tokenizer: Tokenizer) -> str:
        return splice_many(self.original, [
            (ins.token_pos, linearize_with_result(ins.executed.call, ins.executed.result or ""))
            for ins in self.insertions
        ], tokenizer)

    def to_json(self, tokenizer: Tokenizer) -> str:
        record = {
            "doc_id": self.doc_id,
            "text": self.render(tokenizer),
            "insertions": [
                {
                    "char_pos": ins.char_pos,
                    "token_pos": ins.token_pos,
                    "tool": ins.executed.call.tool,
                    "input": ins.executed.call.input,
                    "result": ins.executed.result,
                    "gain": ins.gain,
                }
                for ins in self.insertions
            ],
        }
        return json.dumps(record, ensure_ascii=False)


def linearize(call: ApiCall) -> str:
    return f"{API_START}{call.tool}({call.input}){API_END}"


def linearize_with_result(call: ApiCall, result: str) -> str:
    """Render a call with its response; an empty result keeps the arrow."""
    return f"{API_START}{call.tool}({call.input}) {ARROW} {result}{API_END}"


_CALL_RE = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*", re.DOTALL)


def parse_call(text: str, tools: Iterable[str] = TOOL_NAMES) -> ApiCall:
    """Parse ``Tool(input)``; one pair of double quotes around the input is dropped."""
    m = _CALL_RE.fullmatch(text)
    if m is None:
        raise ParseError(f"no call structure in {text!r}")
    tool, arg = m.group(1), m.group(2).strip()
    if tool not in set(tools):
        raise ParseError(f"unregistered tool {tool!r}")
    if len(arg) >= 2 and arg[0] == '"' and arg[-1] == '"':
        arg = arg[1:-1]
    if API_END in arg:
        raise ParseError(f"call input contains {API_END!r}")
    return ApiCall(tool, arg)


def strip_markers(text: str) -> str:
    """``" [Tool(x)]"`` -> ``"Tool(x)"``."""
    if text.startswith(API_START):
        text = text[len(API_START):]
    if text.endswith(API_END):
        text = text[:-len(API_END)]
    return text


def splice(x: TokenSequence, i: int, e: str, tokenizer: Tokenizer) -> str:
    """Text of ``x`` with ``e`` inserted before token ``i``."""
    return splice_many(x, [(i, e)], tokenizer)


def splice_many(x: TokenSequence, inserts: Sequence[tuple[int, str]], tokenizer: Tokenizer) -> str:
    offsets = tokenizer.char_offsets(x.tokens)
    text = tokenizer.decode(x.tokens)
    for i, e in sorted(inserts, key=lambda p: p[0], reverse=True):
        if not 0 <= i <= len(x):
            raise IndexError(f"position {i} outside 0..{len(x)}")
        at = offsets[i]
        if at is None:
            raise ValueError(f"position {i} falls inside a byte-encoded character")
        text = text[:at] + e + text[at:]
    return text


def write_examples(examples: Iterable[AnnotatedExample], fh: IO[str], tokenizer: Tokenizer) -> int:
    n = 0
    for ex in examples:
        fh.write(ex.to_json(tokenizer) + "\n")
        n += 1
    return n


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def write_jsonl(path: str | Path, records: Iterable[dict]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, ensure_ascii=False) + "\n")
            n += 1
    return n
