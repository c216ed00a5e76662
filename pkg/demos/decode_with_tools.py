"""Greedy decoding that stops at the arrow, runs the tool and splices the result.

    python3 demos/decode_with_tools.py
"""

from __future__ import annotations

import datetime as dt

from apiaugment.decoding import DecodeConfig, generate
from apiaugment.lm import ScriptedLm
from apiaugment.tokenizer import Tokenizer
from apiaugment.tools import build_registry

PROMPT = "Q: What day of the week is it today? A:"


def main() -> None:
    tok = Tokenizer.from_texts([PROMPT + " [Calendar() -> Today is] It is Thursday. Monday"])
    # the model wants a Calendar call first, then copies the weekday out of the result
    lm = ScriptedLm.chain(tok, PROMPT, " [Calendar() ->", rules=[
        (PROMPT, {" [": 0.6, " It": 0.3}),
        ("Thursday, March 9, 2017.]", {" It": 1.0}),
        ("A: It is", {" Monday": 1.0}),  # without the result it can only guess
        ("It", {" is": 1.0}),
        ("is", {" Thursday": 1.0}),
        ("Thursday", {".": 1.0}),
        ("Monday", {".": 1.0}),
        (".", {tok.piece(tok.eos_id): 1.0}),
    ])
    tools = build_registry().with_date(dt.date(2017, 3, 9))

    trace = generate(lm, PROMPT, DecodeConfig(tools=tools))
    print("with tools:   ", repr(trace.text))
    for e in trace.api_events:
        print(f"  call at char {e.position}: {e.call.tool}({e.call.input}) -> {e.result!r}")

    plain = generate(lm, PROMPT, DecodeConfig(tools=tools, api_disabled=True, max_tokens=20))
    print("tools disabled:", repr(plain.text), f"({plain.termination})")


if __name__ == "__main__":
    main()
