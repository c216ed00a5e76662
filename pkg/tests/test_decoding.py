from __future__ import annotations

import datetime as dt
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apiaugment.core import ApiCall
from apiaugment.decoding import ApiEvent, DecodeConfig, DecodeTrace, generate, trace_stats
from apiaugment.lm import ScriptedLm
from apiaugment.tools import build_registry

from conftest import make_tokenizer

EOS = "</s>"
VOCAB_TEXT = "Q: a b c d done [Calculator(1 + 1) -> 2] [Calendar() -> x]"


def _tok():
    return make_tokenizer(VOCAB_TEXT)


def test_intercept_round_trip():
    tok = _tok()
    lm = ScriptedLm.chain(tok, "Q:", " [Calculator(1 + 1) ->",
                          rules=[("2]", {" done": 1.0}), ("done", {EOS: 1.0})])
    trace = generate(lm, "Q:", DecodeConfig())
    assert trace.text == " [Calculator(1 + 1) -> 2] done"
    assert trace.termination == "eos"
    assert trace.api_events == (ApiEvent(0, ApiCall("Calculator", "1 + 1"), "2"),)


def test_disabled_mode_suppresses_calls():
    tok = _tok()
    lm = ScriptedLm.chain(tok, "Q:", " [Calculator(1 + 1) ->",
                          rules=[("2]", {" done": 1.0}), ("done", {EOS: 1.0})])
    trace = generate(lm, "Q:", DecodeConfig(api_disabled=True, max_tokens=20))
    assert " [" not in trace.text
    assert trace.api_events == ()


def test_api_rank_gates_trigger():
    tok = _tok()
    probs = {" a": 0.3, " b": 0.25, " c": 0.2, " [": 0.15}
    rules = [("Q:", probs), ("Q: [", {"Calculator": 1.0}), ("Q: [Calculator", {"(": 1.0}),
             ("Q: [Calculator(", {"1": 1.0}), ("Q: [Calculator(1", {" +": 1.0}),
             ("Q: [Calculator(1 +", {" 1": 1.0}), ("Q: [Calculator(1 + 1", {")": 1.0}),
             ("Q: [Calculator(1 + 1)", {" ->": 1.0}), ("2]", {EOS: 1.0}), ("a", {EOS: 1.0})]
    lm = ScriptedLm(tok, rules)
    assert generate(lm, "Q:", DecodeConfig(k_api=1)).text == " a"
    assert generate(lm, "Q:", DecodeConfig(k_api=3)).text == " a"
    assert generate(lm, "Q:", DecodeConfig(k_api=4)).text == " [Calculator(1 + 1) -> 2]"
    assert generate(lm, "Q:", DecodeConfig(k_api=10)).called


def test_budget_ignores_later_calls():
    tok = _tok()
    lm = ScriptedLm(tok, [
        ("Q:", {" [": 1.0}), (" [", {"Calendar": 1.0}), ("Calendar", {"(": 1.0}), ("(", {")": 1.0}),
        (")", {" ->": 1.0}), ("]", {" [": 0.6, " a": 0.4}), (" a", {EOS: 1.0})])
    tools = build_registry(today=dt.date(2023, 1, 30))
    trace = generate(lm, "Q:", DecodeConfig(tools=tools))
    assert len(trace.api_events) == 1
    assert trace.text == " [Calendar() -> Today is Monday, January 30, 2023.] a"
    two = generate(lm, "Q:", DecodeConfig(tools=tools, max_api_calls_per_input=2))
    assert len(two.api_events) == 2


def test_unparseable_call_stays_text():
    tok = _tok()
    lm = ScriptedLm(tok, [("Q:", {" [": 1.0}), ("Q: [", {" a": 1.0}), ("Q: [ a", {"]": 1.0}),
                          ("]", {" done": 1.0}), ("done", {EOS: 1.0})])
    trace = generate(lm, "Q:", DecodeConfig())
    assert trace.api_events == ()
    assert trace.text.startswith(" [ a]")


def test_max_tokens():
    tok = _tok()
    lm = ScriptedLm(tok, [("", {" a": 1.0})])
    trace = generate(lm, "Q:", DecodeConfig(max_tokens=5, api_disabled=True))
    assert trace.text == " a" * 5 and trace.termination == "max_tokens"
    with pytest.raises(ValueError):
        generate(lm, "", DecodeConfig())


def _plain_greedy(lm, prompt, max_tokens):
    tok = lm.tokenizer
    ctx = tok.encode(prompt)
    start = len(ctx)
    for _ in range(max_tokens):
        t = int(np.argmax(lm.next_distribution(ctx)))
        if t == tok.eos_id:
            break
        ctx.append(t)
    return tok.decode(ctx[start:])


def _random_lm(seed: int) -> ScriptedLm:
    rng = random.Random(seed)
    tok = _tok()
    words = [" a", " b", " c", " d", " done", EOS]
    rules = []
    for w in words[:-1] + ["Q:"]:
        p = [rng.random() for _ in words]
        total = sum(p) * 1.25
        probs = {k: v / total for k, v in zip(words, p)}
        probs[" ["] = rng.random() * 0.2
        rules.append((w.strip() or w, probs))
    return ScriptedLm(tok, rules)


@pytest.mark.parametrize("seed", range(100))
def test_disabled_never_emits_marker(seed):
    lm = _random_lm(seed)
    trace = generate(lm, "Q:", DecodeConfig(api_disabled=True, max_tokens=30))
    assert " [" not in trace.text and not trace.api_events


@pytest.mark.parametrize("seed", range(30))
def test_top1_equals_plain_greedy_when_api_is_not_argmax(seed):
    lm = _random_lm(seed)
    ok = generate(lm, "Q:", DecodeConfig(k_api=1, max_tokens=30))
    assert ok.text == _plain_greedy(lm, "Q:", 30)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 10))
def test_budget_never_exceeded(seed, k):
    tok = _tok()
    rng = random.Random(seed)
    rules = [("->", {" 2": 1.0})]
    for w in ["Q:", " a", " b", "]", "2"]:
        rules.append((w.strip() or w, {" [": rng.random() * 0.5, " a": 0.1, EOS: 0.05}))
    rules.append((" [", {"Calculator": 1.0}))
    rules.append(("Calculator", {"(": 1.0}))
    rules.append(("(", {"1": 1.0}))
    rules.append(("1", {")": 1.0}))
    rules.append((")", {" ->": 1.0}))
    lm = ScriptedLm(tok, rules)
    trace = generate(lm, "Q:", DecodeConfig(k_api=k, max_tokens=40))
    assert len(trace.api_events) <= 1


def test_usage_stats():
    call = ApiEvent(0, ApiCall("QA", "q"), "r")
    cal = ApiEvent(0, ApiCall("Calendar", ""), "r")
    traces = [DecodeTrace("x", (call,), "eos"), DecodeTrace("y", (), "eos"),
              DecodeTrace("z", (cal,), "eos"), DecodeTrace("w", (), "eos")]
    rep = trace_stats(traces, [True, False, True, True])
    assert rep.percent == 50.0
    assert sum(rep.per_tool_percent.values()) == rep.percent
    assert rep.accuracy_all == 75.0 and rep.accuracy_called == 100.0 and rep.accuracy_not_called == 50.0
    assert trace_stats([DecodeTrace("x", (), "eos")] * 3).percent == 0.0
    with pytest.raises(ValueError):
        trace_stats(traces, [True])
