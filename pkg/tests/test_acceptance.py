"""Exit criteria, one test per criterion.

Each test records a PASS/FAIL line; the lines are printed in the pytest
terminal summary, or directly when this file is run as a script.
"""

from __future__ import annotations

import functools
import json
import math
import random
import shutil
import string
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from apiaugment.core import ApiCall, ExecutedCall, TokenSequence, linearize_with_result, read_jsonl
from apiaugment.dateset import ROW_SIZES, generate_dateset
from apiaugment.decoding import DecodeConfig, generate
from apiaugment.evalgen import lama_match, match, math_match, predicted_number, qa_match
from apiaugment.filtering import STATS_THRESHOLDS, WeightScheme
from apiaugment.lm import ReferenceNgramLm, ScriptedLm
from apiaugment.pipeline import PipelineConfig, build_lm, load_corpus, run_execute, run_filter_merge, run_pipeline
from apiaugment.prefilter import mt_postfilter, prefilter_calculator
from apiaugment.core import Document
from apiaugment.tokenizer import Tokenizer
from apiaugment.tools.calculator import calc_eval
from apiaugment.tools.search import SearchIndex, Section, terms, wiki_search

from conftest import FIXTURES
from oracles import (CountTableTrigram, bm25_exhaustive, flat_eval, naive_weighted_loss, round_two,
                     temporal_gold, weekday_name)

RESULTS: dict[int, tuple[bool, str]] = {}
WEIGHTS = [1 / 3, 4 / 15, 1 / 5, 2 / 15, 1 / 15]


def criterion(number: int, title: str, limit: float | None = None):
    """Record the outcome (and runtime against ``limit`` seconds) of one criterion."""
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                fn(*args, **kwargs)
                elapsed = time.perf_counter() - t0
                if limit is not None:
                    assert elapsed < limit, f"took {elapsed:.2f}s, limit {limit}s"
            except BaseException as exc:
                RESULTS[number] = (False, f"{title}: {exc!s:.200}")
                raise
            RESULTS[number] = (True, f"{title} ({elapsed:.2f}s)")
        return run
    return wrap


def summary_lines() -> list[str]:
    return [f"{'PASS' if ok else 'FAIL'} criterion {n}: {msg}" for n, (ok, msg) in sorted(RESULTS.items())]


# ---------------------------------------------------------------- 1

@criterion(1, "calculator exactness, precedence and fuzzing", limit=5.0)
def test_c1_calculator():
    for expr, out in [("27 + 4 * 2", "35"), ("735 / 499", "1.47"), ("85 / 23", "3.70"), ("723 / 252", "2.87")]:
        assert calc_eval(expr) == out, expr
    rng = random.Random(2024)
    for _ in range(10_000):
        n = rng.randint(1, 5)
        nums = [rng.randint(0, 20) for _ in range(n)]
        ops = [rng.choice("+-*/") for _ in range(n - 1)]
        expr = str(nums[0]) + "".join(f" {o} {x}" for o, x in zip(ops, nums[1:]))
        try:
            want = round_two(flat_eval(nums, ops))
        except ZeroDivisionError:
            want = None
        assert calc_eval(expr) == want, expr
    alphabet = string.digits + "+-*/(). ,xe" + string.ascii_letters[:6]
    for _ in range(100_000):
        s = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12)))
        out = calc_eval(s)
        assert out is None or isinstance(out, str)


# ---------------------------------------------------------------- 2

@criterion(2, "weight scheme in exact rationals")
def test_c2_weights():
    w = WeightScheme(Fraction(1, 5)).exact
    assert w == (Fraction(1, 3), Fraction(4, 15), Fraction(1, 5), Fraction(2, 15), Fraction(1, 15))
    assert sum(w) == 1


# ---------------------------------------------------------------- 3

NOUNS = ["apples", "pears", "plums", "coins", "books", "chairs", "lamps", "birds"]


def _synthetic_corpus(rng: random.Random, n_docs: int) -> tuple[list[dict], list[dict], list[str]]:
    """Documents, executed-call records and extra training texts carrying call syntax."""
    docs, calls, extra = [], [], []
    for d in range(n_docs):
        a, b = rng.randint(1, 30), rng.randint(1, 30)
        noun = rng.choice(NOUNS)
        filler = " ".join(rng.choice(NOUNS) for _ in range(rng.randint(3, 8)))
        text = f"{a + b} {noun} were counted , then {a} and {b} more {filler} ."
        docs.append({"id": f"doc{d:03d}", "text": text})
        extra.append(f"[Calculator({a} + {b}) -> {a + b}]{a + b} {noun} were counted")
    return docs, calls, extra


def _oracle_for(lm: ReferenceNgramLm, texts: list[str]) -> CountTableTrigram:
    tok = lm.tokenizer
    return CountTableTrigram([tok.encode(t) for t in texts], tok.eos_id, tok.vocab_size, lm.alpha)


def _filter_setup(tmp: Path, docs: list[dict], extra: list[str], alpha: float = 0.1) -> PipelineConfig:
    (tmp / "corpus.jsonl").write_text("".join(json.dumps(d) + "\n" for d in docs))
    (tmp / "extra.jsonl").write_text("".join(json.dumps({"text": t}) + "\n" for t in extra))
    raw = {"corpus": "corpus.jsonl", "output_dir": "out", "seed": 3,
           "lm": {"order": 3, "alpha": alpha, "train_on_prompts": False, "extra_texts": "extra.jsonl"},
           "tools": {"Calculator": {}, "QA": {}}}
    (tmp / "config.json").write_text(json.dumps(raw))
    return PipelineConfig.load(tmp / "config.json")


@criterion(3, "filtering matches an independent loss oracle", limit=60.0)
def test_c3_filter_oracle(tmp_path):
    rng = random.Random(7)
    docs, _, extra = _synthetic_corpus(rng, 50)
    cfg = _filter_setup(tmp_path, docs, extra * 4, alpha=0.01)
    lm = build_lm(cfg, load_corpus(cfg.corpus))
    tok = lm.tokenizer
    oracle = _oracle_for(lm, [d["text"] for d in docs] + extra * 4)

    cand = []
    for d in docs:
        n = len(tok.encode(d["text"]))
        a, b = d["text"].split(" and ")[0].split()[-1], d["text"].split(" and ")[1].split()[0]
        right = str(int(a) + int(b))
        for pos in sorted({0, 1, 2, rng.randrange(n)}):
            for inp, res in ((f"{a} + {b}", right), (f"{b} - {a}", None), ("1 + 1", "2")):
                cand.append({"schema": "candidate.v1", "doc_id": d["id"], "tool": "Calculator",
                             "token_pos": pos, "char_pos": 0, "input": inp, "p_api": 1.0, "context_date": None})
            cand.append({"schema": "candidate.v1", "doc_id": d["id"], "tool": "QA", "token_pos": pos,
                         "char_pos": 0, "input": "How many?", "p_api": 1.0, "context_date": None})
    cfg.out.mkdir()
    (cfg.out / "candidates.jsonl").write_text("".join(json.dumps(c) + "\n" for c in cand))
    from apiaugment.tools import ToolSpec, build_registry
    tools = build_registry()
    tools.register(ToolSpec("QA", lambda q: "many"))
    run_execute(cfg, tools)
    run_filter_merge(cfg, lm)

    texts = {d["id"]: d["text"] for d in docs}
    scored = list(read_jsonl(cfg.out / "scored.jsonl"))
    assert len(scored) >= 150
    kept_by_tau = {t: set() for t in STATS_THRESHOLDS}
    for r in scored:
        x = tok.encode(texts[r["doc_id"]])
        call = ApiCall(r["tool"], r["input"])
        plus = tok.encode(linearize_with_result(call, r["result"]))
        empty = tok.encode(linearize_with_result(call, ""))
        want_plus = naive_weighted_loss(oracle.prob, plus, x, r["token_pos"], WEIGHTS)
        want_minus = min(naive_weighted_loss(oracle.prob, [], x, r["token_pos"], WEIGHTS),
                         naive_weighted_loss(oracle.prob, empty, x, r["token_pos"], WEIGHTS))
        assert abs(r["l_plus"] - want_plus) <= 1e-9
        assert abs(r["l_minus"] - want_minus) <= 1e-9
        assert abs(r["gain"] - (want_minus - want_plus)) <= 1e-9
        for t in STATS_THRESHOLDS:
            # decisions must agree with the oracle's, and no gain may sit within 1e-9 of a threshold
            assert (r["gain"] >= t) == (want_minus - want_plus >= t)
            if want_minus - want_plus >= t:
                kept_by_tau[t].add((r["tool"], r["doc_id"]))
    stats = json.loads((cfg.out / "stats.json").read_text())
    for tool, counts in stats["examples_by_threshold"].items():
        want = [len({d for tl, d in kept_by_tau[t] if tl == tool}) for t in STATS_THRESHOLDS]
        got = [counts[str(t)] for t in STATS_THRESHOLDS]
        assert got == want
        assert got[0] >= got[1] >= got[2]
    assert any(r["gain"] >= 1.0 for r in scored) and any(r["gain"] < 0 for r in scored)


# ---------------------------------------------------------------- 4

@criterion(4, "planted useful calls pass, decoys fail")
def test_c4_planted_signal(tmp_path):
    rng = random.Random(11)
    numbers = rng.sample(range(10, 99), 24)
    docs, extra, planted, decoys = [], [], [], []
    for k, r in enumerate(numbers):
        a = rng.randint(1, r - 1)
        noun = NOUNS[k % len(NOUNS)]
        doc = {"id": f"p{k:02d}", "text": f"{r} {noun} were sold today ."}
        docs.append(doc)
        # the result token is followed by the same number in the training data, ten times over
        extra += [f"[Calculator({a} + {r - a}) -> {r}]{r} {noun} were sold"] * 10
        planted.append((doc["id"], 0, f"{a} + {r - a}"))
        wrong = numbers[(k + 1) % len(numbers)]
        decoys.append((doc["id"], 0, f"{wrong} + 0"))        # wrong result at the planted site
        decoys.append((doc["id"], 3, f"{a} + {r - a}"))      # right result, too far from the number
    cfg = _filter_setup(tmp_path, docs, extra, alpha=0.01)
    lm = build_lm(cfg, load_corpus(cfg.corpus))
    oracle = _oracle_for(lm, [d["text"] for d in docs] + extra)
    cfg.out.mkdir()
    rows = [(d, p, i, True) for d, p, i in planted] + [(d, p, i, False) for d, p, i in decoys]
    (cfg.out / "candidates.jsonl").write_text("".join(
        json.dumps({"schema": "candidate.v1", "doc_id": d, "tool": "Calculator", "token_pos": p, "char_pos": 0,
                    "input": i, "p_api": 1.0, "context_date": None}) + "\n" for d, p, i, _ in rows))
    run_execute(cfg)
    run_filter_merge(cfg, lm)
    tau = 1.0  # the general default, stricter than the calculator's own 0.5
    texts = {d["id"]: d["text"] for d in docs}
    tok = lm.tokenizer
    scored = {(r["doc_id"], r["token_pos"], r["input"]): r for r in read_jsonl(cfg.out / "scored.jsonl")}
    for doc_id, pos, inp, is_planted in rows:
        r = scored[(doc_id, pos, inp)]
        x = tok.encode(texts[doc_id])
        call = ApiCall("Calculator", inp)
        want = (min(naive_weighted_loss(oracle.prob, [], x, pos, WEIGHTS),
                    naive_weighted_loss(oracle.prob, tok.encode(linearize_with_result(call, "")), x, pos, WEIGHTS))
                - naive_weighted_loss(oracle.prob, tok.encode(linearize_with_result(call, r["result"])), x, pos,
                                      WEIGHTS))
        assert abs(r["gain"] - want) <= 1e-9
        if is_planted:
            assert r["gain"] >= tau, (doc_id, inp, r["gain"])
        else:
            assert r["gain"] < tau, (doc_id, pos, inp, r["gain"])
    dataset = [json.loads(line) for line in (cfg.out / "dataset.jsonl").read_text().splitlines()]
    kept = {(d["doc_id"], i["token_pos"], i["input"]) for d in dataset for i in d["insertions"]}
    assert kept == set(planted)


# ---------------------------------------------------------------- 5

@criterion(5, "BM25 top-1 equals an exhaustive scan; ln 2 hand case")
def test_c5_bm25():
    two = SearchIndex.build([Section("", "", "fish"), Section("", "", "bird")])
    assert abs(two.scores("fish")[0] - math.log(2)) <= 1e-12
    rng = random.Random(5)
    vocab = [f"w{i}" for i in range(400)]
    sizes = [10, 100, 500, 1000]
    corpora = {}
    for n in sizes:
        docs = [[rng.choice(vocab) for _ in range(rng.randint(3, 40))] for _ in range(n)]
        index = SearchIndex.build([Section(f"T{i}", "", " ".join(d)) for i, d in enumerate(docs)])
        corpora[n] = (index, [terms(f"T{i} {' '.join(d)}") for i, d in enumerate(docs)])
    for q in range(100):
        index, full = corpora[sizes[q % len(sizes)]]
        query = rng.sample(vocab, rng.randint(1, 4))
        want = bm25_exhaustive(full, query)
        best = max(want)
        got = index.scores(query)
        top = int(np.argmax(got))
        if best == 0:
            assert got.max() == 0
            continue
        assert abs(want[top] - best) <= 1e-9
        assert max(abs(g - w) for g, w in zip(got, want)) <= 1e-9
        assert wiki_search(index, " ".join(query)) == index.sections[top].snippet()


# ---------------------------------------------------------------- 6

def _decoder_vocab() -> Tokenizer:
    return Tokenizer.from_texts(["Q: a b c d done [Calculator(1 + 1) -> 2]"])


@criterion(6, "decoder protocol", limit=5.0)
def test_c6_decoder():
    tok = _decoder_vocab()
    eos = "</s>"
    # (a) one intercepted call
    lm = ScriptedLm.chain(tok, "Q:", " [Calculator(1 + 1) ->", rules=[("2]", {" done": 1.0}), ("done", {eos: 1.0})])
    trace = generate(lm, "Q:", DecodeConfig())
    assert trace.text == " [Calculator(1 + 1) -> 2] done"
    assert len(trace.api_events) == 1
    # (b) disabled mode over 100 sessions
    words = [" a", " b", " c", " d", " done"]
    for s in range(100):
        rng = random.Random(s)
        rules = []
        for w in ["Q:", *words, "]"]:
            probs = {" [": 0.3 + 0.4 * rng.random()}
            for v in words:
                probs[v] = (1 - probs[" ["]) * rng.random() / len(words)
            rules.append((w.strip() or w, probs))
        slm = ScriptedLm(tok, [*rules, (" [", {"Calculator": 1.0})])
        t = generate(slm, "Q:", DecodeConfig(api_disabled=True, max_tokens=25))
        assert " [" not in t.text and not t.api_events
        # (d) the budget of one holds even when <API> is the argmax everywhere
        chained = ScriptedLm.chain(tok, " [", "Calculator(1 + 1) ->", rules=rules)
        t = generate(chained, "Q:", DecodeConfig(k_api=1 + s % 10, max_tokens=40))
        assert len(t.api_events) <= 1
    # (c) k_api = 1 equals plain greedy when <API> is never the argmax
    for s in range(30):
        rng = random.Random(1000 + s)
        rules = []
        for w in ["Q:", *words]:
            probs = {v: rng.random() for v in words}
            top = max(probs.values())
            total = sum(probs.values()) + top / 2
            probs = {v: p / total for v, p in probs.items()}
            probs[" ["] = 0.5 * top / total * rng.random()
            rules.append((w.strip() or w, probs))
        slm = ScriptedLm(tok, rules)
        ctx = tok.encode("Q:")
        for _ in range(20):
            ctx.append(int(np.argmax(slm.next_distribution(ctx))))
        plain = tok.decode(ctx[len(tok.encode("Q:")):])
        assert generate(slm, "Q:", DecodeConfig(k_api=1, max_tokens=20)).text == plain


# ---------------------------------------------------------------- 7

@criterion(7, "temporal question set")
def test_c7_dateset():
    items = generate_dateset(0)
    assert len(items) == 9400
    counts = {f: sum(1 for i in items if i.template_family == f) for f in ROW_SIZES}
    assert list(counts.values()) == [400, 800, 800, 400, 4000, 1800, 1200]
    for it in items:
        d = it.current_date
        assert temporal_gold(it.question, (d.year, d.month, d.day)) == it.gold
    import datetime as dt
    from apiaugment.tools.calendar import WEEKDAYS
    anchor = dt.date(2000, 1, 1)
    for k in range(-50 * 366, 50 * 366, 3):
        d = anchor + dt.timedelta(days=k)
        assert WEEKDAYS[d.weekday()] == weekday_name(d.year, d.month, d.day)


# ---------------------------------------------------------------- 8

@criterion(8, "lenient matchers at their boundaries")
def test_c8_matchers():
    assert lama_match("the city of lights Paris today", "Paris")
    assert not lama_match("a b c d e Paris", "Paris")
    assert predicted_number("The correct answer is 5+3=8") == 8
    assert math_match("The correct answer is 5+3=8", 8)
    w = [f"w{i}" for i in range(30)]
    assert qa_match(" ".join(w[:19] + ["gold"]), "gold")
    assert not qa_match(" ".join(w[:20] + ["gold"]), "gold")
    assert match("mlqa", " ".join(w[:9] + ["gold"]), ["gold"])
    assert not match("mlqa", " ".join(w[:10] + ["gold"]), ["gold"])


# ---------------------------------------------------------------- 9

_OUTPUTS = ("candidates.jsonl", "executed.jsonl", "scored.jsonl", "dataset.jsonl", "stats.json", "stats.txt")


@criterion(9, "byte-identical reruns across worker counts")
def test_c9_reproducibility(tmp_path):
    for name in ("tiny_corpus.jsonl", "scripted_rules.json", "qa_fixtures.jsonl"):
        shutil.copy(FIXTURES / name, tmp_path / name)
    seed_texts = [{"text": f"sold {a} apples and {b} pears, which is [Calculator({a} + {b})] {a + b} fruits"}
                  for a, b in [(3, 4), (5, 4), (2, 2)]]
    (tmp_path / "seed.jsonl").write_text("".join(json.dumps(t) + "\n" for t in seed_texts))
    variants = {
        "scripted": {"lm": {"kind": "scripted", "path": "scripted_rules.json"},
                     "tools": {"Calculator": {"sampling": {"tau_s": 0.05}}, "Calendar": {}}},
        "ngram": {"lm": {"alpha": 0.001, "extra_texts": "seed.jsonl"}, "qa": {"fixtures": "qa_fixtures.jsonl"},
                  "tools": {"Calculator": {}, "Calendar": {"sampling": {"tau_s": 0.0}}, "QA": {}}},
    }
    for name, extra in variants.items():
        runs = []
        for k, workers in enumerate((1, 1, 4)):
            raw = {"corpus": "tiny_corpus.jsonl", "output_dir": f"{name}{k}", "seed": 9, "workers": workers,
                   "calc_subsample": 1.0, **extra}
            (tmp_path / "cfg.json").write_text(json.dumps(raw))
            cfg = PipelineConfig.load(tmp_path / "cfg.json")
            run_pipeline(cfg)
            runs.append(cfg.out)
        assert (runs[0] / "candidates.jsonl").read_text(), name
        for out in runs[1:]:
            for f in _OUTPUTS:
                assert (out / f).read_bytes() == (runs[0] / f).read_bytes(), (name, f)


# ---------------------------------------------------------------- 10

@criterion(10, "prefilter and MT look-ahead fixtures")
def test_c10_gates():
    calc = json.loads((FIXTURES / "calculator_prefilter.json").read_text("utf-8"))
    assert len(calc) == 20
    for case in calc:
        res = prefilter_calculator(Document("d", case["text"]), subsample=0.0)
        assert (res.keep, res.reason) == (case["keep"], case["reason"]), case["text"][:60]
    mt = json.loads((FIXTURES / "mt_postfilter.json").read_text("utf-8"))
    assert len(mt) == 10
    for case in mt:
        assert mt_postfilter(case["text"], ApiCall("MT", case["input"]), case["char_pos"]) is case["keep"]


if __name__ == "__main__":
    import inspect
    import sys
    import tempfile
    for name, fn in list(globals().items()):
        if name.startswith("test_c"):
            with tempfile.TemporaryDirectory() as tmp:
                try:
                    fn(Path(tmp)) if "tmp_path" in inspect.signature(fn).parameters else fn()
                except BaseException:
                    pass
    print("\n".join(summary_lines()))
    sys.exit(0 if all(ok for ok, _ in RESULTS.values()) and len(RESULTS) == 10 else 1)
