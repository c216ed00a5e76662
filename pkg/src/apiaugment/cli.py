"""Command line entry point: ``apiaugment <subcommand>``."""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from collections import defaultdict
from pathlib import Path

from .core import ApiCall, read_jsonl
from .dateset import generate_dateset, write_dateset
from .decoding import ApiEvent, DecodeConfig, DecodeTrace, generate, trace_stats
from .evalgen import match
from .lm import ReferenceNgramLm
from .pipeline import (PipelineConfig, build_lm, build_tools, load_corpus, run_annotate, run_execute,
                       run_filter_merge)
from .tokenizer import Tokenizer
from .tools import build_registry
from .tools.search import SearchIndex


def _cmd_index(args) -> int:
    index = SearchIndex.from_kilt(args.pages, k1=args.k1, b=args.b)
    index.save(args.output)
    print(f"indexed {index.n_docs} sections -> {args.output}")
    return 0


def _cmd_train_lm(args) -> int:
    texts = [d.text for d in load_corpus(args.corpus)]
    tok = Tokenizer.from_texts(texts, max_vocab=args.max_vocab)
    lm = ReferenceNgramLm(tok, args.order, args.alpha).train(texts)
    lm.save(args.output)
    print(f"trained order-{args.order} model on {len(texts)} documents, |V|={tok.vocab_size} -> {args.output}")
    return 0


def _stage(fn):
    def run(args) -> int:
        cfg = PipelineConfig.load(args.config)
        report = fn(cfg)
        print(json.dumps({"stage": report.stage, "inputs": report.inputs, "outputs": report.outputs,
                          "seconds": round(report.seconds, 3)}))
        return 0
    return run


def _cmd_stats(args) -> int:
    path = Path(args.path)
    if path.is_dir():
        print((path / "stats.txt").read_text("utf-8"), end="")
        return 0
    traces = [_trace_from_dict(r) for r in read_jsonl(path)]
    print(json.dumps(trace_stats(traces).to_dict(), indent=2))
    return 0


def _trace_from_dict(r: dict) -> DecodeTrace:
    events = tuple(ApiEvent(e["position"], ApiCall(e["tool"], e["input"]), e.get("result"))
                   for e in r.get("api_events", []))
    return DecodeTrace(r.get("text", ""), events, r.get("termination", ""))


def _cmd_generate(args) -> int:
    if args.lm:
        lm = ReferenceNgramLm.load(args.lm)
        cfg = PipelineConfig.load(args.config) if args.config else None
    else:
        cfg = PipelineConfig.load(args.config)
        lm = build_lm(cfg, load_corpus(cfg.corpus))
    tools = build_tools(cfg) if cfg else build_registry()
    if args.date_override:
        tools = tools.with_date(dt.date.fromisoformat(args.date_override))
    prompt = Path(args.prompt_file).read_text("utf-8") if args.prompt_file else sys.stdin.read()
    dcfg = DecodeConfig(k_api=args.k_api, max_api_calls_per_input=args.max_calls,
                        api_disabled=args.disable_tools, max_tokens=args.max_tokens, tools=tools)
    trace = generate(lm, prompt.rstrip("\n"), dcfg)
    if args.json:
        print(json.dumps(trace.to_dict(), ensure_ascii=False))
    else:
        print(trace.text)
    return 0


def _cmd_dateset(args) -> int:
    n = write_dateset(generate_dateset(args.seed), args.output)
    print(f"wrote {n} items -> {args.output}")
    return 0


def _cmd_eval(args) -> int:
    """Predictions JSONL ``{family, prediction, golds, [api_called]}`` -> accuracy per family."""
    hits: dict[str, list[bool]] = defaultdict(list)
    called: dict[str, list[tuple[bool, bool]]] = defaultdict(list)
    for r in read_jsonl(args.predictions):
        golds = r["golds"] if isinstance(r["golds"], list) else [r["golds"]]
        ok = match(r["family"], r["prediction"], [str(g) for g in golds])
        hits[r["family"]].append(ok)
        if "api_called" in r:
            called[r["family"]].append((bool(r["api_called"]), ok))
    out = {}
    for fam, oks in sorted(hits.items()):
        row = {"n": len(oks), "accuracy": 100.0 * sum(oks) / len(oks)}
        if called.get(fam):
            ac = [ok for c, ok in called[fam] if c]
            nc = [ok for c, ok in called[fam] if not c]
            row.update({
                "AC": 100.0 * sum(ac) / len(ac) if ac else None,
                "NC": 100.0 * sum(nc) / len(nc) if nc else None,
                "percent_called": 100.0 * len(ac) / len(called[fam]),
            })
        out[fam] = row
    print(json.dumps(out, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="apiaugment", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("index", help="build a BM25 index from KILT-style pages")
    s.add_argument("pages")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--k1", type=float, default=1.2)
    s.add_argument("--b", type=float, default=0.75)
    s.set_defaults(fn=_cmd_index)

    s = sub.add_parser("train-lm", help="fit the reference n-gram model on a corpus")
    s.add_argument("corpus", nargs="+")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--order", type=int, default=3)
    s.add_argument("--alpha", type=float, default=0.1)
    s.add_argument("--max-vocab", type=int)
    s.set_defaults(fn=_cmd_train_lm)

    for name, fn, text in (("annotate", run_annotate, "sample candidate calls"),
                           ("execute", run_execute, "run candidate calls"),
                           ("filter", run_filter_merge, "score, filter and merge into the dataset")):
        s = sub.add_parser(name, help=text)
        s.add_argument("config")
        s.set_defaults(fn=_stage(fn))

    s = sub.add_parser("stats", help="print dataset stats (output dir) or usage stats (traces JSONL)")
    s.add_argument("path")
    s.set_defaults(fn=_cmd_stats)

    s = sub.add_parser("generate", help="decode with tool interception")
    s.add_argument("--config")
    s.add_argument("--lm", help="saved n-gram model (otherwise built from the config)")
    s.add_argument("--prompt-file")
    s.add_argument("--k-api", type=int, default=10)
    s.add_argument("--max-calls", type=int, default=1)
    s.add_argument("--max-tokens", type=int, default=128)
    s.add_argument("--disable-tools", action="store_true")
    s.add_argument("--date-override", help="YYYY-MM-DD answered by the Calendar tool")
    s.add_argument("--json", action="store_true", help="print the full trace as JSON")
    s.set_defaults(fn=_cmd_generate)

    s = sub.add_parser("dateset", help="write the temporal question set")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=_cmd_dateset)

    s = sub.add_parser("eval", help="score predictions with the lenient matchers")
    s.add_argument("predictions")
    s.set_defaults(fn=_cmd_eval)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "generate" and not (args.lm or args.config):
        print("generate needs --lm or --config", file=sys.stderr)
        return 2
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
