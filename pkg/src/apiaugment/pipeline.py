"""File-to-file pipeline stages: annotate -> execute -> filter.

Each stage reads the previous stage's JSONL and writes its own, so any stage
can be rerun on its own. Every document gets a seed derived from the global
seed and its id, which keeps results independent of the worker count.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import hashlib
import json
import logging
import os
import time
from collections import defaultdict
from collections.abc import Callable, Iterable, Iterator, Sequence
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import __version__
from .core import ApiCall, Document, ExecutedCall, TokenSequence, read_jsonl, write_jsonl
from .filtering import (DEFAULT_FILTER, FilterConfig, ScoredCall, WeightScheme, build_dataset,
                        score_document)
from .lm import LanguageModel, ReferenceNgramLm, ScriptedLm
from .prefilter import CALC_SUBSAMPLE, mt_postfilter, prefilter
from .sampling import DEFAULT_SAMPLING, SamplingConfig, ToolPrompt, sample_calls, sample_positions
from .tokenizer import Tokenizer, split_pieces
from .tools import ToolRegistry, build_registry
from .tools.clients import HttpServiceClient, MockServiceClient, ServiceClient
from .tools.search import SearchIndex

log = logging.getLogger(__name__)

CANDIDATE_SCHEMA = "candidate.v1"
EXECUTED_SCHEMA = "executed.v1"
SCORED_SCHEMA = "scored.v1"

ENV_ENDPOINTS = {"qa": "APIAUGMENT_QA_ENDPOINT", "mt": "APIAUGMENT_MT_ENDPOINT"}


class ConfigError(ValueError):
    pass


def _reject_unknown(d: dict, allowed: Iterable[str], where: str) -> None:
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def _dataclass_from(cls, d: dict | None, where: str):
    d = d or {}
    _reject_unknown(d, [f.name for f in dataclasses.fields(cls)], where)
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass(frozen=True)
class ToolConfig:
    sampling: SamplingConfig
    filter: FilterConfig
    enabled: bool = True


@dataclass(frozen=True)
class ServiceConfig:
    endpoint: str | None = None
    fixtures: str | None = None
    timeout: float = 10.0


@dataclass(frozen=True)
class LmConfig:
    kind: str = "ngram"          # "ngram" | "scripted"
    path: str | None = None      # saved n-gram dump, or scripted rules
    order: int = 3
    alpha: float = 0.1
    max_vocab: int | None = None
    train_on_prompts: bool = True  # lets the n-gram pick up call syntax from the demonstrations
    extra_texts: str | None = None  # JSONL of {"text"} records added to the n-gram's training data


@dataclass(frozen=True)
class PipelineConfig:
    corpus: tuple[str, ...]
    output_dir: str
    seed: int = 0
    workers: int = 1
    window: int = 1024
    decay: float = 0.2
    calc_subsample: float = CALC_SUBSAMPLE
    lm: LmConfig = LmConfig()
    tools: dict[str, ToolConfig] = field(default_factory=dict)
    search_index: str | None = None
    qa: ServiceConfig = ServiceConfig()
    mt: ServiceConfig = ServiceConfig()
    prompts_dir: str | None = None

    @classmethod
    def from_dict(cls, d: dict, base: str | Path = ".") -> "PipelineConfig":
        top = {f.name for f in dataclasses.fields(cls)}
        _reject_unknown(d, top, "config")
        if "corpus" not in d or "output_dir" not in d:
            raise ConfigError("config needs 'corpus' and 'output_dir'")
        base = Path(base)

        def path(p: str | None) -> str | None:
            return None if p is None else str((base / p).resolve())

        corpus = d["corpus"] if isinstance(d["corpus"], list) else [d["corpus"]]
        tools = {}
        tool_cfgs = d.get("tools", {name: {} for name in DEFAULT_SAMPLING})
        for name, tc in tool_cfgs.items():
            if name not in DEFAULT_SAMPLING:
                raise ConfigError(f"unknown tool {name!r}")
            _reject_unknown(tc, ("sampling", "filter", "enabled"), f"tools.{name}")
            sampling = {**dataclasses.asdict(DEFAULT_SAMPLING[name]), **tc.get("sampling", {})}
            filt = {**dataclasses.asdict(DEFAULT_FILTER[name]), **tc.get("filter", {})}
            tools[name] = ToolConfig(_dataclass_from(SamplingConfig, sampling, f"tools.{name}.sampling"),
                                     _dataclass_from(FilterConfig, filt, f"tools.{name}.filter"),
                                     bool(tc.get("enabled", True)))
        lm = _dataclass_from(LmConfig, d.get("lm"), "lm")
        if lm.kind not in ("ngram", "scripted"):
            raise ConfigError(f"lm.kind must be 'ngram' or 'scripted', not {lm.kind!r}")
        lm = dataclasses.replace(lm, path=path(lm.path), extra_texts=path(lm.extra_texts))
        services = {}
        for key in ("qa", "mt"):
            sc = _dataclass_from(ServiceConfig, d.get(key), key)
            endpoint = os.environ.get(ENV_ENDPOINTS[key]) or sc.endpoint
            services[key] = dataclasses.replace(sc, endpoint=endpoint, fixtures=path(sc.fixtures))
        cfg = cls(
            corpus=tuple(path(c) for c in corpus), output_dir=path(d["output_dir"]),
            seed=int(d.get("seed", 0)), workers=int(d.get("workers", 1)),
            window=int(d.get("window", 1024)), decay=float(d.get("decay", 0.2)),
            calc_subsample=float(d.get("calc_subsample", CALC_SUBSAMPLE)),
            lm=lm, tools=tools, search_index=path(d.get("search_index")),
            qa=services["qa"], mt=services["mt"], prompts_dir=path(d.get("prompts_dir")))
        if cfg.workers < 1 or cfg.window < 2:
            raise ConfigError("workers must be >= 1 and window >= 2")
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), base=Path(path).parent)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    def enabled_tools(self) -> list[str]:
        return sorted(t for t, tc in self.tools.items() if tc.enabled)


# ---------------------------------------------------------------- helpers

def doc_seed(seed: int, doc_id: str, tool: str) -> int:
    digest = hashlib.sha256(f"{seed}\x1f{doc_id}\x1f{tool}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def load_corpus(paths: Sequence[str]) -> list[Document]:
    docs, seen = [], set()
    for p in paths:
        for rec in read_jsonl(p):
            doc = Document.from_dict(rec)
            if doc.id in seen:
                raise ValueError(f"duplicate document id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    return docs


def corpus_hash(paths: Sequence[str]) -> str:
    h = hashlib.sha256()
    for p in paths:
        with open(p, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    return h.hexdigest()


def build_lm(cfg: PipelineConfig, docs: Sequence[Document]) -> LanguageModel:
    if cfg.lm.kind == "scripted":
        with open(cfg.lm.path, encoding="utf-8") as fh:
            rules = json.load(fh)
        pieces = {p for r in rules for p in r["probs"]}
        for d in docs:
            pieces.update(split_pieces(d.text))
        return ScriptedLm.from_json(Tokenizer(sorted(pieces)), cfg.lm.path)
    if cfg.lm.path:
        return ReferenceNgramLm.load(cfg.lm.path)
    texts = [d.text for d in docs]
    if cfg.lm.train_on_prompts:
        texts += [ToolPrompt.load(t, cfg.prompts_dir).template for t in cfg.enabled_tools()]
    if cfg.lm.extra_texts:
        texts += [r["text"] for r in read_jsonl(cfg.lm.extra_texts)]
    tok = Tokenizer.from_texts(texts, max_vocab=cfg.lm.max_vocab)
    return ReferenceNgramLm(tok, cfg.lm.order, cfg.lm.alpha).train(texts)


def build_tools(cfg: PipelineConfig) -> ToolRegistry:
    def client(sc: ServiceConfig) -> ServiceClient | None:
        if sc.endpoint:
            return HttpServiceClient(sc.endpoint, timeout=sc.timeout)
        if sc.fixtures:
            return MockServiceClient.from_jsonl(sc.fixtures)
        return None

    index = SearchIndex.load(cfg.search_index) if cfg.search_index else None
    return build_registry(index, client(cfg.qa), client(cfg.mt))


def parallel_map(fn: Callable[[Any], Any], items: Sequence[Any], workers: int,
                 initializer: Callable | None = None, initargs: tuple = ()) -> Iterator[Any]:
    """Ordered map, in-process for one worker and over a process pool otherwise."""
    if workers <= 1 or len(items) <= 1:
        if initializer is not None:
            initializer(*initargs)
        yield from map(fn, items)
        return
    chunk = max(1, len(items) // (workers * 4))
    with ProcessPoolExecutor(workers, initializer=initializer, initargs=initargs) as pool:
        yield from pool.map(fn, items, chunksize=chunk)


@dataclass
class StageReport:
    stage: str
    inputs: int = 0
    outputs: int = 0
    seconds: float = 0.0
    detail: dict = field(default_factory=dict)
    status: str = "ok"


def write_manifest(cfg: PipelineConfig, reports: Sequence[StageReport], name: str = "manifest.json") -> Path:
    cfg.out.mkdir(parents=True, exist_ok=True)
    try:
        chash = corpus_hash(cfg.corpus)
    except OSError:
        chash = None
    manifest = {
        "software_version": __version__,
        "config": cfg.to_dict(),
        "corpus_sha256": chash,
        "stages": [dataclasses.asdict(r) for r in reports],
        "created": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
    }
    path = cfg.out / name
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n", "utf-8")
    return path


# ---------------------------------------------------------------- annotate

_STATE: dict[str, Any] = {}


def _init_annotate(lm: LanguageModel, cfg: PipelineConfig, prompts: dict[str, ToolPrompt]) -> None:
    _STATE.update(lm=lm, cfg=cfg, prompts=prompts)


def annotate_document(doc: Document, lm: LanguageModel, cfg: PipelineConfig,
                      prompts: dict[str, ToolPrompt]) -> list[dict]:
    """Candidate call records for one document across every enabled tool."""
    x = TokenSequence.encode(lm.tokenizer, doc.text)
    offsets = lm.tokenizer.char_offsets(x.tokens)
    out = []
    for tool in cfg.enabled_tools():
        seed = doc_seed(cfg.seed, doc.id, tool)
        gate = prefilter(doc, tool, seed=cfg.seed, calc_subsample=cfg.calc_subsample)
        if not gate.keep:
            continue
        scfg = dataclasses.replace(cfg.tools[tool].sampling, seed=seed)
        for start in range(0, len(x), cfg.window):
            window = TokenSequence(x.tokens[start:start + cfg.window], x.tokenizer_id)
            for cand in sample_positions(lm, window, prompts[tool], scfg):
                for call in sample_calls(lm, window, cand.position, prompts[tool], scfg):
                    pos = start + cand.position
                    if tool == "MT" and not mt_postfilter(doc.text, call, offsets[pos]):
                        continue
                    out.append({
                        "schema": CANDIDATE_SCHEMA, "doc_id": doc.id, "tool": tool,
                        "token_pos": pos, "char_pos": offsets[pos], "input": call.input,
                        "p_api": cand.p,
                        "context_date": gate.date.isoformat() if gate.date else None,
                    })
    return out


def _annotate_worker(doc: Document) -> list[dict]:
    return annotate_document(doc, _STATE["lm"], _STATE["cfg"], _STATE["prompts"])


def run_annotate(cfg: PipelineConfig, lm: LanguageModel | None = None) -> StageReport:
    report = StageReport("annotate")
    t0 = time.perf_counter()
    cfg.out.mkdir(parents=True, exist_ok=True)
    try:
        docs = load_corpus(cfg.corpus)
    except (OSError, ValueError, KeyError) as exc:
        report.status = f"failed: {exc}"
        write_manifest(cfg, [report], "manifest.annotate.json")
        raise
    lm = lm or build_lm(cfg, docs)
    prompts = {t: ToolPrompt.load(t, cfg.prompts_dir) for t in cfg.enabled_tools()}
    per_tool: dict[str, int] = defaultdict(int)
    records = []
    for recs in parallel_map(_annotate_worker, docs, cfg.workers, _init_annotate, (lm, cfg, prompts)):
        for r in recs:
            per_tool[r["tool"]] += 1
        records.extend(recs)
    report.inputs = len(docs)
    report.outputs = write_jsonl(cfg.out / "candidates.jsonl", records)
    report.seconds = time.perf_counter() - t0
    report.detail = {"candidates_per_tool": dict(sorted(per_tool.items())),
                     "docs_per_second": len(docs) / report.seconds if report.seconds else None}
    log.info("annotate: %d documents -> %d candidates in %.1fs", len(docs), report.outputs, report.seconds)
    write_manifest(cfg, [report], "manifest.annotate.json")
    return report


# ---------------------------------------------------------------- execute

def execute_record(rec: dict, tools: ToolRegistry) -> dict:
    if rec.get("schema") != CANDIDATE_SCHEMA:
        raise ValueError(f"expected {CANDIDATE_SCHEMA} records, got {rec.get('schema')!r}")
    call = ApiCall(rec["tool"], rec["input"])
    if call.tool == "Calendar":
        if rec.get("context_date"):
            tools = tools.with_date(dt.date.fromisoformat(rec["context_date"]))
        else:
            tools = tools.without("Calendar")
    executed = tools.execute(call)
    return {**rec, "schema": EXECUTED_SCHEMA, "result": executed.result}


def run_execute(cfg: PipelineConfig, tools: ToolRegistry | None = None,
                candidates: str | Path | None = None) -> StageReport:
    report = StageReport("execute")
    t0 = time.perf_counter()
    tools = tools or build_tools(cfg)
    records = list(read_jsonl(candidates or cfg.out / "candidates.jsonl"))
    with ThreadPoolExecutor(cfg.workers) as pool:
        executed = list(pool.map(lambda r: execute_record(r, tools), records))
    report.inputs = len(records)
    report.outputs = write_jsonl(cfg.out / "executed.jsonl", executed)
    report.seconds = time.perf_counter() - t0
    report.detail = {"with_result": sum(r["result"] is not None for r in executed),
                     "no_result": sum(r["result"] is None for r in executed)}
    write_manifest(cfg, [report], "manifest.execute.json")
    return report


# ---------------------------------------------------------------- filter + merge

def _init_filter(lm: LanguageModel, scheme: WeightScheme) -> None:
    _STATE.update(lm=lm, scheme=scheme)


def _filter_worker(job: tuple[str, str, list[dict]]) -> list[ScoredCall]:
    doc_id, text, recs = job
    lm = _STATE["lm"]
    x = TokenSequence.encode(lm.tokenizer, text)
    calls = [(r["token_pos"], ExecutedCall(ApiCall(r["tool"], r["input"]), r["result"])) for r in recs]
    return score_document(lm, doc_id, x, calls, _STATE["scheme"])


def _scored_record(sc: ScoredCall) -> dict:
    return {"schema": SCORED_SCHEMA, "doc_id": sc.doc_id, "tool": sc.tool, "token_pos": sc.position,
            "char_pos": sc.char_pos, "input": sc.executed.call.input, "result": sc.executed.result,
            "l_plus": sc.l_plus, "l_minus": sc.l_minus, "gain": sc.gain}


def run_filter_merge(cfg: PipelineConfig, lm: LanguageModel | None = None,
                     executed: str | Path | None = None) -> StageReport:
    report = StageReport("filter")
    t0 = time.perf_counter()
    docs = load_corpus(cfg.corpus)
    lm = lm or build_lm(cfg, docs)
    by_doc: dict[str, list[dict]] = defaultdict(list)
    n_in = 0
    for rec in read_jsonl(executed or cfg.out / "executed.jsonl"):
        if rec.get("schema") != EXECUTED_SCHEMA:
            raise ValueError(f"expected {EXECUTED_SCHEMA} records, got {rec.get('schema')!r}")
        by_doc[rec["doc_id"]].append(rec)
        n_in += 1
    texts = {d.id: d.text for d in docs}
    jobs = [(doc_id, texts[doc_id], by_doc[doc_id]) for doc_id in sorted(by_doc)]
    scheme = WeightScheme(cfg.decay)
    scored: list[ScoredCall] = []
    for part in parallel_map(_filter_worker, jobs, cfg.workers, _init_filter, (lm, scheme)):
        scored.extend(part)
    write_jsonl(cfg.out / "scored.jsonl", map(_scored_record, scored))

    seqs = {doc_id: TokenSequence.encode(lm.tokenizer, texts[doc_id]) for doc_id in by_doc}
    configs = {t: tc.filter for t, tc in cfg.tools.items()}
    examples, stats = build_dataset(seqs, scored, configs)
    with open(cfg.out / "dataset.jsonl", "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(ex.to_json(lm.tokenizer) + "\n")
    (cfg.out / "stats.json").write_text(json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n", "utf-8")
    (cfg.out / "stats.txt").write_text(stats.table() + "\n", "utf-8")
    report.inputs = n_in
    report.outputs = len(examples)
    report.seconds = time.perf_counter() - t0
    report.detail = {"scored": len(scored), **stats.to_dict()}
    write_manifest(cfg, [report], "manifest.filter.json")
    return report


def run_pipeline(cfg: PipelineConfig, lm: LanguageModel | None = None,
                 tools: ToolRegistry | None = None) -> list[StageReport]:
    """All three stages, then one manifest for the whole run."""
    if lm is None:
        lm = build_lm(cfg, load_corpus(cfg.corpus))
    reports = [run_annotate(cfg, lm), run_execute(cfg, tools), run_filter_merge(cfg, lm)]
    write_manifest(cfg, reports)
    return reports
