"""Run the whole annotation pipeline on a five-document corpus.

A scripted model proposes calculator calls after "which is"; the filter keeps
the calls whose results make the following number easier to predict.

    python3 demos/annotate_tiny_corpus.py
"""

from __future__ import annotations

import json
import shutil
import tempfile
from pathlib import Path

from apiaugment.core import read_jsonl
from apiaugment.pipeline import PipelineConfig, run_pipeline

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        for name in ("tiny_corpus.jsonl", "scripted_rules.json"):
            shutil.copy(FIXTURES / name, tmp / name)
        config = {
            "corpus": "tiny_corpus.jsonl", "output_dir": "out", "seed": 11, "calc_subsample": 1.0,
            "lm": {"kind": "scripted", "path": "scripted_rules.json"},
            "tools": {"Calculator": {"sampling": {"tau_s": 0.05, "k": 5, "m": 6}}, "Calendar": {}},
        }
        (tmp / "config.json").write_text(json.dumps(config))
        cfg = PipelineConfig.load(tmp / "config.json")
        run_pipeline(cfg)

        print("candidate calls:")
        for c in read_jsonl(cfg.out / "candidates.jsonl"):
            print(f"  {c['doc_id']} @{c['token_pos']:>2}  {c['tool']}({c['input']})  p_api={c['p_api']:.2f}")
        print("\nscored:")
        for s in read_jsonl(cfg.out / "scored.jsonl"):
            print(f"  {s['doc_id']} {s['tool']}({s['input']}) -> {s['result']}  "
                  f"L+={s['l_plus']:.3f}  L-={s['l_minus']:.3f}  gain={s['gain']:+.3f}")
        print("\nannotated documents:")
        for d in read_jsonl(cfg.out / "dataset.jsonl"):
            print(f"  {d['doc_id']}: {d['text']}")
        print()
        print((cfg.out / "stats.txt").read_text(), end="")


if __name__ == "__main__":
    main()
