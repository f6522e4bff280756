"""End-to-end run of the CLI on synthetic data, topic and risk tasks.

    python3 scripts/run_synthetic_pipeline.py /tmp/phyto-demo --n-docs 500

Writes a config.json into the directory, then runs every subcommand in order
and prints the topic and risk metric tables.
"""
import argparse
import json
import sys
import time
from pathlib import Path

from phytonlp.cli import main as cli
from phytonlp.synthetic import write_synthetic_inputs


def step(*argv):
    t0 = time.perf_counter()
    code = cli(list(argv))
    print(f"{argv[0]:<16} exit={code} {time.perf_counter() - t0:6.2f}s", file=sys.stderr)
    if code:
        sys.exit(code)


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("directory")
    p.add_argument("--n-docs", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--backend", default="offline-test")
    args = p.parse_args()

    root = Path(args.directory)
    write_synthetic_inputs(root / "inputs", args.n_docs, args.seed)
    config = {
        "paths": {
            "ocr_dir": "inputs/ocr",
            "xml_dir": "inputs/xml",
            "tags": "inputs/tags.csv",
            "thesaurus": "inputs/thesaurus.txt",
            "tweets": "inputs/tweets.jsonl",
            "risk": "inputs/risk.jsonl",
            "out": "work",
        },
        "dataset": {"n_docs": min(200, args.n_docs), "seed": args.seed},
        "backend": args.backend,
    }
    cfg = root / "config.json"
    cfg.write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    common = ["--config", str(cfg), "--jobs", str(args.jobs)]
    for command in ("ingest", "clean", "build-lm-corpus"):
        step(command, *common)
    for task in ("topic", "risk"):
        for command in ("build-dataset", "train", "evaluate"):
            step(command, *common, "--task", task)
    step("filter-tweets", *common)
    step("classify-tweets", *common, "--task", "topic")
    for task in ("topic", "risk"):
        print(f"\n{task}\n" + (root / "work" / "reports" / task / "metrics.txt").read_text(encoding="utf-8"))


if __name__ == "__main__":
    main()
