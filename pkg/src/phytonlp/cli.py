"""Command-line pipeline: ingest → clean → build → train → evaluate, plus tweet filtering.

Primary outputs live at stable paths under the output directory (``--out``);
each invocation also writes ``runs/<timestamp>-<hash>/manifest.json`` with
the resolved config, input and output hashes and any run report. Primary
outputs contain no timestamps, so re-running a command with the same config
and inputs reproduces them byte for byte.

Exit codes: 0 success, 1 operation error, 2 config/schema error, 3 missing
upstream input.
"""
from __future__ import annotations

import argparse
import copy
import datetime as _dt
import hashlib
import json
import logging
import os
import shutil
import sys
from pathlib import Path

import jsonschema

from . import __version__
from .builder import (
    DatasetSplit,
    build_lm_corpus,
    build_topic_dataset,
    load_risk_annotations,
    read_examples,
    split_dataset,
    write_examples,
    write_lm_corpus,
)
from .clean import STAT_KEYS, CleanedDocument, CleaningConfig, clean_documents
from .errors import ConfigError, IngestError, PhytoError, PredictError
from .fileio import atomic_write_text, dumps, read_json, read_jsonl, replace_dir, sha256_path, write_json, write_jsonl
from .ingest import catalog_index, load_bulletin_dir, load_tag_catalog, load_thesaurus, read_corpus, write_corpus
from .metrics import evaluate
from .social import TweetClassification, build_keyword_filter, classify_tweets, filter_tweets, load_tweets

log = logging.getLogger("phytonlp")

EXIT_OK, EXIT_OPERATION, EXIT_SCHEMA, EXIT_MISSING = 0, 1, 2, 3
TASKS = ("topic", "risk")

_cleaning_schema = {
    "type": "object",
    "properties": {
        "stopwords": {"oneOf": [{"type": "string"}, {"type": "array", "items": {"type": "string"}}]},
        "min_line_words": {"type": "integer", "minimum": 1},
        "remove_stopwords": {"type": "boolean"},
        "drop_short_lines": {"type": "boolean"},
        "strip_punctuation": {"type": "boolean"},
        "remove_spaced_runs": {"type": "boolean"},
        "collapse_repeats": {"type": "boolean"},
        "spaced_run_min": {"type": "integer", "minimum": 2},
        "url_rule": {"type": "string"},
        "phone_rule": {"type": "string"},
        "spaced_letters_rule": {"type": "string"},
    },
    "additionalProperties": False,
}
_path = {"type": ["string", "null"]}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "paths": {
            "type": "object",
            "properties": {k: _path for k in ("xml_dir", "ocr_dir", "tags", "thesaurus", "tweets", "risk", "out")},
            "additionalProperties": False,
        },
        "ingest": {
            "type": "object",
            "properties": {"paragraph_elements": {"type": "array", "items": {"type": "string"}, "minItems": 1}},
            "additionalProperties": False,
        },
        "cleaning": {
            "type": "object",
            "properties": {k: _cleaning_schema for k in ("classification", "lm", "tweets")},
            "additionalProperties": False,
        },
        "dataset": {
            "type": "object",
            "properties": {
                "task": {"enum": list(TASKS)},
                "n_docs": {"type": "integer", "minimum": 1},
                "target_chunks": {"type": "integer", "minimum": 1},
                "min_words": {"type": "integer", "minimum": 1},
                "max_words": {"type": "integer", "minimum": 1},
                "ratio": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "seed": {"type": "integer"},
                "lm_include_ocr": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "training": {"type": "object"},
        "backend": {"type": "string"},
        "backend_dim": {"type": "integer", "minimum": 1},
        "evaluation": {
            "type": "object",
            "properties": {"auc_average": {"enum": ["weighted", "micro"]}},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

DEFAULT_CONFIG = {
    "paths": {"xml_dir": None, "ocr_dir": None, "tags": None, "thesaurus": None, "tweets": None, "risk": None, "out": None},
    "ingest": {"paragraph_elements": ["p", "paragraphe", "texte"]},
    "cleaning": {"classification": {}, "lm": {"remove_stopwords": False}, "tweets": {
        "remove_stopwords": False, "drop_short_lines": False, "strip_punctuation": False,
        "remove_spaced_runs": False, "collapse_repeats": False,
    }},
    "dataset": {"task": "topic", "n_docs": 200, "target_chunks": 4000, "min_words": 5, "max_words": 256,
                "ratio": 0.8, "seed": 0, "lm_include_ocr": False},
    "training": {},
    "backend": "offline-test",
    "backend_dim": 512,
    "evaluation": {"auc_average": "weighted"},
}


class MissingInput(PhytoError):
    """An upstream file or directory the command needs does not exist."""

    def __init__(self, path, hint: str = ""):
        super().__init__("missing-input", f"{path} does not exist" + (f" ({hint})" if hint else ""))
        self.path = str(path)


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "training":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


class Run:
    """Resolved configuration plus the bookkeeping for one command invocation."""

    def __init__(self, command: str, config: dict, config_dir: Path, jobs: int):
        self.command = command
        self.config = config
        self.jobs = jobs
        data_root = os.environ.get("PHYTO_DATA_DIR")
        self.root = Path(data_root) if data_root else config_dir
        out = config["paths"].get("out")
        self.out = self.resolve(out) if out else self.root / "work"
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}
        self.summary: dict = {}
        self.report: dict | None = None

    def resolve(self, p) -> Path:
        p = Path(p).expanduser()
        return p if p.is_absolute() else self.root / p

    def input_path(self, key: str) -> Path:
        value = self.config["paths"].get(key)
        if not value:
            raise ConfigError("schema", f"paths.{key} is required for '{self.command}'")
        return self.need(self.resolve(value), f"paths.{key}")

    def need(self, path: Path, hint: str = "") -> Path:
        if not path.exists():
            raise MissingInput(path, hint)
        self.inputs[str(path)] = sha256_path(path)
        return path

    def produced(self, path: Path) -> Path:
        self.outputs[str(path)] = sha256_path(path)
        return path

    # Workspace layout.
    @property
    def corpus(self) -> Path:
        return self.out / "corpus.jsonl"

    @property
    def cleaned(self) -> Path:
        return self.out / "cleaned.jsonl"

    @property
    def lm_corpus(self) -> Path:
        return self.out / "lm_corpus.txt"

    @property
    def encoder_dir(self) -> Path:
        return self.out / "encoder"

    def dataset_dir(self, task: str) -> Path:
        return self.out / "datasets" / task

    def model_dir(self, task: str) -> Path:
        return self.out / "models" / task

    def report_dir(self, task: str) -> Path:
        return self.out / "reports" / task

    def cleaning(self, stage: str) -> CleaningConfig:
        return CleaningConfig.from_dict(self.config["cleaning"][stage])

    def write_manifest(self, status: str, error: dict | None = None) -> Path:
        stamp = _dt.datetime.now(_dt.timezone.utc)
        body = {
            "command": self.command,
            "config": self.config,
            "inputs": dict(sorted(self.inputs.items())),
        }
        digest = hashlib.sha256(dumps(body).encode()).hexdigest()[:10]
        run_dir = self.out / "runs" / f"{stamp.strftime('%Y%m%dT%H%M%S%fZ')}-{digest}"
        manifest = dict(
            body,
            created_at=stamp.isoformat(),
            status=status,
            outputs=dict(sorted(self.outputs.items())),
            summary=self.summary,
            package_version=__version__,
        )
        if error:
            manifest["error"] = error
        write_json(run_dir / "manifest.json", manifest)
        if self.report is not None:
            write_json(run_dir / "run_report.json", self.report)
        return run_dir


# Commands. Each reads its inputs, validates them, computes everything in
# memory and only then writes outputs atomically.

def cmd_ingest(run: Run, args) -> None:
    paths = run.config["paths"]
    if not paths.get("xml_dir") and not paths.get("ocr_dir"):
        raise ConfigError("schema", "ingest needs paths.xml_dir and/or paths.ocr_dir")
    xml_dir = run.input_path("xml_dir") if paths.get("xml_dir") else None
    ocr_dir = run.input_path("ocr_dir") if paths.get("ocr_dir") else None
    catalog = catalog_index(load_tag_catalog(run.input_path("tags"))) if paths.get("tags") else None
    if paths.get("thesaurus"):
        load_thesaurus(run.input_path("thesaurus"))  # validated early; used by filter-tweets
    docs = load_bulletin_dir(xml_dir, ocr_dir, frozenset(run.config["ingest"]["paragraph_elements"]), catalog)
    if not docs:
        raise IngestError("empty", "no .xml or .txt bulletins found")
    write_corpus(docs, run.corpus)
    run.produced(run.corpus)
    by_kind: dict[str, int] = {}
    for d in docs:
        by_kind[d.source_kind.value] = by_kind.get(d.source_kind.value, 0) + 1
    run.summary = {
        "n_documents": len(docs),
        "by_source_kind": by_kind,
        "n_empty": sum(d.empty for d in docs),
        "n_tagged": sum(1 for d in docs if catalog and d.id in catalog),
    }


def cmd_clean(run: Run, args) -> None:
    docs = read_corpus(run.need(run.corpus, "run 'ingest' first"))
    cfg = run.cleaning("classification")
    cleaned = clean_documents(docs, cfg, jobs=run.jobs)
    totals = {k: sum(c.removed_stats[k] for c in cleaned) for k in STAT_KEYS}
    stats = {
        "cleaning_config": cfg.to_dict(),
        "n_documents": len(cleaned),
        "n_empty": sum(c.empty for c in cleaned),
        "removed_stats": totals,
    }
    write_jsonl(run.cleaned, (c.to_dict() for c in cleaned))
    write_json(run.out / "clean_stats.json", stats)
    run.produced(run.cleaned)
    run.produced(run.out / "clean_stats.json")
    run.summary = {k: v for k, v in stats.items() if k != "cleaning_config"}


def cmd_build_lm_corpus(run: Run, args) -> None:
    docs = read_corpus(run.need(run.corpus, "run 'ingest' first"))
    lines = build_lm_corpus(docs, run.cleaning("lm"), include_ocr=run.config["dataset"]["lm_include_ocr"])
    write_lm_corpus(lines, run.lm_corpus)
    run.produced(run.lm_corpus)
    run.summary = {"n_lines": len(lines)}


def cmd_build_dataset(run: Run, args) -> None:
    ds = run.config["dataset"]
    task = ds["task"]
    if task == "topic":
        cleaned = [CleanedDocument.from_dict(r) for r in read_jsonl(run.need(run.cleaned, "run 'clean' first"))]
        catalog = catalog_index(load_tag_catalog(run.input_path("tags")))
        topic = build_topic_dataset(
            cleaned, catalog, ds["n_docs"], ds["target_chunks"], ds["seed"], ds["min_words"], ds["max_words"]
        )
        examples, manifest = topic.chunks, topic.manifest
    else:
        annotations = load_risk_annotations(run.input_path("risk"))
        examples = [a.to_chunk(i) for i, a in enumerate(annotations)]
        manifest = {"task": "risk", "n_sentences": len(examples)}
    split = split_dataset(examples, ds["ratio"], ds["seed"])
    manifest = dict(manifest, split=split.manifest())
    d = run.dataset_dir(task)
    write_examples(d / "examples.jsonl", examples)
    write_examples(d / "train.jsonl", split.train)
    write_examples(d / "test.jsonl", split.test)
    write_json(d / "manifest.json", manifest)
    for name in ("examples.jsonl", "train.jsonl", "test.jsonl", "manifest.json"):
        run.produced(d / name)
    run.summary = {"task": task, "n_examples": len(examples), "n_train": len(split.train), "n_test": len(split.test)}


def _training_config(run: Run, stage: str, args):
    from .harness import TrainingConfig

    values = dict(run.config["training"], stage=stage)
    if args.seed is not None:
        values["seed"] = args.seed
    if args.threshold is not None:
        values["threshold"] = args.threshold
    return TrainingConfig.from_dict(values)


def _backend(run: Run, cfg):
    from .harness import make_backend

    spec = run.config["backend"]
    if spec == "finetuned":
        spec = "pretrained:" + str(run.need(run.encoder_dir, "run 'finetune-lm' first"))
    elif spec.startswith("pretrained:"):
        path = run.resolve(spec.split(":", 1)[1])
        spec = f"pretrained:{run.need(path, 'pretrained model directory')}"
    return make_backend(spec, cfg.max_sequence_length, run.config["backend_dim"], cfg.seed)


def cmd_finetune_lm(run: Run, args) -> None:
    from .harness import finetune_language_model

    lines = run.need(run.lm_corpus, "run 'build-lm-corpus' first").read_text(encoding="utf-8").split("\n")
    cfg = _training_config(run, "lm_finetune", args)
    backend = _backend(run, cfg)
    result = finetune_language_model(backend, lines, cfg)
    tmp = run.out / ".encoder.tmp"
    shutil.rmtree(tmp, ignore_errors=True)
    result.backend.save(tmp)
    replace_dir(tmp, run.encoder_dir)
    write_json(run.out / "lm_report.json", result.report)
    run.produced(run.encoder_dir)
    run.produced(run.out / "lm_report.json")
    run.report = result.report
    run.summary = {k: result.report[k] for k in ("validation_loss_before", "validation_loss_after")}


def cmd_train(run: Run, args) -> None:
    from .harness import save_artifact, train_classifier

    task = run.config["dataset"]["task"]
    d = run.dataset_dir(task)
    train = read_examples(run.need(d / "train.jsonl", "run 'build-dataset' first"))
    split_manifest = read_json(run.need(d / "manifest.json", "run 'build-dataset' first"))["split"]
    split = DatasetSplit(train, [], split_manifest["seed"], split_manifest["ratio"], split_manifest["train_docs"], [])
    cfg = _training_config(run, "classify", args)
    artifact = train_classifier(_backend(run, cfg), split, cfg)
    save_artifact(artifact, run.model_dir(task))
    run.produced(run.model_dir(task))
    run.report = artifact.run_report
    run.summary = {"task": task, "best_epoch": artifact.best_epoch, "best_f1": artifact.best_f1}


def _load_model(run: Run, task: str):
    from .harness import load_artifact

    return load_artifact(run.need(run.model_dir(task), "run 'train' first"))


def cmd_evaluate(run: Run, args) -> None:
    task = run.config["dataset"]["task"]
    artifact = _load_model(run, task)
    test = read_examples(run.need(run.dataset_dir(task) / "test.jsonl", "run 'build-dataset' first"))
    report = evaluate(artifact, test, args.threshold, run.config["evaluation"]["auc_average"])
    d = run.report_dir(task)
    write_json(d / "metrics.json", report.to_dict())
    atomic_write_text(d / "metrics.txt", report.to_table())
    run.produced(d / "metrics.json")
    run.produced(d / "metrics.txt")
    run.summary = {"task": task, "weighted": report.weighted, "n_examples": report.n_examples}


def cmd_predict(run: Run, args) -> None:
    task = run.config["dataset"]["task"]
    artifact = _load_model(run, task)
    if args.input:
        src = run.need(Path(args.input))
        if src.suffix == ".jsonl":
            rows = read_jsonl(src)
            items = [(str(r.get("id", i)), str(r.get("text", ""))) for i, r in enumerate(rows)]
        else:
            lines = src.read_text(encoding="utf-8").split("\n")
            if lines[-1] == "":
                lines.pop()
            items = [(str(i), line) for i, line in enumerate(lines)]
    else:
        items = [(str(i), t) for i, t in enumerate(args.text or [])]
    if not items:
        raise ConfigError("schema", "predict needs --text or --input")
    results = artifact.predict_batch([t for _, t in items], args.threshold)
    records = [dict(r.to_dict(), id=i, text=t) for (i, t), r in zip(items, results)]
    out = run.out / "predictions.jsonl"
    write_jsonl(out, records)
    run.produced(out)
    for rec in records:
        print(json.dumps(rec, ensure_ascii=False, sort_keys=True))
    run.summary = {"n_predictions": len(records)}


def cmd_filter_tweets(run: Run, args) -> None:
    records = load_tweets(run.input_path("tweets"))
    thesaurus = load_thesaurus(run.input_path("thesaurus")) if run.config["paths"].get("thesaurus") else ()
    catalog = load_tag_catalog(run.input_path("tags")) if run.config["paths"].get("tags") else ()
    kw = build_keyword_filter(thesaurus, catalog)
    kept = filter_tweets(records, kw)
    out = run.out / "tweets_filtered.jsonl"
    write_jsonl(out, (r.to_dict() for r in kept))
    run.produced(out)
    run.summary = {"n_input": len(records), "n_kept": len(kept), "n_keywords": len(kw.keywords)}


def cmd_classify_tweets(run: Run, args) -> None:
    src = run.need(run.out / "tweets_filtered.jsonl", "run 'filter-tweets' first")
    records = load_tweets(src)
    task = run.config["dataset"]["task"]
    try:
        artifact = _load_model(run, task)
    except PredictError as e:
        # Unloadable artifact: every record fails, the batch still completes.
        results = [TweetClassification(r, error=str(e)) for r in records]
        summary = {"n_records": len(records), "n_errors": len(records), "errors_by_kind": {e.kind: len(records)}}
    else:
        results, summary = classify_tweets(records, artifact, args.threshold, run.cleaning("tweets"))
    out = run.out / "tweets_classified.jsonl"
    write_jsonl(out, (r.to_dict() for r in results))
    run.produced(out)
    run.summary = summary
    if summary["n_errors"]:
        raise PredictError("batch", f"{summary['n_errors']} of {summary['n_records']} tweets failed; see {out}")


COMMANDS = {
    "ingest": (cmd_ingest, "load XML/OCR bulletins and the tag catalog into corpus.jsonl"),
    "clean": (cmd_clean, "apply the cleaning rules, write cleaned.jsonl and clean_stats.json"),
    "build-lm-corpus": (cmd_build_lm_corpus, "write lm_corpus.txt, one cleaned paragraph per line"),
    "build-dataset": (cmd_build_dataset, "build the topic or risk dataset and its document-level split"),
    "finetune-lm": (cmd_finetune_lm, "masked-LM adaptation of a pretrained encoder"),
    "train": (cmd_train, "train the classification head, keep the best validation epoch"),
    "evaluate": (cmd_evaluate, "score the trained model on the test side"),
    "predict": (cmd_predict, "classify texts given with --text or --input"),
    "filter-tweets": (cmd_filter_tweets, "keep tweets mentioning a thesaurus concept or tag"),
    "classify-tweets": (cmd_classify_tweets, "classify the filtered tweets"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="overrides dataset.seed and training.seed")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for cleaning")
    common.add_argument("--threshold", type=float, help="decision threshold in (0, 1)")
    common.add_argument("--backend", help="'offline-test', 'pretrained:<dir>' or 'finetuned'")
    common.add_argument("--out", help="output directory (default: <data root>/work)")
    common.add_argument("--task", choices=TASKS, help="overrides dataset.task")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="phytonlp", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"phytonlp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if name == "predict":
            p.add_argument("--text", action="append", help="text to classify (repeatable)")
            p.add_argument("--input", help="plain-text file (one text per line) or JSONL with 'text'")
    return parser


def load_config(args) -> tuple[dict, Path]:
    user: dict = {}
    config_dir = Path.cwd()
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise MissingInput(path, "--config")
        try:
            user = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError("schema", f"{path}: invalid JSON ({e.msg} at line {e.lineno})") from None
        config_dir = path.resolve().parent
    try:
        jsonschema.validate(user, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError("schema", f"config {where}: {e.message}") from None
    config = _merge(DEFAULT_CONFIG, user)
    # Flags win over file values.
    if args.seed is not None:
        config["dataset"]["seed"] = args.seed
        config["training"]["seed"] = args.seed
    if args.threshold is not None:
        if not 0.0 < args.threshold < 1.0:
            raise ConfigError("schema", f"--threshold must be in (0, 1), got {args.threshold}")
        config["training"]["threshold"] = args.threshold
    if args.backend:
        config["backend"] = args.backend
    if args.out:
        config["paths"]["out"] = str(Path(args.out).resolve())
    if args.task:
        config["dataset"]["task"] = args.task
    if args.jobs < 1:
        raise ConfigError("schema", "--jobs must be >= 1")
    # Validate the nested dataclass sections before any side effect.
    from .harness import TrainingConfig

    for stage in ("classification", "lm", "tweets"):
        CleaningConfig.from_dict(config["cleaning"][stage])
    TrainingConfig.from_dict(dict(config["training"], stage="classify"))
    ds = config["dataset"]
    if ds["min_words"] > ds["max_words"]:
        raise ConfigError("schema", "dataset.min_words must not exceed dataset.max_words")
    return config, config_dir


def _exit_code(err: PhytoError) -> int:
    if isinstance(err, MissingInput) or err.kind == "not-found":
        return EXIT_MISSING
    if isinstance(err, ConfigError) or err.kind == "schema":
        return EXIT_SCHEMA
    return EXIT_OPERATION


def _report_error(command: str | None, err: PhytoError, code: int) -> None:
    report = {
        "status": "error",
        "command": command,
        "exit_code": code,
        "error": {"type": type(err).__name__, "kind": err.kind, "message": err.message},
    }
    if isinstance(err, MissingInput):
        report["error"]["path"] = err.path
    print(json.dumps(report, ensure_ascii=False, sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    run = None
    try:
        config, config_dir = load_config(args)
        run = Run(args.command, config, config_dir, args.jobs)
        COMMANDS[args.command][0](run, args)
    except PhytoError as err:
        code = _exit_code(err)
        _report_error(args.command, err, code)
        if run is not None and code != EXIT_SCHEMA:
            try:
                run.write_manifest("error", {"kind": err.kind, "message": err.message, "exit_code": code})
            except OSError:
                pass
        return code
    run_dir = run.write_manifest("ok")
    print(json.dumps({"status": "ok", "command": args.command, "run_dir": str(run_dir), "summary": run.summary},
                     ensure_ascii=False, sort_keys=True), file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
