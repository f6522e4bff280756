import json
import subprocess
import sys
from pathlib import Path

import pytest

from phytonlp.cli import main
from phytonlp.harness import make_tiny_masked_lm
from phytonlp.synthetic import write_synthetic_inputs


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def last_json(stream: str) -> dict:
    return json.loads(stream.strip().splitlines()[-1])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("ws")
    write_synthetic_inputs(root / "inputs", n_docs=40, seed=1, n_xml=5)
    cfg = {
        "paths": {
            "ocr_dir": "inputs/ocr", "xml_dir": "inputs/xml", "tags": "inputs/tags.csv",
            "thesaurus": "inputs/thesaurus.txt", "tweets": "inputs/tweets.jsonl", "risk": "inputs/risk.jsonl", "out": "work",
        },
        "dataset": {"n_docs": 30},
        "training": {"clf_epochs": 10, "clf_learning_rate": 1e-4},
    }
    (root / "config.json").write_text(json.dumps(cfg), encoding="utf-8")
    return root


PIPELINE = [
    ("ingest",),
    ("clean",),
    ("build-lm-corpus",),
    ("build-dataset",),
    ("train",),
    ("evaluate",),
    ("build-dataset", "--task", "risk"),
    ("train", "--task", "risk"),
    ("evaluate", "--task", "risk"),
    ("filter-tweets",),
    ("classify-tweets",),
]

PRIMARY = [
    "corpus.jsonl", "cleaned.jsonl", "clean_stats.json", "lm_corpus.txt",
    "datasets/topic/examples.jsonl", "datasets/topic/train.jsonl", "datasets/topic/test.jsonl", "datasets/topic/manifest.json",
    "models/topic/artifact.json", "models/topic/head_weight.npy", "models/topic/head_bias.npy", "models/topic/run_report.json",
    "reports/topic/metrics.json", "reports/topic/metrics.txt", "reports/risk/metrics.json",
    "tweets_filtered.jsonl", "tweets_classified.jsonl",
]


def _run_pipeline(capsys, root):
    cfg = str(root / "config.json")
    for step in PIPELINE:
        code, _, err = run(capsys, step[0], "--config", cfg, *step[1:])
        assert code == 0, (step, err)
    return {name: (root / "work" / name).read_bytes() for name in PRIMARY}


@pytest.mark.slow
def test_pipeline_end_to_end_and_byte_identical_rerun(capsys, workspace):
    first = _run_pipeline(capsys, workspace)
    metrics = json.loads(first["reports/topic/metrics.json"])
    assert set(metrics["weighted"]) == {"precision", "recall", "f1", "roc_auc"}
    assert metrics["per_label"].keys() == {"bioagressor", "disease"}
    assert "Weighted Average" in first["reports/topic/metrics.txt"].decode()
    second = _run_pipeline(capsys, workspace)
    assert second == first
    runs = sorted((workspace / "work" / "runs").iterdir())
    assert len(runs) == 2 * len(PIPELINE)
    manifest = json.loads((runs[0] / "manifest.json").read_text())
    assert manifest["command"] == "ingest" and manifest["status"] == "ok"
    assert manifest["config"]["dataset"]["n_docs"] == 30
    assert any(k.endswith("tags.csv") for k in manifest["inputs"])
    assert all(len(h) == 64 for h in manifest["inputs"].values())
    train_runs = [r for r in runs if json.loads((r / "manifest.json").read_text())["command"] == "train"]
    assert (train_runs[0] / "run_report.json").exists()


def test_predict_command(capsys, workspace):
    if not (workspace / "work" / "models" / "topic").exists():
        _run_pipeline(capsys, workspace)
    code, out, _ = run(capsys, "predict", "--config", str(workspace / "config.json"), "--text", "puceron sur blé", "--text", "", "--threshold", "0.3")
    assert code == 0
    rows = [json.loads(l) for l in out.splitlines()]
    assert len(rows) == 2 and rows[0]["threshold"] == 0.3
    assert (workspace / "work" / "predictions.jsonl").exists()


def test_evaluate_without_artifact_exit_3(capsys, tmp_path):
    code, _, err = run(capsys, "evaluate", "--out", str(tmp_path / "empty"))
    assert code == 3
    report = last_json(err)
    assert report["exit_code"] == 3 and report["error"]["kind"] == "missing-input"
    assert str(tmp_path / "empty" / "models" / "topic") in report["error"]["path"]
    assert "models/topic" in report["error"]["message"]


def test_missing_upstream_for_each_stage(capsys, tmp_path):
    for cmd in ("clean", "build-lm-corpus", "train", "classify-tweets"):
        code, _, err = run(capsys, cmd, "--out", str(tmp_path / "w"))
        assert code == 3, cmd
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"paths": {"ocr_dir": "nope"}}))
    code, _, err = run(capsys, "ingest", "--config", str(cfg))
    assert code == 3 and "nope" in last_json(err)["error"]["path"]


@pytest.mark.parametrize(
    "config, extra",
    [
        ({"paths": {"ocr_dir": 3}}, []),
        ({"unknown_section": {}}, []),
        ({"dataset": {"ratio": 1.5}}, []),
        ({"training": {"threshold": 1.0}}, []),
        ({"training": {"lr": 0.1}}, []),
        ({"cleaning": {"classification": {"min_line_words": 0}}}, []),
        ({}, ["--threshold", "0"]),
        ({"backend": "camembert"}, []),
    ],
)
def test_schema_violations_exit_2(capsys, tmp_path, config, extra):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(config))
    (tmp_path / "work" / "datasets" / "topic").mkdir(parents=True)
    (tmp_path / "work" / "datasets" / "topic" / "train.jsonl").write_text("")
    (tmp_path / "work" / "datasets" / "topic" / "manifest.json").write_text('{"split": {"seed": 0, "ratio": 0.8, "train_docs": []}}')
    code, _, err = run(capsys, "train", "--config", str(cfg), *extra)
    assert code == 2
    assert last_json(err)["error"]["type"] == "ConfigError"


def test_invalid_json_config_exit_2(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert run(capsys, "ingest", "--config", str(cfg))[0] == 2


def test_operation_error_exit_1_leaves_no_output(capsys, workspace, tmp_path):
    cfg = json.loads((workspace / "config.json").read_text())
    cfg["paths"] = {k: str(workspace / v) for k, v in cfg["paths"].items() if k != "out"}
    cfg["dataset"] = {"n_docs": 500}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "w"
    assert run(capsys, "ingest", "--config", str(path), "--out", str(out))[0] == 0
    assert run(capsys, "clean", "--config", str(path), "--out", str(out))[0] == 0
    code, _, err = run(capsys, "build-dataset", "--config", str(path), "--out", str(out))
    assert code == 1 and last_json(err)["error"]["kind"] == "insufficient-docs"
    assert not (out / "datasets").exists()
    failed = [json.loads((r / "manifest.json").read_text()) for r in (out / "runs").iterdir()]
    assert any(m["status"] == "error" and m["error"]["exit_code"] == 1 for m in failed)


def test_clean_command_matches_golden(capsys, tmp_path, fixtures_dir):
    docs = [json.loads(l) for l in (fixtures_dir / "clean_corpus.jsonl").read_text(encoding="utf-8").splitlines()]
    golden = {g["id"]: g for g in map(json.loads, (fixtures_dir / "clean_golden.jsonl").read_text(encoding="utf-8").splitlines())}
    ocr = tmp_path / "ocr"
    ocr.mkdir()
    for d in docs:
        (ocr / f"{d['id']}.txt").write_text(d["text"], encoding="utf-8")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"paths": {"ocr_dir": "ocr"}}))
    assert run(capsys, "ingest", "--config", str(cfg))[0] == 0
    assert run(capsys, "clean", "--config", str(cfg), "--jobs", "2")[0] == 0
    cleaned = [json.loads(l) for l in (tmp_path / "work" / "cleaned.jsonl").read_text(encoding="utf-8").splitlines()]
    assert len(cleaned) == 100
    for c in cleaned:
        assert c["text"] == golden[c["id"]]["text"]
        assert c["removed_stats"] == golden[c["id"]]["removed_stats"]
    stats = json.loads((tmp_path / "work" / "clean_stats.json").read_text())
    assert stats["removed_stats"]["spaced_runs"] == sum(g["removed_stats"]["spaced_runs"] for g in golden.values())


def test_data_dir_env(capsys, tmp_path, monkeypatch):
    write_synthetic_inputs(tmp_path, n_docs=3, seed=0, n_xml=1)
    monkeypatch.setenv("PHYTO_DATA_DIR", str(tmp_path))
    cfg = tmp_path / "elsewhere" / "c.json"
    cfg.parent.mkdir()
    cfg.write_text(json.dumps({"paths": {"ocr_dir": "ocr"}}))
    assert run(capsys, "ingest", "--config", str(cfg))[0] == 0
    assert (tmp_path / "work" / "corpus.jsonl").exists()


def test_finetune_then_train_with_finetuned_encoder(capsys, workspace, tmp_path):
    words = (workspace / "work" / "lm_corpus.txt").read_text(encoding="utf-8").split() if (workspace / "work" / "lm_corpus.txt").exists() else []
    words += ["puceron", "mildiou", "parcelle"]
    model = make_tiny_masked_lm(tmp_path / "tiny", words, hidden_size=16, layers=1)
    cfg = json.loads((workspace / "config.json").read_text())
    cfg["paths"] = {k: str(workspace / v) for k, v in cfg["paths"].items() if k != "out"}
    cfg["dataset"] = {"n_docs": 10}
    cfg["training"] = {"clf_epochs": 1, "lm_epochs": 1, "max_sequence_length": 64}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    base = ["--config", str(path), "--out", str(tmp_path / "w")]
    for step in (["ingest"], ["clean"], ["build-lm-corpus"], ["build-dataset"]):
        assert run(capsys, *step, *base)[0] == 0
    assert run(capsys, "train", *base, "--backend", "finetuned")[0] == 3  # no fine-tuned encoder yet
    code, _, err = run(capsys, "finetune-lm", *base, "--backend", f"pretrained:{model}")
    assert code == 0, err
    report = json.loads((tmp_path / "w" / "lm_report.json").read_text())
    assert report["validation_loss_after"] <= report["validation_loss_before"]
    assert run(capsys, "finetune-lm", *base, "--backend", "offline-test")[0] == 1  # unsupported
    code, _, err = run(capsys, "train", *base, "--backend", "finetuned")
    assert code == 0, err
    assert (tmp_path / "w" / "models" / "topic" / "encoder").is_dir()
    assert run(capsys, "evaluate", *base)[0] == 0


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "phytonlp", "evaluate", "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 3
    assert json.loads(proc.stderr.strip().splitlines()[-1])["status"] == "error"


def test_predict_input_file_lines(capsys, workspace, tmp_path):
    if not (workspace / "work" / "models" / "topic").exists():
        _run_pipeline(capsys, workspace)
    src = tmp_path / "texts.txt"
    src.write_text("puceron sur blé\nmildiou\u2028sur vigne\n\nrouille\n", encoding="utf-8")
    code, out, _ = run(capsys, "predict", "--config", str(workspace / "config.json"), "--input", str(src))
    assert code == 0
    rows = [json.loads(l) for l in out.rstrip("\n").split("\n")]
    assert [r["id"] for r in rows] == ["0", "1", "2", "3"]
    assert rows[1]["text"] == "mildiou\u2028sur vigne" and rows[2]["text"] == ""
