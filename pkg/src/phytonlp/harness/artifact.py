"""Trained classifier artifacts, thresholded predictions and their on-disk format.

Directory layout::

    artifact.json       format version, backend reference, config, best epoch/F1
    head_weight.npy     float32 (n_labels, dim)
    head_bias.npy       float32 (n_labels,)
    run_report.json     per-epoch training record
    encoder/            saved checkpoint, pretrained backends only
"""
from __future__ import annotations

import json
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..builder import LABELS, LabelSet
from ..errors import ConfigError, PhytoError, PredictError
from ..fileio import dumps, replace_dir, sha256_file
from .backends import EncoderBackend, load_backend
from .config import TrainingConfig

FORMAT_VERSION = 1
RMS_EPS = 1e-12


@dataclass(frozen=True)
class PredictionResult:
    probabilities: dict[str, float]
    decided: LabelSet
    threshold_used: float

    def to_dict(self) -> dict:
        return {
            "probabilities": dict(self.probabilities),
            "decided": self.decided.names(),
            "threshold": self.threshold_used,
        }


def decide(probabilities: Mapping[str, float], threshold: float) -> LabelSet:
    """A label is kept when its probability reaches the threshold."""
    return LabelSet(**{label: probabilities[label] >= threshold for label in LABELS})


def rms_normalize(features: np.ndarray) -> np.ndarray:
    """Scale each row to unit root-mean-square; zero rows stay zero."""
    f = features.astype(np.float32)
    rms = np.sqrt(np.mean(f * f, axis=1, keepdims=True) + np.float32(RMS_EPS))
    return f / rms


def head_probabilities(features: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Classification head: RMS normalization, linear map, logistic link per label."""
    logits = rms_normalize(features) @ weight.T + bias
    return 1.0 / (1.0 + np.exp(-logits.astype(np.float64)))


@dataclass
class ModelArtifact:
    backend: EncoderBackend
    head_weight: np.ndarray
    head_bias: np.ndarray
    config: TrainingConfig
    best_epoch: int
    best_f1: float
    label_order: tuple[str, ...] = LABELS
    run_report: dict = field(default_factory=dict)

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        w, b = self.head_weight, self.head_bias
        if w.ndim != 2 or w.shape != (len(self.label_order), self.backend.dim) or b.shape != (len(self.label_order),):
            raise PredictError(
                "artifact",
                f"head shape {w.shape}/{b.shape} does not fit {len(self.label_order)} labels x {self.backend.dim} features",
            )
        if not np.all(np.isfinite(w)) or not np.all(np.isfinite(b)):
            raise PredictError("artifact", "head parameters are not finite")
        return head_probabilities(self.backend.encode(list(texts)), w, b)

    def predict(self, text: str, threshold: float | None = None) -> PredictionResult:
        return self.predict_batch([text], threshold)[0]

    def predict_batch(self, texts: Sequence[str], threshold: float | None = None) -> list[PredictionResult]:
        thr = self.config.threshold if threshold is None else threshold
        if not 0.0 < thr < 1.0:
            raise ConfigError("schema", f"threshold must be strictly between 0 and 1, got {thr}")
        out = []
        for row in self.predict_proba(texts):
            probs = {label: float(p) for label, p in zip(self.label_order, row)}
            out.append(PredictionResult(probs, decide(probs, thr), thr))
        return out


def predict(artifact: ModelArtifact, text: str, threshold: float | None = None) -> PredictionResult:
    return artifact.predict(text, threshold)


def save_artifact(artifact: ModelArtifact, path) -> None:
    """Write the artifact directory atomically. Identical artifacts give identical files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{path.name}.", dir=path.parent))
    try:
        np.save(tmp / "head_weight.npy", np.ascontiguousarray(artifact.head_weight, dtype=np.float32))
        np.save(tmp / "head_bias.npy", np.ascontiguousarray(artifact.head_bias, dtype=np.float32))
        ref = artifact.backend.reference()
        if ref["kind"] == "pretrained":
            artifact.backend.save(tmp / "encoder")
        meta = {
            "format_version": FORMAT_VERSION,
            "backend": ref,
            "config": artifact.config.to_dict(),
            "best_epoch": artifact.best_epoch,
            "best_f1": artifact.best_f1,
            "label_order": list(artifact.label_order),
            "sha256": {
                "head_weight.npy": sha256_file(tmp / "head_weight.npy"),
                "head_bias.npy": sha256_file(tmp / "head_bias.npy"),
            },
        }
        (tmp / "artifact.json").write_text(dumps(meta), encoding="utf-8")
        (tmp / "run_report.json").write_text(dumps(artifact.run_report), encoding="utf-8")
        replace_dir(tmp, path)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def load_artifact(path) -> ModelArtifact:
    path = Path(path)
    try:
        meta = json.loads((path / "artifact.json").read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise PredictError("artifact", f"{path}: no artifact.json") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise PredictError("artifact", f"{path}/artifact.json is corrupt ({e})") from None
    if not isinstance(meta, dict) or meta.get("format_version") != FORMAT_VERSION:
        raise PredictError(
            "artifact", f"{path}: format version {meta.get('format_version') if isinstance(meta, dict) else None!r}, expected {FORMAT_VERSION}"
        )
    try:
        for name, digest in meta["sha256"].items():
            if sha256_file(path / name) != digest:
                raise PredictError("artifact", f"{path}/{name} does not match its recorded checksum")
        weight = np.load(path / "head_weight.npy", allow_pickle=False)
        bias = np.load(path / "head_bias.npy", allow_pickle=False)
        report_file = path / "run_report.json"
        report = json.loads(report_file.read_text(encoding="utf-8")) if report_file.exists() else {}
        backend = load_backend(meta["backend"], path / "encoder")
        artifact = ModelArtifact(
            backend=backend,
            head_weight=weight,
            head_bias=bias,
            config=TrainingConfig.from_dict(meta["config"]),
            best_epoch=int(meta["best_epoch"]),
            best_f1=float(meta["best_f1"]),
            label_order=tuple(meta["label_order"]),
            run_report=report,
        )
    except PredictError:
        raise
    except (PhytoError, KeyError, TypeError, ValueError, OSError) as e:
        raise PredictError("artifact", f"{path}: cannot load artifact ({e})") from None
    if artifact.head_weight.shape != (len(artifact.label_order), backend.dim):
        raise PredictError("artifact", f"{path}: head shape {artifact.head_weight.shape} does not match backend")
    return artifact
