"""The two training stages: masked-LM domain adaptation, then the multi-label head."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from ..builder import LABELS, Chunk, DatasetSplit
from ..errors import TrainError
from ..metrics import compute_report
from .artifact import RMS_EPS, ModelArtifact, head_probabilities
from .backends import EncoderBackend, TransformerBackend
from .config import TrainingConfig

log = logging.getLogger(__name__)


@dataclass
class LMResult:
    backend: TransformerBackend
    report: dict


def _mask_tokens(input_ids, special, tokenizer, probability: float, gen: torch.Generator):
    """BERT masking: pick ``probability`` of the tokens; 80% -> [MASK], 10% random, 10% kept."""
    labels = input_ids.clone()
    probs = torch.full(input_ids.shape, probability)
    probs.masked_fill_(special, 0.0)
    picked = torch.bernoulli(probs, generator=gen).bool()
    labels[~picked] = -100
    inputs = input_ids.clone()
    to_mask = torch.bernoulli(torch.full(input_ids.shape, 0.8), generator=gen).bool() & picked
    inputs[to_mask] = tokenizer.mask_token_id
    to_random = torch.bernoulli(torch.full(input_ids.shape, 0.5), generator=gen).bool() & picked & ~to_mask
    inputs[to_random] = torch.randint(len(tokenizer), input_ids.shape, generator=gen)[to_random]
    return inputs, labels


def _mlm_batch(backend: TransformerBackend, lines: Sequence[str], cfg: TrainingConfig, gen):
    batch = backend._tokenize(lines)
    special = torch.tensor(
        [backend.tokenizer.get_special_tokens_mask(ids, already_has_special_tokens=True) for ids in batch["input_ids"].tolist()],
        dtype=torch.bool,
    ) | (batch["attention_mask"] == 0)
    inputs, labels = _mask_tokens(batch["input_ids"], special, backend.tokenizer, cfg.mlm_probability, gen)
    batch = dict(batch)
    batch["input_ids"] = inputs
    return batch, labels


def _masked_loss_sum(model, batch, labels) -> tuple[torch.Tensor, int]:
    n = int((labels != -100).sum())
    if n == 0:
        return torch.zeros(()), 0
    logits = model(**batch).logits
    loss = torch.nn.functional.cross_entropy(
        logits.view(-1, logits.size(-1)), labels.view(-1), ignore_index=-100, reduction="sum"
    )
    return loss, n


def _validation_loss(model, batches) -> float:
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for batch, labels in batches:
            s, n = _masked_loss_sum(model, batch, labels)
            total += float(s)
            count += n
    return total / count if count else float("nan")


def finetune_language_model(
    backend: EncoderBackend, lm_corpus: Sequence[str], cfg: TrainingConfig, out_dir=None
) -> LMResult:
    """Continue masked-LM training of the encoder on in-domain text.

    The last ``validation_fraction`` of the corpus lines is held out; its
    masked-token loss is measured before and after training with the same
    masks. Returns a new backend; the input backend is left untouched.
    """
    if not backend.capabilities.lm_finetune or not isinstance(backend, TransformerBackend):
        raise TrainError("unsupported", f"backend {backend.name!r} cannot be fine-tuned as a language model")
    if cfg.stage != "lm_finetune":
        raise TrainError("config", f"expected stage 'lm_finetune', got {cfg.stage!r}")
    lines = [l for l in lm_corpus if l.strip()]
    if not lines:
        raise TrainError("empty-corpus", "language-model corpus is empty")

    n_val = max(1, math.ceil(len(lines) * cfg.validation_fraction)) if len(lines) > 1 else 0
    train_lines = lines[: len(lines) - n_val] if n_val else lines
    val_lines = lines[len(lines) - n_val :] if n_val else lines

    torch.manual_seed(cfg.seed)
    tuned = backend.clone()
    model = tuned.model
    val_gen = torch.Generator().manual_seed(cfg.seed + 1)
    val_batches = [
        _mlm_batch(tuned, val_lines[i : i + cfg.batch_size], cfg, val_gen) for i in range(0, len(val_lines), cfg.batch_size)
    ]
    loss_before = _validation_loss(model, val_batches)

    gen = torch.Generator().manual_seed(cfg.seed)
    optim = torch.optim.Adam(model.parameters(), lr=cfg.lm_learning_rate)
    epoch_losses = []
    for epoch in range(cfg.lm_epochs):
        model.train()
        order = torch.randperm(len(train_lines), generator=gen).tolist()
        total, count = 0.0, 0
        for i in range(0, len(order), cfg.batch_size):
            batch, labels = _mlm_batch(tuned, [train_lines[j] for j in order[i : i + cfg.batch_size]], cfg, gen)
            loss_sum, n = _masked_loss_sum(model, batch, labels)
            if n == 0:
                continue
            loss = loss_sum / n
            if not torch.isfinite(loss):
                raise TrainError("diverged", f"non-finite masked-LM loss in epoch {epoch + 1}")
            optim.zero_grad()
            loss.backward()
            optim.step()
            total += loss_sum.item()
            count += n
        epoch_losses.append(total / count if count else float("nan"))
        log.info("lm epoch %d: train loss %.4f", epoch + 1, epoch_losses[-1])
    model.eval()
    loss_after = _validation_loss(model, val_batches) if cfg.lm_epochs else loss_before

    report = {
        "stage": "lm_finetune",
        "backend": backend.reference(),
        "config": cfg.to_dict(),
        "n_train_lines": len(train_lines),
        "n_validation_lines": len(val_lines),
        "epoch_train_loss": epoch_losses,
        "validation_loss_before": loss_before,
        "validation_loss_after": loss_after,
        "validation_loss_non_increasing": bool(loss_after <= loss_before),
    }
    if out_dir is not None:
        tuned.save(out_dir)
        tuned.source = str(out_dir)
        tuned.name = f"pretrained:{out_dir}"
    return LMResult(tuned, report)


def _rms_normalize(x: torch.Tensor) -> torch.Tensor:
    return x / torch.sqrt(x.pow(2).mean(dim=1, keepdim=True) + RMS_EPS)


def _validation_split(train: Sequence[Chunk], fraction: float) -> tuple[list[Chunk], list[Chunk]]:
    """Hold out the last ``fraction`` of training documents (by first appearance)."""
    docs = list(dict.fromkeys(e.doc_id for e in train))
    if len(docs) < 2:
        return list(train), list(train)
    n_val = min(max(1, math.ceil(len(docs) * fraction)), len(docs) - 1)
    val_docs = set(docs[-n_val:])
    return [e for e in train if e.doc_id not in val_docs], [e for e in train if e.doc_id in val_docs]


def _weighted_f1(probs: np.ndarray, examples: Sequence[Chunk], threshold: float) -> float:
    actual = [e.labels.as_tuple() for e in examples]
    return compute_report(probs, actual, threshold, LABELS).weighted["f1"]


def train_classifier(backend: EncoderBackend, split: DatasetSplit, cfg: TrainingConfig) -> ModelArtifact:
    """Fit a two-output logistic head (per-label binary cross-entropy) on the encoder.

    Encoder features are RMS-normalized before the linear layer, which puts
    unit-length hashed vectors and layer-normed transformer states on the same
    per-coordinate scale.

    After every epoch the support-weighted F1 on the validation slice is
    recorded; the returned artifact holds the parameters of the best epoch.
    The head starts at zero, so ``clf_epochs=0`` returns the untrained head.
    """
    if cfg.stage != "classify":
        raise TrainError("config", f"expected stage 'classify', got {cfg.stage!r}")
    train = list(split.train)
    if not train:
        raise TrainError("empty", "training side of the split is empty")
    y_all = np.array([e.labels.as_tuple() for e in train], dtype=bool)
    missing = [label for k, label in enumerate(LABELS) if not y_all[:, k].any()]
    if missing:
        raise TrainError("degenerate-labels", f"no positive training examples for {missing}")

    fit, val = _validation_split(train, cfg.validation_fraction)
    torch.manual_seed(cfg.seed)
    gen = torch.Generator().manual_seed(cfg.seed)
    backend = backend.clone()
    tune_encoder = cfg.finetune_encoder and bool(backend.parameters())

    head = torch.nn.Linear(backend.dim, len(LABELS))
    torch.nn.init.zeros_(head.weight)
    torch.nn.init.zeros_(head.bias)
    params = list(head.parameters()) + (backend.parameters() if tune_encoder else [])
    optim = torch.optim.Adam(params, lr=cfg.clf_learning_rate)
    loss_fn = torch.nn.BCEWithLogitsLoss()

    fit_texts = [e.text for e in fit]
    y_fit = torch.tensor([e.labels.as_tuple() for e in fit], dtype=torch.float32)
    frozen_features = None if tune_encoder else torch.from_numpy(backend.encode(fit_texts))
    val_texts = [e.text for e in val]
    val_features = None if tune_encoder else backend.encode(val_texts)

    def snapshot():
        w = head.weight.detach().numpy().astype(np.float32, copy=True)
        b = head.bias.detach().numpy().astype(np.float32, copy=True)
        enc = backend.state_dict() if tune_encoder else None
        return w, b, enc

    def val_f1():
        feats = backend.encode(val_texts) if tune_encoder else val_features
        w, b, _ = snapshot()
        return _weighted_f1(head_probabilities(feats, w, b), val, cfg.threshold)

    best = snapshot()
    best_epoch, best_f1 = 0, val_f1()
    initial_f1 = best_f1
    epoch_losses, epoch_f1 = [], []
    for epoch in range(1, cfg.clf_epochs + 1):
        backend.train_mode(True)
        order = torch.randperm(len(fit), generator=gen)
        total = 0.0
        for i in range(0, len(fit), cfg.batch_size):
            idx = order[i : i + cfg.batch_size]
            if tune_encoder:
                feats = backend.features([fit_texts[j] for j in idx.tolist()])
            else:
                feats = frozen_features[idx]
            loss = loss_fn(head(_rms_normalize(feats)), y_fit[idx])
            if not torch.isfinite(loss):
                raise TrainError("diverged", f"non-finite loss in epoch {epoch}")
            optim.zero_grad()
            loss.backward()
            optim.step()
            total += loss.item() * len(idx)
        backend.train_mode(False)
        epoch_losses.append(total / len(fit))
        epoch_f1.append(val_f1())
        log.info("epoch %d: loss %.5f, validation weighted F1 %.4f", epoch, epoch_losses[-1], epoch_f1[-1])
        if epoch == 1 or epoch_f1[-1] > best_f1:
            best, best_epoch, best_f1 = snapshot(), epoch, epoch_f1[-1]

    weight, bias, enc_state = best
    if enc_state is not None:
        backend.model.load_state_dict(enc_state)
    report = {
        "stage": "classify",
        "backend": backend.reference(),
        "config": cfg.to_dict(),
        "clf_epochs": cfg.clf_epochs,
        "finetuned_encoder": tune_encoder,
        "n_fit": len(fit),
        "n_validation": len(val),
        "validation_docs": sorted({e.doc_id for e in val}),
        "initial_validation_f1": initial_f1,
        "epoch_loss": epoch_losses,
        "epoch_validation_f1": epoch_f1,
        "best_epoch": best_epoch,
        "best_f1": best_f1,
        "split_seed": split.seed,
        "seed": cfg.seed,
    }
    return ModelArtifact(
        backend=backend,
        head_weight=weight,
        head_bias=bias,
        config=cfg,
        best_epoch=best_epoch,
        best_f1=best_f1,
        label_order=LABELS,
        run_report=report,
    )
