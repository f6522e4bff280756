"""Text encoders the classifier head sits on.

Two implementations: a deterministic hashed bag-of-words encoder for
desk-scale runs and tests, and a wrapper around a local masked-LM checkpoint
(CamemBERT, multilingual BERT, ...) loaded with ``transformers``.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from ..errors import ConfigError, PredictError

_WORD = re.compile(r"\w+")


@dataclass(frozen=True)
class Capabilities:
    lm_finetune: bool
    encode: bool = True


class EncoderBackend:
    """Contract shared by all encoders.

    ``encode`` is the inference path: deterministic, float32, one row per text.
    ``features`` is the training path and may carry gradients into the encoder
    weights returned by ``parameters``.
    """

    name: str
    version: str
    dim: int
    max_sequence_length: int
    capabilities: Capabilities

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        raise NotImplementedError

    def features(self, texts: Sequence[str]) -> torch.Tensor:
        return torch.from_numpy(self.encode(texts))

    def parameters(self) -> list[torch.nn.Parameter]:
        return []

    def train_mode(self, on: bool) -> None:
        pass

    def reference(self) -> dict:
        raise NotImplementedError

    def save(self, directory) -> None:
        """Write whatever ``load_backend`` needs besides ``reference()``."""

    def clone(self) -> "EncoderBackend":
        return self


class OfflineHashingBackend(EncoderBackend):
    """Signed feature hashing of lowercased word tokens, L2-normalized.

    The hash is keyed by ``seed`` so different seeds give different
    projections. Only the first ``max_sequence_length`` tokens are used.
    """

    name = "offline-test"
    version = "hash-bow/1"
    capabilities = Capabilities(lm_finetune=False)

    def __init__(self, dim: int = 512, seed: int = 0, max_sequence_length: int = 256):
        if dim < 1:
            raise ConfigError("schema", "dim must be positive")
        self.dim = dim
        self.seed = seed
        self.max_sequence_length = max_sequence_length
        self._key = hashlib.sha256(f"phytonlp-hash:{seed}".encode()).digest()[:32]
        self._cache: dict[str, tuple[int, float]] = {}

    def bucket(self, token: str) -> tuple[int, float]:
        hit = self._cache.get(token)
        if hit is None:
            h = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=self._key).digest(), "little")
            hit = (h % self.dim, 1.0 if (h >> 63) & 1 else -1.0)
            self._cache[token] = hit
        return hit

    def tokens(self, text: str) -> list[str]:
        return _WORD.findall(text.lower())[: self.max_sequence_length]

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            for tok in self.tokens(text):
                j, sign = self.bucket(tok)
                out[i, j] += sign
        norms = np.linalg.norm(out, axis=1, keepdims=True)
        np.divide(out, norms, out=out, where=norms > 0)
        return out.astype(np.float32)

    def reference(self) -> dict:
        return {
            "kind": "offline-test",
            "version": self.version,
            "dim": self.dim,
            "seed": self.seed,
            "max_sequence_length": self.max_sequence_length,
        }


class TransformerBackend(EncoderBackend):
    """A local masked-LM checkpoint used as a sentence encoder.

    Sentence vector: the model's pooled output when it has one, else the mean
    of token vectors under the attention mask. Truncation keeps the beginning.
    """

    capabilities = Capabilities(lm_finetune=True)

    def __init__(self, model, tokenizer, max_sequence_length: int = 256, source: str = ""):
        self.model = model
        self.tokenizer = tokenizer
        self.max_sequence_length = max_sequence_length
        self.source = source
        self.name = f"pretrained:{source}" if source else "pretrained"
        self.version = f"{type(model).__name__}/{getattr(model.config, 'model_type', '?')}"
        self.dim = int(model.config.hidden_size)
        self.model.eval()

    @classmethod
    def from_path(cls, path, max_sequence_length: int = 256) -> "TransformerBackend":
        from transformers import AutoModelForMaskedLM, AutoTokenizer
        from transformers.utils import logging as hf_logging

        path = Path(path)
        if not path.is_dir():
            raise ConfigError("not-found", f"pretrained model directory {path} does not exist")
        hf_logging.set_verbosity_error()
        hf_logging.disable_progress_bar()
        tokenizer = AutoTokenizer.from_pretrained(path, local_files_only=True)
        model = AutoModelForMaskedLM.from_pretrained(path, local_files_only=True)
        return cls(model, tokenizer, max_sequence_length, source=str(path))

    @property
    def encoder(self) -> torch.nn.Module:
        return getattr(self.model, self.model.base_model_prefix)

    def _tokenize(self, texts: Sequence[str]):
        limit = min(self.max_sequence_length, getattr(self.model.config, "max_position_embeddings", 10**9))
        return self.tokenizer(
            list(texts), truncation=True, max_length=limit, padding=True, return_tensors="pt"
        )

    def _pool(self, batch, out) -> torch.Tensor:
        pooled = getattr(out, "pooler_output", None)
        if pooled is not None:
            return pooled
        mask = batch["attention_mask"].unsqueeze(-1).to(out.last_hidden_state.dtype)
        return (out.last_hidden_state * mask).sum(1) / mask.sum(1).clamp(min=1.0)

    def features(self, texts: Sequence[str]) -> torch.Tensor:
        batch = self._tokenize(texts)
        return self._pool(batch, self.encoder(**batch))

    def encode(self, texts: Sequence[str], batch_size: int = 32) -> np.ndarray:
        was_training = self.model.training
        self.model.eval()
        rows = []
        with torch.no_grad():
            for i in range(0, len(texts), batch_size):
                rows.append(self.features(texts[i : i + batch_size]).float().numpy())
        self.model.train(was_training)
        if not rows:
            return np.zeros((0, self.dim), dtype=np.float32)
        return np.concatenate(rows).astype(np.float32)

    def parameters(self) -> list[torch.nn.Parameter]:
        return list(self.encoder.parameters())

    def train_mode(self, on: bool) -> None:
        self.model.train(on)

    def reference(self) -> dict:
        return {
            "kind": "pretrained",
            "version": self.version,
            "source": self.source,
            "dim": self.dim,
            "max_sequence_length": self.max_sequence_length,
        }

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.model.save_pretrained(directory)
        self.tokenizer.save_pretrained(directory)

    def clone(self) -> "TransformerBackend":
        import copy

        return TransformerBackend(copy.deepcopy(self.model), self.tokenizer, self.max_sequence_length, self.source)

    def state_dict(self) -> dict[str, torch.Tensor]:
        return {k: v.detach().clone() for k, v in self.model.state_dict().items()}


def offline_test_backend(dim: int = 512, seed: int = 0, max_sequence_length: int = 256) -> OfflineHashingBackend:
    return OfflineHashingBackend(dim=dim, seed=seed, max_sequence_length=max_sequence_length)


def make_backend(spec: str, max_sequence_length: int = 256, dim: int = 512, seed: int = 0) -> EncoderBackend:
    """Backend from a selector string: ``offline-test`` or ``pretrained:<local-path>``."""
    if spec == "offline-test":
        return offline_test_backend(dim=dim, seed=seed, max_sequence_length=max_sequence_length)
    if spec.startswith("pretrained:"):
        return TransformerBackend.from_path(spec.split(":", 1)[1], max_sequence_length)
    raise ConfigError("schema", f"unknown backend {spec!r} (use 'offline-test' or 'pretrained:<path>')")


def load_backend(ref: dict, directory=None) -> EncoderBackend:
    """Rebuild a backend from ``reference()`` output and, for checkpoints, its saved files."""
    kind = ref.get("kind")
    if kind == "offline-test":
        if ref.get("version") != OfflineHashingBackend.version:
            raise PredictError("artifact", f"offline backend version {ref.get('version')!r} is not supported")
        return OfflineHashingBackend(ref["dim"], ref["seed"], ref["max_sequence_length"])
    if kind == "pretrained":
        backend = TransformerBackend.from_path(directory, ref["max_sequence_length"])
        backend.source = ref.get("source", "")
        backend.name = f"pretrained:{backend.source}" if backend.source else "pretrained"
        return backend
    raise PredictError("artifact", f"unknown backend kind {kind!r}")


def make_tiny_masked_lm(directory, words: Sequence[str], hidden_size: int = 32, layers: int = 2, seed: int = 0):
    """Write a small randomly initialized BERT masked LM with a word-level vocab.

    Useful for exercising the pretrained-backend code paths without network
    access or large downloads.
    """
    from transformers import BertConfig, BertForMaskedLM, BertTokenizer

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    specials = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    vocab = specials + sorted({w.lower() for w in words} - set(specials))
    tokenizer = BertTokenizer(vocab={w: i for i, w in enumerate(vocab)}, do_lower_case=True, strip_accents=False)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=hidden_size,
        num_hidden_layers=layers,
        num_attention_heads=2,
        intermediate_size=2 * hidden_size,
        max_position_embeddings=512,
    )
    torch.manual_seed(seed)
    model = BertForMaskedLM(config)
    model.save_pretrained(directory)
    tokenizer.save_pretrained(directory)
    return directory
