"""Dataset construction: LM corpus, weakly labeled topic chunks, risk sentences, splits."""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .clean import CleanedDocument, CleaningConfig, clean_text
from .errors import BuildError
from .ingest import RawDocument, SourceKind, TagCategory, TagRef

LABELS = ("bioagressor", "disease")
CHUNK_RULE = "uniform-length-partition/1"


@dataclass(frozen=True)
class LabelSet:
    bioagressor: bool = False
    disease: bool = False

    def as_tuple(self) -> tuple[bool, bool]:
        return (self.bioagressor, self.disease)

    def names(self) -> list[str]:
        return [name for name, on in zip(LABELS, self.as_tuple()) if on]

    @classmethod
    def from_tags(cls, tags: Iterable[TagRef]) -> "LabelSet":
        cats = {t.category for t in tags}
        return cls(TagCategory.BIOAGRESSOR in cats, TagCategory.DISEASE in cats)


@dataclass(frozen=True)
class Chunk:
    """A labeled text unit. Also used for risk sentences (one sentence per chunk)."""

    chunk_id: str
    doc_id: str
    text: str
    word_count: int
    labels: LabelSet = LabelSet()
    merged_remainder: bool = False

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "doc_id": self.doc_id,
            "text": self.text,
            "word_count": self.word_count,
            "bioagressor": self.labels.bioagressor,
            "disease": self.labels.disease,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Chunk":
        return cls(
            chunk_id=str(d["chunk_id"]),
            doc_id=str(d["doc_id"]),
            text=d["text"],
            word_count=int(d["word_count"]),
            labels=LabelSet(bool(d["bioagressor"]), bool(d["disease"])),
        )


@dataclass(frozen=True)
class RiskAnnotation:
    sentence: str
    labels: LabelSet
    annotator_note: str | None = None
    doc_id: str | None = None

    def to_chunk(self, index: int) -> Chunk:
        return Chunk(
            chunk_id=f"risk-{index:05d}",
            doc_id=self.doc_id or f"risk-{index:05d}",
            text=self.sentence,
            word_count=len(self.sentence.split()),
            labels=self.labels,
        )


@dataclass
class DatasetSplit:
    train: list[Chunk]
    test: list[Chunk]
    seed: int
    ratio: float
    train_docs: list[str] = field(default_factory=list)
    test_docs: list[str] = field(default_factory=list)

    def manifest(self) -> dict:
        return {
            "seed": self.seed,
            "ratio": self.ratio,
            "train_docs": self.train_docs,
            "test_docs": self.test_docs,
            "n_train": len(self.train),
            "n_test": len(self.test),
        }


@dataclass
class TopicDataset:
    chunks: list[Chunk]
    manifest: dict


def _doc_rng(seed: int, doc_id: str) -> random.Random:
    # Per-document stream: chunking is independent of document order and of --jobs.
    return random.Random(f"{seed}:{doc_id}")


def chunk_document(doc: CleanedDocument, min_words: int = 5, max_words: int = 256, seed: int = 0) -> list[Chunk]:
    """Partition a document's words into consecutive chunks of random length.

    Lengths are drawn uniformly from ``[min_words, max_words]``. A trailing
    remainder shorter than ``min_words`` is merged into the last chunk, which
    is then flagged with ``merged_remainder`` when it exceeds ``max_words``.
    """
    if not 1 <= min_words <= max_words:
        raise BuildError("config", f"need 1 <= min_words <= max_words, got {min_words}, {max_words}")
    ws = doc.text.split()
    n = len(ws)
    if n < min_words:
        return []
    rng = _doc_rng(seed, doc.id)
    chunks = []
    pos = 0
    while pos < n:
        end = min(pos + rng.randint(min_words, max_words), n)
        if 0 < n - end < min_words:
            end = n
        piece = ws[pos:end]
        chunks.append(
            Chunk(
                chunk_id=f"{doc.id}#{len(chunks):04d}",
                doc_id=doc.id,
                text=" ".join(piece),
                word_count=len(piece),
                merged_remainder=len(piece) > max_words,
            )
        )
        pos = end
    return chunks


def propagate_labels(chunk: Chunk, doc_tags: Iterable[TagRef]) -> Chunk:
    """Weak label: the chunk inherits the hazard categories of its document's tags."""
    return Chunk(
        chunk_id=chunk.chunk_id,
        doc_id=chunk.doc_id,
        text=chunk.text,
        word_count=chunk.word_count,
        labels=LabelSet.from_tags(doc_tags),
        merged_remainder=chunk.merged_remainder,
    )


def build_lm_corpus(
    docs: Iterable[RawDocument],
    cfg: CleaningConfig | None = None,
    include_ocr: bool = False,
) -> list[str]:
    """One cleaned paragraph per line.

    By default only XML bulletins contribute (their paragraphs). With
    ``include_ocr`` the cleaned lines of OCR bulletins are added too.
    """
    cfg = cfg or CleaningConfig.for_lm()
    lines = []
    for doc in docs:
        if doc.source_kind is SourceKind.BSV_XML:
            units = doc.paragraphs
        elif include_ocr and doc.source_kind is SourceKind.BSV_OCR:
            units = [doc.text]
        else:
            continue
        for unit in units:
            text, _ = clean_text(unit, cfg)
            lines.extend(line for line in text.split("\n") if line.strip())
    if not lines:
        raise BuildError("empty-corpus", "no usable paragraphs")
    return lines


def write_lm_corpus(lines: Sequence[str], path) -> None:
    from .fileio import atomic_write_text

    atomic_write_text(path, "".join(line + "\n" for line in lines))


def build_topic_dataset(
    docs: Sequence[CleanedDocument],
    tag_catalog: Mapping[str, Iterable[TagRef]],
    n_docs: int = 200,
    target_chunks: int = 4000,
    seed: int = 0,
    min_words: int = 5,
    max_words: int = 256,
) -> TopicDataset:
    """Sample ``n_docs`` tagged documents, chunk them and weakly label the chunks.

    A document counts as tagged when the catalog has an entry for it, even one
    holding only crop tags (its chunks are negatives).
    """
    candidates = sorted(d.id for d in docs if d.id in tag_catalog)
    if len(candidates) < n_docs:
        raise BuildError("insufficient-docs", f"{len(candidates)} tagged documents, {n_docs} requested")
    by_id = {d.id: d for d in docs}
    chosen = sorted(random.Random(seed).sample(candidates, n_docs))
    chunks = []
    for doc_id in chosen:
        tags = tag_catalog[doc_id]
        chunks.extend(propagate_labels(c, tags) for c in chunk_document(by_id[doc_id], min_words, max_words, seed))
    manifest = {
        "task": "topic",
        "seed": seed,
        "n_docs": n_docs,
        "doc_ids": chosen,
        "target_chunks": target_chunks,
        "n_chunks": len(chunks),
        "n_merged_remainders": sum(c.merged_remainder for c in chunks),
        "min_words": min_words,
        "max_words": max_words,
        "chunk_rule": CHUNK_RULE,
        "label_counts": {
            "bioagressor": sum(c.labels.bioagressor for c in chunks),
            "disease": sum(c.labels.disease for c in chunks),
        },
    }
    return TopicDataset(chunks, manifest)


def load_risk_annotations(path) -> list[RiskAnnotation]:
    """Read manually labeled risk sentences from JSONL.

    Each record needs ``sentence`` (non-empty string) and boolean ``bioagressor``
    and ``disease``; ``note`` and ``doc_id`` are optional.
    """
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise BuildError("schema", f"{path}:{lineno}: invalid JSON ({e.msg})") from None
            if not isinstance(rec, dict):
                raise BuildError("schema", f"{path}:{lineno}: expected a JSON object")
            sentence = rec.get("sentence")
            if not isinstance(sentence, str) or not sentence.strip():
                raise BuildError("schema", f"{path}:{lineno}: 'sentence' must be a non-empty string")
            for key in LABELS:
                if not isinstance(rec.get(key), bool):
                    raise BuildError("schema", f"{path}:{lineno}: '{key}' must be a boolean")
            note = rec.get("note", rec.get("annotator_note"))
            doc_id = rec.get("doc_id")
            out.append(
                RiskAnnotation(
                    sentence=sentence,
                    labels=LabelSet(rec["bioagressor"], rec["disease"]),
                    annotator_note=None if note is None else str(note),
                    doc_id=None if doc_id is None else str(doc_id),
                )
            )
    return out


def split_dataset(examples: Sequence[Chunk], ratio: float = 0.8, seed: int = 0) -> DatasetSplit:
    """Document-level random split; every document lands wholly on one side.

    The train side gets ``round(ratio * n_docs)`` documents, clamped so that
    both sides are non-empty.
    """
    if not 0 < ratio < 1:
        raise BuildError("config", f"ratio must be in (0, 1), got {ratio}")
    if not examples:
        raise BuildError("empty", "no examples to split")
    docs = sorted({e.doc_id for e in examples})
    if len(docs) < 2:
        raise BuildError("degenerate-split", "all examples come from a single document")
    random.Random(seed).shuffle(docs)
    n_train = min(max(int(ratio * len(docs) + 0.5), 1), len(docs) - 1)
    train_docs = set(docs[:n_train])
    return DatasetSplit(
        train=[e for e in examples if e.doc_id in train_docs],
        test=[e for e in examples if e.doc_id not in train_docs],
        seed=seed,
        ratio=ratio,
        train_docs=sorted(train_docs),
        test_docs=sorted(set(docs) - train_docs),
    )


def write_examples(path, examples: Iterable[Chunk]) -> None:
    from .fileio import write_jsonl

    write_jsonl(path, (e.to_dict() for e in examples))


def read_examples(path) -> list[Chunk]:
    from .fileio import read_jsonl

    try:
        return [Chunk.from_dict(r) for r in read_jsonl(path)]
    except (KeyError, TypeError, ValueError) as e:
        raise BuildError("schema", f"{path}: bad dataset record ({e})") from None
