"""Keyword gazetteer over thesaurus concepts and hazard tags; tweet filtering and classification."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Protocol, Sequence

from .clean import CleaningConfig, clean_text
from .errors import FilterError, PhytoError
from .ingest import TagRef, Thesaurus
from .text import canonical

_WORD = re.compile(r"\w+(?:-\w+)*")


def fold_plural(token: str) -> str:
    """Light French plural fold: drop one final ``s`` or ``x`` on tokens longer than 3 chars."""
    if len(token) > 3 and token[-1] in "sx":
        return token[:-1]
    return token


def match_tokens(text: str) -> list[str]:
    return [fold_plural(t) for t in _WORD.findall(canonical(text))]


@dataclass(frozen=True)
class TweetRecord:
    id: str
    text: str
    created_at: str | None = None
    matched_keywords: frozenset[str] = frozenset()

    def to_dict(self) -> dict:
        d = {"id": self.id, "text": self.text, "matched_keywords": sorted(self.matched_keywords)}
        if self.created_at is not None:
            d["created_at"] = self.created_at
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "TweetRecord":
        return cls(
            id=str(d["id"]),
            text=str(d.get("text") or ""),
            created_at=d.get("created_at"),
            matched_keywords=frozenset(d.get("matched_keywords") or ()),
        )


@dataclass(frozen=True)
class KeywordFilter:
    keywords: frozenset[str]
    match_mode: str = "whole-word"
    _index: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.match_mode != "whole-word":
            raise FilterError("config", f"unsupported match mode {self.match_mode!r}")
        index: dict[str, list[tuple[tuple[str, ...], str]]] = {}
        for kw in sorted(self.keywords):
            toks = tuple(match_tokens(kw))
            if toks:
                index.setdefault(toks[0], []).append((toks, kw))
        object.__setattr__(self, "_index", index)

    def matches(self, text: str) -> frozenset[str]:
        """Keywords occurring in ``text`` as whole (possibly multi-word) token sequences."""
        toks = match_tokens(text)
        found = set()
        for i, tok in enumerate(toks):
            for seq, kw in self._index.get(tok, ()):
                if tuple(toks[i : i + len(seq)]) == seq:
                    found.add(kw)
        return frozenset(found)


def build_keyword_filter(
    thesaurus: Thesaurus | Iterable[str],
    tag_catalog: Iterable[tuple[str, Iterable[TagRef]]] | Mapping[str, Iterable[TagRef]] = (),
) -> KeywordFilter:
    """Union of thesaurus concepts and all tag names, crop tags included."""
    concepts = thesaurus.concepts if isinstance(thesaurus, Thesaurus) else thesaurus
    entries = tag_catalog.items() if isinstance(tag_catalog, Mapping) else tag_catalog
    keywords = {canonical(c) for c in concepts}
    for _, tags in entries:
        keywords.update(canonical(t.name) for t in tags)
    keywords.discard("")
    if not keywords:
        raise FilterError("empty", "no keywords from thesaurus or tag catalog")
    return KeywordFilter(frozenset(keywords))


def filter_tweets(records: Iterable[TweetRecord], kw_filter: KeywordFilter) -> list[TweetRecord]:
    """Keep records mentioning at least one keyword; input order is preserved."""
    out = []
    for rec in records:
        hits = kw_filter.matches(rec.text)
        if hits:
            out.append(TweetRecord(rec.id, rec.text, rec.created_at, hits))
    return out


@dataclass
class TweetClassification:
    record: TweetRecord
    result: object = None  # PredictionResult
    error: str | None = None

    def to_dict(self) -> dict:
        d = self.record.to_dict()
        if self.result is not None:
            d.update(self.result.to_dict())
        else:
            d["error"] = self.error
        return d


def classify_tweets(
    records: Sequence[TweetRecord],
    artifact,
    threshold: float | None = None,
    cfg: CleaningConfig | None = None,
) -> tuple[list[TweetClassification], dict]:
    """Clean then classify each tweet; a failing record is reported and the batch continues."""
    cfg = cfg or CleaningConfig.for_tweets()
    out = []
    errors: dict[str, int] = {}
    for rec in records:
        text, _ = clean_text(rec.text, cfg)
        try:
            out.append(TweetClassification(rec, artifact.predict(text, threshold)))
        except PhytoError as e:
            out.append(TweetClassification(rec, error=str(e)))
            errors[e.kind] = errors.get(e.kind, 0) + 1
    summary = {"n_records": len(out), "n_errors": sum(errors.values()), "errors_by_kind": errors}
    return out, summary


class TweetSource(Protocol):
    """Anything that yields tweet records for a set of query terms."""

    def fetch(self, terms: Iterable[str]) -> Iterator[TweetRecord]: ...


class FileTweetSource:
    """Tweets read from a JSONL dump ``{id, text, created_at?}``.

    ``fetch`` returns every record whose text contains one of ``terms``
    (whole-word, plural-folded); with no terms it returns everything.
    """

    def __init__(self, path):
        self.path = Path(path)

    def records(self) -> Iterator[TweetRecord]:
        with open(self.path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    yield TweetRecord.from_dict(json.loads(line))
                except (json.JSONDecodeError, KeyError, TypeError) as e:
                    raise FilterError("schema", f"{self.path}:{lineno}: bad tweet record ({e})") from None

    def fetch(self, terms: Iterable[str] = ()) -> Iterator[TweetRecord]:
        terms = frozenset(canonical(t) for t in terms if canonical(t))
        if not terms:
            yield from self.records()
            return
        kw = KeywordFilter(terms)
        for rec in self.records():
            if kw.matches(rec.text):
                yield rec


def load_tweets(path) -> list[TweetRecord]:
    return list(FileTweetSource(path).records())
