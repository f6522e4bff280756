"""Rule-based cleaning of bulletin and tweet text.

Rules, applied in this order by :func:`clean_document`:

1. URLs and French phone numbers are removed.
2. Runs of >= 4 single uppercase-letter tokens (vertically printed headers
   such as ``B U L L E T I N``) are removed.
3. Repeated ``.``, ``?`` and ``!`` are collapsed; whitespace is collapsed.
4. Punctuation is replaced by spaces (intra-word hyphens survive).
5. Stop words are removed.
6. Lines with fewer than ``min_line_words`` words are dropped.
7. Whitespace is normalized.

Later rules can expose new matches for earlier ones (``B. U. L. L.`` only
becomes a letter run after step 4), so the pipeline is iterated until the text
stops changing. This makes cleaning idempotent.
"""
from __future__ import annotations

import re
import sys
import unicodedata
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping

from .errors import ConfigError
from .ingest import RawDocument
from .text import canonical

_canonical = lru_cache(maxsize=1 << 16)(canonical)

URL_RULE = "scheme-or-www/1"
PHONE_RULE = "fr-10-digit/1"
SPACED_LETTERS_RULE = "single-letter-run/1"
STOPWORDS_VERSION = "fr-1"

URL_RE = re.compile(r"(?:\b(?:https?|ftp)://|\bwww\.)\S+", re.IGNORECASE)
# 10 digits in pairs, separators space/./-, or +33 / 0033 followed by 9 digits.
PHONE_RE = re.compile(
    r"(?<!\d)(?:(?:\+|00)33[ .-]?[1-9]|0\d)(?:[ .-]?\d{2}){4}(?!\d)"
)
_HSPACE = re.compile(r"[^\S\n]+")
_LINE_EDGE = re.compile(r" ?\n ?")
_REPEATS = re.compile(r"([.?!])\1+")
_BLANK_LINES = re.compile(r"\n(?:[^\S\n]*\n)+")
_TOKEN = re.compile(r"\S+")

APOSTROPHES = frozenset("'’ʼ`´")
HYPHENS = frozenset("-‐‑")

STAT_KEYS = ("urls", "phones", "spaced_runs", "stopwords", "short_lines")
MAX_PASSES = 20


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    text = resources.files("phytonlp").joinpath("data/stopwords_fr.txt").read_text(encoding="utf-8")
    return frozenset(canonical(w) for w in text.splitlines() if w.strip() and not w.startswith("#"))


@dataclass(frozen=True)
class CleaningConfig:
    stopwords: frozenset[str] = field(default_factory=default_stopwords)
    min_line_words: int = 3
    remove_stopwords: bool = True
    drop_short_lines: bool = True
    strip_punctuation: bool = True
    remove_spaced_runs: bool = True
    collapse_repeats: bool = True
    spaced_run_min: int = 4
    url_rule: str = URL_RULE
    phone_rule: str = PHONE_RULE
    spaced_letters_rule: str = SPACED_LETTERS_RULE

    def __post_init__(self):
        if self.min_line_words < 1:
            raise ConfigError("schema", "min_line_words must be >= 1")
        if self.spaced_run_min < 2:
            raise ConfigError("schema", "spaced_run_min must be >= 2")
        object.__setattr__(self, "stopwords", frozenset(canonical(w) for w in self.stopwords if canonical(w)))
        for name, value, known in (
            ("url_rule", self.url_rule, URL_RULE),
            ("phone_rule", self.phone_rule, PHONE_RULE),
            ("spaced_letters_rule", self.spaced_letters_rule, SPACED_LETTERS_RULE),
        ):
            if value != known:
                raise ConfigError("schema", f"unknown {name} {value!r} (supported: {known!r})")

    @classmethod
    def for_classification(cls) -> "CleaningConfig":
        return cls()

    @classmethod
    def for_lm(cls) -> "CleaningConfig":
        return cls(remove_stopwords=False)

    @classmethod
    def for_tweets(cls) -> "CleaningConfig":
        return cls(
            remove_stopwords=False,
            drop_short_lines=False,
            strip_punctuation=False,
            remove_spaced_runs=False,
            collapse_repeats=False,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        sw = self.stopwords
        d["stopwords"] = f"builtin:{STOPWORDS_VERSION}" if sw == default_stopwords() else sorted(sw)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "CleaningConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError("schema", f"unknown cleaning options {sorted(unknown)}")
        sw = d.pop("stopwords", None)
        if isinstance(sw, str):
            if sw != f"builtin:{STOPWORDS_VERSION}":
                raise ConfigError("schema", f"unknown stop word list {sw!r}")
            sw = default_stopwords()
        elif sw is None:
            sw = default_stopwords()
        return cls(stopwords=frozenset(sw), **d)


@dataclass
class CleanedDocument:
    id: str
    text: str
    word_count: int
    removed_stats: dict[str, int] = field(default_factory=lambda: dict.fromkeys(STAT_KEYS, 0))

    @property
    def empty(self) -> bool:
        return self.word_count == 0

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "word_count": self.word_count,
            "removed_stats": dict(self.removed_stats),
            "empty": self.empty,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CleanedDocument":
        text = d["text"]
        return cls(
            id=str(d["id"]),
            text=text,
            word_count=len(text.split()),
            removed_stats={k: int(d.get("removed_stats", {}).get(k, 0)) for k in STAT_KEYS},
        )


def _tidy(text: str) -> str:
    """Collapse horizontal whitespace and strip line ends; newlines are kept."""
    return _LINE_EDGE.sub("\n", _HSPACE.sub(" ", text)).strip(" ")


def _strip_urls_phones(text: str) -> tuple[str, int, int]:
    text, n_urls = URL_RE.subn(" ", text)
    text, n_phones = PHONE_RE.subn(" ", text)
    if n_urls or n_phones:
        text = _tidy(text)
    return text, n_urls, n_phones


def strip_urls_phones(text: str) -> str:
    return _strip_urls_phones(text)[0]


def _remove_spaced_letter_runs(text: str, min_run: int = 4) -> tuple[str, int]:
    tokens = [(m.start(), m.end()) for m in _TOKEN.finditer(text)]
    single = [e - s == 1 and text[s].isupper() for s, e in tokens]
    cuts = []
    i = 0
    while i < len(tokens):
        if not single[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(tokens) and single[j + 1]:
            j += 1
        if j - i + 1 >= min_run:
            start, end = tokens[i][0], tokens[j][1]
            has_prev, has_next = i > 0, j + 1 < len(tokens)
            before = text[tokens[i - 1][1]:start] if has_prev else ""
            after = text[end:tokens[j + 1][0]] if has_next else ""
            # Remove the run with one of its surrounding whitespace gaps; keep the
            # line break when the run ends a line that has other content.
            if has_prev and (not has_next or ("\n" in after and "\n" not in before)):
                cuts.append((tokens[i - 1][1], end))
            else:
                cuts.append((start, tokens[j + 1][0] if has_next else len(text)))
        i = j + 1
    if not cuts:
        return text, 0
    out, pos = [], 0
    for s, e in cuts:
        out.append(text[pos:s])
        pos = e
    out.append(text[pos:])
    return "".join(out), len(cuts)


def remove_spaced_letter_runs(text: str, min_run: int = 4) -> str:
    return _remove_spaced_letter_runs(text, min_run)[0]


def collapse_repeats(text: str) -> str:
    text = _REPEATS.sub(r"\1", text)
    text = _tidy(text)
    return _BLANK_LINES.sub("\n", text)


@lru_cache(maxsize=1)
def _punct_re() -> re.Pattern:
    """All Unicode punctuation (general category P*) plus apostrophe look-alikes."""
    chars = [chr(c) for c in range(sys.maxunicode + 1) if unicodedata.category(chr(c)).startswith("P")]
    chars += sorted(APOSTROPHES - set(chars))
    return re.compile("[" + "".join(re.escape(c) for c in chars) + "]")


def strip_punctuation(text: str) -> str:
    """Replace punctuation by spaces, keeping hyphens that join two word characters.

    Apostrophes always become a boundary: ``l'apparition`` -> ``l apparition``.
    """
    n = len(text)

    def repl(m: re.Match) -> str:
        i = m.start()
        ch = text[i]
        if ch in HYPHENS and 0 < i < n - 1 and text[i - 1].isalnum() and text[i + 1].isalnum():
            return ch
        return " "

    return _punct_re().sub(repl, text)


def _remove_stopwords(text: str, stopwords: frozenset[str]) -> tuple[str, int]:
    if not stopwords:
        return text, 0
    removed = 0
    lines = []
    for line in text.split("\n"):
        kept = []
        for tok in line.split():
            if _canonical(tok) in stopwords:
                removed += 1
            else:
                kept.append(tok)
        lines.append(" ".join(kept) if removed else line)
    return ("\n".join(lines), removed) if removed else (text, 0)


def remove_stopwords(text: str, stopword_list: Iterable[str]) -> str:
    return _remove_stopwords(text, frozenset(canonical(w) for w in stopword_list))[0]


def _drop_short_lines(text: str, min_line_words: int) -> tuple[str, int]:
    # Blank lines carry no content; they are left to whitespace normalization.
    kept, dropped = [], 0
    for line in text.split("\n"):
        n = len(line.split())
        if 0 < n < min_line_words:
            dropped += 1
        else:
            kept.append(line)
    return ("\n".join(kept), dropped) if dropped else (text, 0)


def drop_short_lines(text: str, min_line_words: int = 3) -> str:
    if min_line_words < 1:
        raise ValueError("min_line_words must be >= 1")
    return _drop_short_lines(text, min_line_words)[0]


def normalize_whitespace(text: str) -> str:
    return "\n".join(line for line in _tidy(text).split("\n") if line)


def _one_pass(text: str, cfg: CleaningConfig, stats: dict[str, int]) -> str:
    text, n_urls, n_phones = _strip_urls_phones(text)
    stats["urls"] += n_urls
    stats["phones"] += n_phones
    if cfg.remove_spaced_runs:
        text, n = _remove_spaced_letter_runs(text, cfg.spaced_run_min)
        stats["spaced_runs"] += n
    if cfg.collapse_repeats:
        text = collapse_repeats(text)
    if cfg.strip_punctuation:
        text = strip_punctuation(text)
    if cfg.remove_stopwords:
        text, n = _remove_stopwords(text, cfg.stopwords)
        stats["stopwords"] += n
    if cfg.drop_short_lines:
        text, n = _drop_short_lines(text, cfg.min_line_words)
        stats["short_lines"] += n
    return normalize_whitespace(text)


def clean_text(text: str, cfg: CleaningConfig | None = None) -> tuple[str, dict[str, int]]:
    cfg = cfg or CleaningConfig()
    stats = dict.fromkeys(STAT_KEYS, 0)
    for _ in range(MAX_PASSES):
        new = _one_pass(text, cfg, stats)
        if new == text:
            break
        text = new
    else:  # pragma: no cover - every pass shortens the text or is the last one
        raise RuntimeError("cleaning did not reach a fixed point")
    return text, stats


def clean_document(doc: RawDocument, cfg: CleaningConfig | None = None) -> CleanedDocument:
    text, stats = clean_text(doc.text, cfg)
    return CleanedDocument(id=doc.id, text=text, word_count=len(text.split()), removed_stats=stats)


def clean_documents(docs: Iterable[RawDocument], cfg: CleaningConfig | None = None, jobs: int = 1) -> list[CleanedDocument]:
    """Clean many documents, optionally across ``jobs`` processes; output order follows input."""
    docs = list(docs)
    cfg = cfg or CleaningConfig()
    if jobs <= 1 or len(docs) < 2:
        return [clean_document(d, cfg) for d in docs]
    from concurrent.futures import ProcessPoolExecutor
    from itertools import repeat

    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(clean_document, docs, repeat(cfg), chunksize=max(1, len(docs) // (4 * jobs))))
