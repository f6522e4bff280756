"""Loaders for bulletins (XML and OCR plain text), tag catalogs and the crop thesaurus."""
from __future__ import annotations

import csv
import io
import json
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import IngestError
from .text import canonical

DEFAULT_PARAGRAPH_ELEMENTS = frozenset({"p", "paragraphe", "texte"})
FALLBACK_MIN_CHARS = 20
DEFAULT_ENCODINGS = ("utf-8", "latin-1")

_WS = re.compile(r"\s+")


class SourceKind(str, Enum):
    BSV_XML = "bsv-xml"
    BSV_OCR = "bsv-ocr"
    TWEET = "tweet"


class TagCategory(str, Enum):
    BIOAGRESSOR = "bioagressor"
    DISEASE = "disease"
    CROP = "crop"


@dataclass(frozen=True, order=True)
class TagRef:
    name: str
    category: TagCategory

    def __post_init__(self):
        name = canonical(self.name)
        if not name:
            raise IngestError("schema", "tag name is empty")
        try:
            category = TagCategory(canonical(str(getattr(self.category, "value", self.category))))
        except ValueError:
            raise IngestError("schema", f"unknown tag category {self.category!r}") from None
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "category", category)

    def to_dict(self) -> dict:
        return {"name": self.name, "category": self.category.value}


@dataclass
class RawDocument:
    id: str
    source_kind: SourceKind
    text: str
    paragraphs: list[str] = field(default_factory=list)
    tags: frozenset[TagRef] = frozenset()

    def __post_init__(self):
        self.source_kind = SourceKind(self.source_kind)
        self.tags = frozenset(self.tags)
        if self.paragraphs:
            self.text = "\n".join(self.paragraphs)

    @property
    def empty(self) -> bool:
        return not self.text.strip()

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "source_kind": self.source_kind.value,
            "text": self.text,
            "paragraphs": list(self.paragraphs),
            "tags": [t.to_dict() for t in sorted(self.tags)],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RawDocument":
        try:
            return cls(
                id=str(d["id"]),
                source_kind=SourceKind(d["source_kind"]),
                text=d.get("text", ""),
                paragraphs=list(d.get("paragraphs") or []),
                tags=frozenset(TagRef(t["name"], t["category"]) for t in d.get("tags") or []),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise IngestError("schema", f"bad corpus record: {e}") from None


@dataclass(frozen=True)
class Thesaurus:
    concepts: frozenset[str]

    def __len__(self):
        return len(self.concepts)

    def __contains__(self, item):
        return canonical(item) in self.concepts


def _read_bytes(path: Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except FileNotFoundError:
        raise IngestError("not-found", f"no such file: {path}") from None
    except IsADirectoryError:
        raise IngestError("not-found", f"not a file: {path}") from None


def read_text(path, encodings: Sequence[str] = DEFAULT_ENCODINGS) -> str:
    """Decode a file trying each encoding in turn; line endings normalized to ``\\n``."""
    raw = _read_bytes(path)
    for enc in encodings:
        try:
            text = raw.decode(enc)
            break
        except UnicodeDecodeError:
            continue
    else:
        raise IngestError("encoding", f"{path}: not decodable as any of {list(encodings)}")
    if text.startswith("﻿"):
        text = text[1:]
    return text.replace("\r\n", "\n").replace("\r", "\n")


def load_plaintext_bulletin(path, id: str, encodings: Sequence[str] = DEFAULT_ENCODINGS) -> RawDocument:
    return RawDocument(id=id, source_kind=SourceKind.BSV_OCR, text=read_text(path, encodings))


def _local_name(tag) -> str:
    if not isinstance(tag, str):  # comments, processing instructions
        return ""
    return tag.rsplit("}", 1)[-1].lower()


def _flatten(el: ET.Element) -> str:
    return _WS.sub(" ", "".join(el.itertext())).strip()


def extract_paragraphs(root: ET.Element, paragraph_elements=DEFAULT_PARAGRAPH_ELEMENTS) -> list[str]:
    """Text of paragraph-level elements in document order.

    Only the innermost matching elements are used so that a ``<texte>`` wrapping
    several ``<p>`` does not duplicate their content. When nothing matches, every
    leaf element with at least ``FALLBACK_MIN_CHARS`` characters counts.
    """
    names = {n.lower() for n in paragraph_elements}
    hits = []
    for el in root.iter():
        if _local_name(el.tag) not in names:
            continue
        if any(_local_name(d.tag) in names for d in el.iter() if d is not el):
            continue
        hits.append(_flatten(el))
    if not hits:
        for el in root.iter():
            if len(el) == 0 and isinstance(el.tag, str):
                t = _flatten(el)
                if len(t) >= FALLBACK_MIN_CHARS:
                    hits.append(t)
    return [h for h in hits if h]


def load_xml_bulletin(path, id: str, paragraph_elements=DEFAULT_PARAGRAPH_ELEMENTS) -> RawDocument:
    raw = _read_bytes(path)
    try:
        root = ET.fromstring(raw)
    except ET.ParseError as e:
        raise IngestError("parse", f"{path}: {e}") from None
    paragraphs = extract_paragraphs(root, paragraph_elements)
    return RawDocument(id=id, source_kind=SourceKind.BSV_XML, text="", paragraphs=paragraphs)


def _sniff_jsonl(path, text: str) -> bool:
    suffix = Path(path).suffix.lower()
    if suffix in (".jsonl", ".json", ".ndjson"):
        return True
    if suffix in (".csv", ".tsv", ".txt"):
        return False
    return text.lstrip().startswith("{")


def _jsonl_records(text: str, path) -> Iterator[tuple[int, dict]]:
    for lineno, line in enumerate(text.split("\n"), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise IngestError("schema", f"{path}:{lineno}: invalid JSON ({e.msg})") from None
        if not isinstance(rec, dict):
            raise IngestError("schema", f"{path}:{lineno}: expected a JSON object")
        yield lineno, rec


def load_tag_catalog(path) -> list[tuple[str, frozenset[TagRef]]]:
    """Per-document tag assignment, in order of first appearance.

    Accepts CSV with header ``doc_id,tag,category`` or JSONL with the same keys.
    """
    text = read_text(path)
    if _sniff_jsonl(path, text):
        rows = ((n, r) for n, r in _jsonl_records(text, path))
    else:
        reader = csv.DictReader(io.StringIO(text))
        missing = {"doc_id", "tag", "category"} - set(reader.fieldnames or [])
        if missing:
            raise IngestError("schema", f"{path}: missing columns {sorted(missing)}")
        rows = ((n, r) for n, r in enumerate(reader, 2))

    assignment: dict[str, set[TagRef]] = {}
    for lineno, rec in rows:
        try:
            doc_id, name, cat = rec["doc_id"], rec["tag"], rec["category"]
        except KeyError as e:
            raise IngestError("schema", f"{path}:{lineno}: missing field {e}") from None
        if doc_id is None or str(doc_id).strip() == "":
            raise IngestError("schema", f"{path}:{lineno}: empty doc_id")
        try:
            ref = TagRef(str(name or ""), str(cat or ""))
        except IngestError as e:
            raise IngestError("schema", f"{path}:{lineno}: {e.message}") from None
        assignment.setdefault(str(doc_id).strip(), set()).add(ref)
    return [(d, frozenset(tags)) for d, tags in assignment.items()]


def catalog_index(catalog: Iterable[tuple[str, frozenset[TagRef]]]) -> dict[str, frozenset[TagRef]]:
    out: dict[str, set[TagRef]] = {}
    for doc_id, tags in catalog:
        out.setdefault(doc_id, set()).update(tags)
    return {k: frozenset(v) for k, v in out.items()}


def load_thesaurus(path) -> Thesaurus:
    text = read_text(path)
    if _sniff_jsonl(path, text) and Path(path).suffix.lower() != ".txt":
        labels = []
        for lineno, rec in _jsonl_records(text, path):
            if "label" not in rec:
                raise IngestError("schema", f"{path}:{lineno}: missing field 'label'")
            labels.append(str(rec["label"]))
    else:
        labels = text.splitlines()
    concepts = frozenset(c for c in map(canonical, labels) if c)
    if not concepts:
        raise IngestError("empty-thesaurus", f"{path}: no concept labels")
    return Thesaurus(concepts)


def write_corpus(docs: Iterable[RawDocument], path) -> None:
    from .fileio import atomic_write_text

    atomic_write_text(path, "".join(json.dumps(d.to_dict(), ensure_ascii=False, sort_keys=True) + "\n" for d in docs))


def read_corpus(path) -> list[RawDocument]:
    text = read_text(path, ("utf-8",))
    docs = [RawDocument.from_dict(rec) for _, rec in _jsonl_records(text, path)]
    seen = set()
    for d in docs:
        if d.id in seen:
            raise IngestError("duplicate-id", f"{path}: document id {d.id!r} appears twice")
        seen.add(d.id)
    return docs


def load_bulletin_dir(
    xml_dir=None,
    ocr_dir=None,
    paragraph_elements=DEFAULT_PARAGRAPH_ELEMENTS,
    catalog: Mapping[str, frozenset[TagRef]] | None = None,
) -> list[RawDocument]:
    """Load every ``*.xml`` / ``*.txt`` file under the given directories.

    The document id is the file stem; ids must be unique across both directories.
    """
    docs: dict[str, RawDocument] = {}

    def add(doc):
        if doc.id in docs:
            raise IngestError("duplicate-id", f"document id {doc.id!r} appears twice")
        if catalog and doc.id in catalog:
            doc.tags = catalog[doc.id]
        docs[doc.id] = doc

    if xml_dir is not None:
        for p in sorted(Path(xml_dir).rglob("*.xml")):
            add(load_xml_bulletin(p, p.stem, paragraph_elements))
    if ocr_dir is not None:
        for p in sorted(Path(ocr_dir).rglob("*.txt")):
            add(load_plaintext_bulletin(p, p.stem))
    return [docs[k] for k in sorted(docs)]
