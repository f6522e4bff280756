"""Synthetic bulletins, tags, tweets and risk sentences with planted hazard vocabulary.

Each synthetic bulletin draws its bioagressor and disease tags first; the
tagged names are then scattered through OCR-like text (with headers spelled
vertically, URLs, phone numbers and broken table rows), so the tags are
recoverable from the text and a classifier has something real to learn.
"""
from __future__ import annotations

import csv
import io
import json
import random
from dataclasses import dataclass
from pathlib import Path

from .ingest import RawDocument, SourceKind, TagRef

BIOAGRESSOR_WORDS = ("puceron", "pyrale", "altise")
DISEASE_WORDS = ("mildiou", "rouille", "septoriose")
CROP_WORDS = ("blé", "colza", "maïs", "vigne", "orge", "betterave", "pomme de terre")

BACKGROUND_WORDS = (
    "parcelle stade végétation observation semaine conditions climatiques températures pluie "
    "réseau surveillance bulletin région culture feuilles tiges épis grappes plantes développement "
    "levée floraison récolte semis variété sensible situation secteur parcelles observées fréquence "
    "intensité début fin période prévision modèle risque faible moyen élevé nul humidité "
    "vent sol irrigation rendement qualité grains racines jeunes adultes larves œufs captures piège "
    "pièges lumineux phéromone nombre individus mâles femelles cartographie absence présence note "
    "apparition premiers moins seuil intervention traitement produit dose application préconisation "
    "agriculteurs techniciens chambre agriculture coopérative semaine prochaine évolution lente rapide "
    "rameaux bourgeons taille vigueur froid chaud sec humide orage gel grêle matin soir jour nuit"
).split()
FRENCH_FILLERS = ("le", "la", "les", "de", "des", "du", "et", "en", "sur", "dans", "pour", "avec", "un", "une", "est", "sont", "par", "au", "aux")

HEADERS = (
    "B U L L E T I N   D E   S A N T E   D U   V E G E T A L",
    "B S V",
    "G R A N D E S   C U L T U R E S",
)
NOISE_LINES = (
    "Retrouvez le bulletin sur http://www.bsv-exemple.fr/bulletins !!!",
    "Contact animateur : 02 41 18 60 00 ou 06.12.34.56.78",
    "Plus d'informations : www.agriculture.gouv.fr",
    "Edition du jour...",
)


@dataclass
class SyntheticCorpus:
    docs: list[RawDocument]
    catalog: list[tuple[str, frozenset[TagRef]]]
    thesaurus: list[str]


def _tags_for(rng: random.Random) -> frozenset[TagRef]:
    tags = {TagRef(rng.choice(CROP_WORDS), "crop")}
    if rng.random() < 0.5:
        tags.update(TagRef(w, "bioagressor") for w in rng.sample(BIOAGRESSOR_WORDS, rng.randint(1, 2)))
    if rng.random() < 0.5:
        tags.update(TagRef(w, "disease") for w in rng.sample(DISEASE_WORDS, rng.randint(1, 2)))
    return frozenset(tags)


def _sentence(rng: random.Random, categories: list[list[str]], crop: str, rate: float) -> str:
    out = []
    for _ in range(rng.randint(7, 16)):
        hit = next((c for c in categories if rng.random() < rate), None)
        if hit:
            out.append(rng.choice(hit) + ("s" if rng.random() < 0.2 else ""))
        elif rng.random() < 0.04:
            out.append(crop)
        elif rng.random() < 0.3:
            out.append(rng.choice(FRENCH_FILLERS))
        else:
            out.append(rng.choice(BACKGROUND_WORDS))
    out[0] = out[0][:1].upper() + out[0][1:]
    return " ".join(out) + rng.choice((".", ".", ".", " !", "..."))


def synthetic_bulletin_text(rng: random.Random, tags: frozenset[TagRef], n_words: int, rate: float = 0.08) -> str:
    """OCR-like bulletin text; each tagged category fills about ``rate`` of the words."""
    ordered = sorted(tags)
    crop = next(t.name for t in ordered if t.category.value == "crop")
    categories = [
        [t.name for t in ordered if t.category.value == cat] for cat in ("bioagressor", "disease")
    ]
    categories = [c for c in categories if c]
    lines = [rng.choice(HEADERS)]
    count = 0
    while count < n_words:
        roll = rng.random()
        if roll < 0.04:
            lines.append(rng.choice(NOISE_LINES))
        elif roll < 0.09:
            lines.append(f"{rng.randint(1, 40)} | {rng.randint(0, 9)}")
        else:
            s = _sentence(rng, categories, crop, rate)
            count += len(s.split())
            lines.append(s)
    return "\n".join(lines)


def synthetic_corpus(n_docs: int = 500, seed: int = 0, min_words: int = 1500, max_words: int = 3500, rate: float = 0.08) -> SyntheticCorpus:
    rng = random.Random(seed)
    docs, catalog = [], []
    for i in range(n_docs):
        doc_id = f"bsv{i:05d}"
        tags = _tags_for(rng)
        text = synthetic_bulletin_text(rng, tags, rng.randint(min_words, max_words), rate)
        docs.append(RawDocument(id=doc_id, source_kind=SourceKind.BSV_OCR, text=text))
        catalog.append((doc_id, tags))
    return SyntheticCorpus(docs, catalog, list(CROP_WORDS) + ["céréales", "oléagineux", "arboriculture"])


def synthetic_xml_bulletin(rng: random.Random, n_paragraphs: int = 6) -> str:
    tags = _tags_for(rng)
    paras = []
    for _ in range(n_paragraphs):
        text = synthetic_bulletin_text(rng, tags, rng.randint(20, 60)).split("\n", 1)[-1]
        paras.append(" ".join(text.split()).replace("&", "et").replace("<", " ").replace(">", " "))
    body = "\n".join(f"    <p>{p}</p>" for p in paras)
    return f'<?xml version="1.0" encoding="UTF-8"?>\n<bulletin>\n  <titre>Bulletin de santé du végétal</titre>\n  <texte>\n{body}\n  </texte>\n</bulletin>\n'


def synthetic_tweets(n: int = 60, seed: int = 0) -> list[dict]:
    rng = random.Random(seed)
    out = []
    for i in range(n):
        kind = rng.random()
        words = rng.sample(BACKGROUND_WORDS, 8)
        if kind < 0.35:
            words.insert(rng.randint(0, 8), rng.choice(BIOAGRESSOR_WORDS) + rng.choice(("", "s")))
        elif kind < 0.6:
            words.insert(rng.randint(0, 8), rng.choice(DISEASE_WORDS))
        elif kind < 0.8:
            words.insert(rng.randint(0, 8), rng.choice(CROP_WORDS))
        text = " ".join(words) + (" https://t.co/abc" + str(i) if rng.random() < 0.3 else "")
        out.append({"id": f"tw{i:04d}", "text": text, "created_at": f"2020-05-{1 + i % 28:02d}T08:00:00Z"})
    return out


def synthetic_risk_sentences(n: int = 400, seed: int = 0) -> list[dict]:
    """Short sentences whose labels say whether a pest or disease threshold is reached."""
    rng = random.Random(seed)
    out = []
    for i in range(n):
        bio = rng.random() < 0.4
        dis = rng.random() < 0.4
        parts = []
        if bio:
            parts.append(f"le seuil d'intervention pour {rng.choice(BIOAGRESSOR_WORDS)} est atteint, traitement recommandé")
        elif rng.random() < 0.5:
            parts.append(f"présence faible de {rng.choice(BIOAGRESSOR_WORDS)}, seuil non atteint")
        if dis:
            parts.append(f"risque {rng.choice(DISEASE_WORDS)} élevé, protection fongicide à prévoir")
        elif rng.random() < 0.5:
            parts.append(f"pas de {rng.choice(DISEASE_WORDS)} observé cette semaine")
        if not parts:
            parts.append(" ".join(rng.sample(BACKGROUND_WORDS, 8)))
        out.append({"sentence": "; ".join(parts) + ".", "bioagressor": bio, "disease": dis, "doc_id": f"r{i // 4:04d}"})
    return out


def catalog_csv(catalog) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["doc_id", "tag", "category"])
    for doc_id, tags in catalog:
        for t in sorted(tags):
            w.writerow([doc_id, t.name, t.category.value])
    return buf.getvalue()


def write_synthetic_inputs(directory, n_docs: int = 500, seed: int = 0, n_xml: int = 20) -> dict[str, str]:
    """Write a complete synthetic input tree and return the paths by role."""
    root = Path(directory)
    corpus = synthetic_corpus(n_docs, seed)
    (root / "ocr").mkdir(parents=True, exist_ok=True)
    (root / "xml").mkdir(parents=True, exist_ok=True)
    for d in corpus.docs:
        (root / "ocr" / f"{d.id}.txt").write_text(d.text + "\n", encoding="utf-8")
    rng = random.Random(seed + 1)
    for i in range(n_xml):
        (root / "xml" / f"xml{i:04d}.xml").write_text(synthetic_xml_bulletin(rng), encoding="utf-8")
    (root / "tags.csv").write_text(catalog_csv(corpus.catalog), encoding="utf-8")
    (root / "thesaurus.txt").write_text("\n".join(corpus.thesaurus) + "\n", encoding="utf-8")
    (root / "tweets.jsonl").write_text(
        "".join(json.dumps(t, ensure_ascii=False) + "\n" for t in synthetic_tweets(60, seed)), encoding="utf-8"
    )
    (root / "risk.jsonl").write_text(
        "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in synthetic_risk_sentences(400, seed)), encoding="utf-8"
    )
    return {
        "ocr_dir": str(root / "ocr"),
        "xml_dir": str(root / "xml"),
        "tags": str(root / "tags.csv"),
        "thesaurus": str(root / "thesaurus.txt"),
        "tweets": str(root / "tweets.jsonl"),
        "risk": str(root / "risk.jsonl"),
    }
