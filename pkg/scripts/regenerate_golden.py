"""Rebuild the cleaning fixture corpus and its golden outputs under tests/fixtures/.

Ten hand-written cases (vertical headers, broken table rows, URLs, phones,
repeated punctuation, French elisions) plus 90 synthetic bulletin excerpts.
Only rerun this after a deliberate rule change, then review the diff.
"""
import json
import random
from pathlib import Path

from phytonlp.clean import CleaningConfig, clean_text
from phytonlp.ingest import TagRef
from phytonlp.synthetic import synthetic_bulletin_text

HAND_WRITTEN = [
    ("bulletin-header", "B U L L E T I N DE SANTE DU VEGETAL\nLe puceron est présent sur les parcelles observées."),
    ("vertical-header", "x\nB\nU\nL\nL\nE\nT\nI\nN\ny"),
    ("broken-table", "pyrale 5\nle seuil est atteint\n12 | 3\nCaptures de pyrales en hausse cette semaine\n4"),
    ("url-phone", "Visitez http://ex.fr svp pour le bulletin complet\nappelez 06 12 34 56 78 vite ou le +33 2 41 18 60 00\nvoir www.agri.fr/bsv?id=3 demain"),
    ("repeats", "fini...!!! Attention ??? les altises arrivent sur colza !!!\n\n\nnouvelle ligne de texte ici"),
    ("elision", "l'apparition d'altises sur l'ensemble des parcelles aujourd’hui"),
    ("header-only", "B U L L E T I N"),
    ("empty", ""),
    ("hyphens", "pomme-de-terre et maïs - début de floraison -- risque moyen-élevé"),
    ("whitespace", "\tmildiou sur   vigne  \r\n  conditions   favorables  au   développement  "),
]


def main():
    root = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
    root.mkdir(parents=True, exist_ok=True)
    docs = [{"id": i, "text": t} for i, t in HAND_WRITTEN]
    rng = random.Random(2024)
    pool = [TagRef("blé", "crop"), TagRef("pyrale", "bioagressor"), TagRef("mildiou", "disease"), TagRef("altise", "bioagressor")]
    for k in range(90):
        tags = frozenset([pool[0]] + rng.sample(pool[1:], rng.randint(0, 3)))
        docs.append({"id": f"synthetic-{k:03d}", "text": synthetic_bulletin_text(rng, tags, rng.randint(5, 120))})
    cfg = CleaningConfig.for_classification()
    golden = []
    for d in docs:
        text, stats = clean_text(d["text"], cfg)
        golden.append({"id": d["id"], "text": text, "removed_stats": stats})
    dump = lambda rows: "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in rows)  # noqa: E731
    (root / "clean_corpus.jsonl").write_text(dump(docs), encoding="utf-8")
    (root / "clean_golden.jsonl").write_text(dump(golden), encoding="utf-8")
    print(f"wrote {len(docs)} fixture documents to {root}")


if __name__ == "__main__":
    main()
