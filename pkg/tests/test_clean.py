import json
import unicodedata

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phytonlp.clean import (
    PHONE_RE,
    URL_RE,
    CleaningConfig,
    clean_document,
    clean_documents,
    clean_text,
    collapse_repeats,
    default_stopwords,
    drop_short_lines,
    normalize_whitespace,
    remove_spaced_letter_runs,
    remove_stopwords,
    strip_punctuation,
    strip_urls_phones,
)
from phytonlp.errors import ConfigError
from phytonlp.ingest import RawDocument, SourceKind

CFG = CleaningConfig.for_classification()


# Examples from the rule definitions.

@pytest.mark.parametrize(
    "text, expected",
    [
        ("Visitez http://ex.fr svp", "Visitez svp"),
        ("appelez 06 12 34 56 78 vite", "appelez vite"),
        ("", ""),
        ("tel 01.23.45.67.89 ou +33 6 12 34 56 78 fin", "tel ou fin"),
        ("site www.ecophyto.fr/bsv, merci", "site merci"),
        ("FTP://files.example.org/a b", "b"),
        ("code 0612345678", "code"),
        ("année 2019 et 12345678901 restent", "année 2019 et 12345678901 restent"),
    ],
)
def test_strip_urls_phones(text, expected):
    assert strip_urls_phones(text) == expected


@pytest.mark.parametrize(
    "text, n, expected",
    [
        ("pyrale 5\nle seuil est atteint", 3, "le seuil est atteint"),
        ("a b c", 3, "a b c"),
        ("a\nb c\n\nd e f", 1, "a\nb c\n\nd e f"),
        ("un deux\ntrois quatre cinq", 3, "trois quatre cinq"),
    ],
)
def test_drop_short_lines(text, n, expected):
    assert drop_short_lines(text, n) == expected


@pytest.mark.parametrize(
    "text, expected",
    [
        ("B U L L E T I N DE SANTE", "DE SANTE"),
        ("A B fin", "A B fin"),
        ("x\nB\nU\nL\nL\nE\nT\nI\nN\ny", "x\ny"),
        ("avant B S V A après", "avant après"),
        ("B S V seul", "B S V seul"),
        ("ligne un\nG R A N D E S   C U L T U R E S\nligne deux", "ligne un\nligne deux"),
        ("titre E T A T\nsuite", "titre\nsuite"),
    ],
)
def test_remove_spaced_letter_runs(text, expected):
    assert remove_spaced_letter_runs(text) == expected


def _run_oracle(text: str) -> list[str]:
    """Independent scan: drop maximal runs of >= 4 single uppercase-letter tokens."""
    toks = text.split()
    out, i = [], 0
    while i < len(toks):
        j = i
        while j < len(toks) and len(toks[j]) == 1 and toks[j].isupper():
            j += 1
        if j - i >= 4:
            i = j
        elif j > i:
            out.extend(toks[i:j])
            i = j
        else:
            out.append(toks[i])
            i += 1
    return out


_letters = st.lists(
    st.one_of(st.sampled_from(list("ABCDEFGHIJ")), st.sampled_from(["x", "y", "mot", "Blé", "é", "É", "12"])),
    max_size=40,
)


@settings(max_examples=300, deadline=None)
@given(_letters, st.lists(st.sampled_from([" ", "\n", "  ", " \n "]), min_size=40, max_size=40))
def test_spaced_runs_token_oracle(tokens, seps):
    text = "".join(t + s for t, s in zip(tokens, seps))
    assert remove_spaced_letter_runs(text).split() == _run_oracle(text)


@pytest.mark.parametrize(
    "text, expected",
    [("fini...!!!", "fini.!"), ("a   b", "a b"), ("a\n\n\nb", "a\nb"), ("quoi??? oui.. non!!", "quoi? oui. non!")],
)
def test_collapse_repeats(text, expected):
    assert collapse_repeats(text) == expected


@pytest.mark.parametrize(
    "text, stops, expected",
    [
        ("le seuil de danger", {"le", "de"}, "seuil danger"),
        ("le seuil de danger", set(), "le seuil de danger"),
        ("Le LE le", {"le"}, ""),
        ("Été été", {"ÉTÉ"}, ""),
    ],
)
def test_remove_stopwords(text, stops, expected):
    assert remove_stopwords(text, stops) == expected


def test_strip_punctuation():
    assert strip_punctuation("l'apparition d’altises").split() == ["l", "apparition", "d", "altises"]
    assert strip_punctuation("pomme-de-terre - fin -").split() == ["pomme-de-terre", "fin"]
    assert strip_punctuation("« guillemets » (parenthèses) ; ok ?").split() == ["guillemets", "parenthèses", "ok"]
    assert len(strip_punctuation("a,b.c")) == len("a,b.c")


def test_clean_document_header_only_and_elision():
    d = clean_document(RawDocument("h", SourceKind.BSV_OCR, "B U L L E T I N"), CFG)
    assert d.text == "" and d.empty
    d = clean_document(RawDocument("e", SourceKind.BSV_OCR, "l'apparition des altises sur colza"), CFG)
    assert d.text == "apparition altises colza"
    assert d.word_count == 3


def test_stopword_asset():
    sw = default_stopwords()
    assert 150 <= len(sw) <= 170
    assert {"le", "la", "de", "des", "et"} <= sw
    assert all(w == w.lower().strip() for w in sw)


def test_config_validation_and_roundtrip():
    with pytest.raises(ConfigError):
        CleaningConfig(min_line_words=0)
    with pytest.raises(ConfigError):
        CleaningConfig(url_rule="other/2")
    with pytest.raises(ConfigError):
        CleaningConfig.from_dict({"nope": 1})
    for cfg in (CleaningConfig.for_classification(), CleaningConfig.for_lm(), CleaningConfig(stopwords={"Le", "DE"})):
        assert CleaningConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    assert CleaningConfig(stopwords={" Le "}).stopwords == {"le"}


def test_tweet_config_only_strips_urls_and_phones():
    cfg = CleaningConfig.for_tweets()
    text, _ = clean_text("Les pyrales arrivent !!! https://t.co/x 06 12 34 56 78", cfg)
    assert text == "Les pyrales arrivent !!!"


def test_parallel_matches_serial():
    docs = [RawDocument(f"d{i}", SourceKind.BSV_OCR, f"le puceron {i} est là.\nB U L L E T I N\nvoir http://x.fr/{i}") for i in range(12)]
    assert clean_documents(docs, CFG, jobs=2) == clean_documents(docs, CFG, jobs=1)


# Invariants.

def _texts():
    alphabet = st.sampled_from(
        list("abcdeéèBSVULTIN ") + [" ", "\n", "\n", ".", "!", "?", "'", "’", "-", ",", "|", "\t", "0", "6", ":", "/", "«"]
    )
    words = st.sampled_from(["le", "la", "de", "puceron", "mildiou", "http://a.fr", "www.b.fr", "06 12 34 56 78", "B U L L", "Étude"])
    return st.lists(st.one_of(alphabet, words), max_size=80).map("".join) | st.text(max_size=200)


CONFIGS = [CleaningConfig.for_classification(), CleaningConfig.for_lm(), CleaningConfig.for_tweets(), CleaningConfig(min_line_words=1)]


def _no_spaced_runs(text: str) -> bool:
    run = 0
    for t in text.split():
        run = run + 1 if len(t) == 1 and t.isupper() else 0
        if run >= 4:
            return False
    return True


@settings(max_examples=400, deadline=None)
@given(_texts(), st.sampled_from(CONFIGS))
def test_idempotent(text, cfg):
    once, _ = clean_text(text, cfg)
    assert clean_text(once, cfg)[0] == once


@settings(max_examples=400, deadline=None)
@given(_texts())
def test_soundness(text):
    out, _ = clean_text(text, CFG)
    assert not URL_RE.search(out)
    assert not PHONE_RE.search(out)
    assert _no_spaced_runs(out)
    assert all(len(line.split()) >= CFG.min_line_words for line in out.split("\n")) or out == ""
    assert not any(t.lower() in CFG.stopwords for t in out.split())
    for i, ch in enumerate(out):
        if unicodedata.category(ch).startswith("P"):
            assert ch == "-" and out[i - 1].isalnum() and out[i + 1].isalnum()


@settings(max_examples=400, deadline=None)
@given(_texts())
def test_monotone_length(text):
    for rule in (
        strip_urls_phones,
        remove_spaced_letter_runs,
        collapse_repeats,
        strip_punctuation,
        lambda t: remove_stopwords(t, CFG.stopwords),
        lambda t: drop_short_lines(t, 3),
        normalize_whitespace,
    ):
        assert len(rule(text)) <= len(text)
    for cfg in CONFIGS:
        assert len(clean_text(text, cfg)[0]) <= len(text)


_plain = st.lists(
    st.sampled_from(["le", "puceron", "Mildiou", "B", "U", "L", "E", "x", "seuil", ".", "!!", "'", "\n", " ", ",", "l'"]),
    max_size=60,
).map(" ".join)


@settings(max_examples=300, deadline=None)
@given(_plain)
def test_order_preserved(text):
    # Without URLs/phones, the output tokens are a subsequence of the punctuation-stripped input.
    out = clean_text(text, CFG)[0].split()
    src = iter(strip_punctuation(text).split())
    assert all(any(tok == s for s in src) for tok in out)


# Fixture corpus and golden files.

def _load(fixtures_dir, name):
    return [json.loads(l) for l in (fixtures_dir / name).read_text(encoding="utf-8").splitlines()]


def test_golden_files(fixtures_dir):
    docs = _load(fixtures_dir, "clean_corpus.jsonl")
    golden = {g["id"]: g for g in _load(fixtures_dir, "clean_golden.jsonl")}
    assert len(docs) == 100
    for d in docs:
        text, stats = clean_text(d["text"], CFG)
        assert text == golden[d["id"]]["text"], d["id"]
        assert stats == golden[d["id"]]["removed_stats"], d["id"]
