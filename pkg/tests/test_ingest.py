import json
from html.parser import HTMLParser

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phytonlp.errors import IngestError
from phytonlp.ingest import (
    RawDocument,
    SourceKind,
    TagRef,
    load_bulletin_dir,
    load_plaintext_bulletin,
    load_tag_catalog,
    load_thesaurus,
    load_xml_bulletin,
    read_corpus,
    write_corpus,
)


def test_plaintext_crlf(tmp_path):
    p = tmp_path / "a.txt"
    p.write_bytes(b"a\r\nb")
    doc = load_plaintext_bulletin(p, "a")
    assert doc.text == "a\nb"
    assert doc.source_kind is SourceKind.BSV_OCR
    assert doc.paragraphs == []


def test_plaintext_empty_and_missing(tmp_path):
    p = tmp_path / "e.txt"
    p.write_bytes(b"")
    doc = load_plaintext_bulletin(p, "e")
    assert doc.text == "" and doc.empty
    with pytest.raises(IngestError) as e:
        load_plaintext_bulletin(tmp_path / "nope.txt", "x")
    assert e.value.kind == "not-found"


def test_plaintext_latin1_fallback(tmp_path):
    p = tmp_path / "l.txt"
    p.write_bytes("blé étiqueté".encode("latin-1"))
    assert load_plaintext_bulletin(p, "l").text == "blé étiqueté"


def test_plaintext_undecodable(tmp_path):
    p = tmp_path / "b.txt"
    p.write_bytes(b"\xff\xfe\x00")
    with pytest.raises(IngestError) as e:
        load_plaintext_bulletin(p, "b", encodings=("utf-8", "ascii"))
    assert e.value.kind == "encoding"


def test_xml_two_paragraphs(tmp_path):
    p = tmp_path / "x.xml"
    p.write_text("<doc><p>a</p><p>b</p></doc>", encoding="utf-8")
    doc = load_xml_bulletin(p, "x")
    assert doc.paragraphs == ["a", "b"]
    assert doc.text == "a\nb"


class _Stripper(HTMLParser):
    """Oracle: collect text per <p>, independent of ElementTree."""

    def __init__(self):
        super().__init__()
        self.paras, self.depth, self.buf = [], 0, []

    def handle_starttag(self, tag, attrs):
        if tag == "p":
            self.depth += 1
            self.buf = []

    def handle_endtag(self, tag):
        if tag == "p":
            self.depth -= 1
            text = " ".join("".join(self.buf).split())
            if text:
                self.paras.append(text)

    def handle_data(self, data):
        if self.depth:
            self.buf.append(data)


MARKUP_FIXTURES = [
    "<doc><p>x <b>y</b></p></doc>",
    "<doc><titre>T</titre><p>Le <i>puceron</i> est <b>présent</b> sur <u>blé</u>.</p><p>  suite\n  du texte </p></doc>",
    "<doc><section><p>un<br/>deux</p></section><p></p><p>  </p><p><b>seul</b></p></doc>",
    "<bulletin><p>mildiou <span class='x'>sur <em>vigne</em></span> fin</p></bulletin>",
]


@pytest.mark.parametrize("xml", MARKUP_FIXTURES)
def test_xml_markup_matches_oracle(tmp_path, xml):
    p = tmp_path / "m.xml"
    p.write_text(xml, encoding="utf-8")
    oracle = _Stripper()
    oracle.feed(xml)
    assert load_xml_bulletin(p, "m").paragraphs == oracle.paras


def test_xml_markup_example(tmp_path):
    p = tmp_path / "m.xml"
    p.write_text("<doc><p>x <b>y</b></p></doc>", encoding="utf-8")
    assert load_xml_bulletin(p, "m").paragraphs == ["x y"]


def test_xml_truncated(tmp_path):
    p = tmp_path / "t.xml"
    p.write_text("<doc><p>a</p><p>b", encoding="utf-8")
    with pytest.raises(IngestError) as e:
        load_xml_bulletin(p, "t")
    assert e.value.kind == "parse"


def test_xml_nested_paragraph_elements_not_duplicated(tmp_path):
    p = tmp_path / "n.xml"
    p.write_text("<doc><texte><p>a</p><p>b</p></texte><texte>c</texte></doc>", encoding="utf-8")
    assert load_xml_bulletin(p, "n").paragraphs == ["a", "b", "c"]


def test_xml_fallback_and_empty(tmp_path):
    p = tmp_path / "f.xml"
    p.write_text("<doc><div>short</div><div>this leaf has more than twenty characters</div></doc>", encoding="utf-8")
    assert load_xml_bulletin(p, "f").paragraphs == ["this leaf has more than twenty characters"]
    q = tmp_path / "g.xml"
    q.write_text("<doc><div>short</div></doc>", encoding="utf-8")
    doc = load_xml_bulletin(q, "g")
    assert doc.paragraphs == [] and doc.empty


def test_xml_namespaced(tmp_path):
    p = tmp_path / "ns.xml"
    p.write_text('<d:doc xmlns:d="urn:x"><d:p>un</d:p><d:paragraphe>deux</d:paragraphe></d:doc>', encoding="utf-8")
    assert load_xml_bulletin(p, "ns").paragraphs == ["un", "deux"]


def test_tag_catalog_csv(tmp_path):
    p = tmp_path / "tags.csv"
    p.write_text(
        "doc_id,tag,category\ndoc1,pyrale,bioagressor\ndoc1,Pyrale ,bioagressor\ndoc2,Mildiou,disease\ndoc2,blé,crop\n",
        encoding="utf-8",
    )
    cat = dict(load_tag_catalog(p))
    assert cat["doc1"] == {TagRef("pyrale", "bioagressor")}
    assert cat["doc2"] == {TagRef("mildiou", "disease"), TagRef("blé", "crop")}
    assert load_tag_catalog(p) == load_tag_catalog(p)


def test_tag_catalog_jsonl_and_unknown_category(tmp_path):
    p = tmp_path / "tags.jsonl"
    p.write_text(json.dumps({"doc_id": "d", "tag": "pyrale", "category": "bioagressor"}) + "\n", encoding="utf-8")
    assert load_tag_catalog(p) == [("d", frozenset({TagRef("pyrale", "bioagressor")}))]
    q = tmp_path / "bad.csv"
    q.write_text("doc_id,tag,category\nd,chiendent,weed\n", encoding="utf-8")
    with pytest.raises(IngestError) as e:
        load_tag_catalog(q)
    assert e.value.kind == "schema"


def test_tagref_canonical():
    t = TagRef("  Pyrale  du   Maïs ", "BIOAGRESSOR")
    assert t.name == "pyrale du maïs" and t.category.value == "bioagressor"
    with pytest.raises(IngestError):
        TagRef("   ", "crop")


def test_thesaurus(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("Blé\nblé \n\n", encoding="utf-8")
    assert load_thesaurus(p).concepts == {"blé"}
    p.write_text("a\nb\nc\n", encoding="utf-8")
    assert len(load_thesaurus(p)) == 3
    j = tmp_path / "t.jsonl"
    j.write_text('{"label": "Colza"}\n{"label": "orge"}\n', encoding="utf-8")
    assert load_thesaurus(j).concepts == {"colza", "orge"}
    e = tmp_path / "empty.txt"
    e.write_text("", encoding="utf-8")
    with pytest.raises(IngestError) as err:
        load_thesaurus(e)
    assert err.value.kind == "empty-thesaurus"


_docs = st.builds(
    lambda i, kind, paras, text, tags: RawDocument(
        id=f"d{i}",
        source_kind=kind,
        text="" if kind is SourceKind.BSV_XML else text,
        paragraphs=paras if kind is SourceKind.BSV_XML else [],
        tags=frozenset(tags),
    ),
    st.integers(0, 10**6),
    st.sampled_from(list(SourceKind)),
    st.lists(st.text(min_size=1).filter(lambda s: "\n" not in s), max_size=4),
    st.text(),
    st.sets(st.builds(TagRef, st.sampled_from(["pyrale", "mildiou", "blé"]), st.sampled_from(["bioagressor", "disease", "crop"]))),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(_docs, max_size=6, unique_by=lambda d: d.id))
def test_corpus_roundtrip(tmp_path_factory, docs):
    path = tmp_path_factory.mktemp("c") / "corpus.jsonl"
    write_corpus(docs, path)
    back = read_corpus(path)
    assert back == docs
    for d in back:
        if d.source_kind is SourceKind.BSV_XML and d.paragraphs:
            assert d.text == "\n".join(d.paragraphs)


def test_corpus_roundtrip_unicode_line_separators(tmp_path):
    # json.dumps keeps U+0085 and U+2028 raw; the reader must split on "\n" only.
    docs = [RawDocument(id=f"u{i}", source_kind=SourceKind.BSV_OCR, text=t) for i, t in enumerate(["\x85", "a\u2028b", "c\u2029d\x1ce"])]
    write_corpus(docs, tmp_path / "c.jsonl")
    assert read_corpus(tmp_path / "c.jsonl") == docs


def test_corpus_duplicate_ids(tmp_path):
    d = RawDocument("a", SourceKind.BSV_OCR, "x")
    p = tmp_path / "c.jsonl"
    write_corpus([d, d], p)
    with pytest.raises(IngestError):
        read_corpus(p)


def test_bulletin_dir(tmp_path):
    (tmp_path / "ocr").mkdir()
    (tmp_path / "xml").mkdir()
    (tmp_path / "ocr" / "b1.txt").write_text("texte", encoding="utf-8")
    (tmp_path / "xml" / "x1.xml").write_text("<d><p>p1</p></d>", encoding="utf-8")
    docs = load_bulletin_dir(tmp_path / "xml", tmp_path / "ocr", catalog={"b1": frozenset({TagRef("pyrale", "bioagressor")})})
    assert [d.id for d in docs] == ["b1", "x1"]
    assert docs[0].tags == {TagRef("pyrale", "bioagressor")}
    assert docs[1].text == "p1"
