import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xlsearch import pctd
from xlsearch.errors import IntegrityError, KeywordError, StoreError
from xlsearch.secure_index import (
    CorpusStats,
    DocumentRecord,
    OutsourcedTuple,
    build_secure_index,
    decrypt_document,
    derive_symmetric_key,
    fits_k2u,
    k2u,
    max_keyword_units,
    outsource,
    prepare_documents,
    read_corpus,
    tfidf_weights,
    tokenize,
)


def base65536(word: str) -> int:
    # independent route: explicit positional sum over UTF-16 code units
    raw = word.encode("utf-16-le")
    units = [raw[i] | (raw[i + 1] << 8) for i in range(0, len(raw), 2)]
    return sum(u * 65536**i for i, u in enumerate(units))


def test_k2u_examples():
    assert k2u("a") == 97
    assert k2u("ab") == 97 + 98 * 65536 == 6422625
    assert k2u("中") == 20013
    assert k2u("𝄞") == 0xD834 + 0xDD1E * 65536


@settings(max_examples=200)
@given(st.text(alphabet=st.characters(min_codepoint=1, max_codepoint=0x10FFFF, blacklist_categories=("Cs",)), min_size=1, max_size=12))
def test_k2u_matches_positional_oracle(word):
    assert k2u(word) == base65536(word)


@settings(max_examples=200)
@given(
    st.text(alphabet=st.characters(min_codepoint=1, max_codepoint=0xFFFF, blacklist_categories=("Cs",)), min_size=1, max_size=6),
    st.text(alphabet=st.characters(min_codepoint=1, max_codepoint=0xFFFF, blacklist_categories=("Cs",)), min_size=1, max_size=6),
)
def test_k2u_injective(a, b):
    assert (k2u(a) == k2u(b)) == (a == b)


def test_k2u_rejects_bad_input(keys64):
    with pytest.raises(KeywordError):
        k2u("")
    with pytest.raises(KeywordError):
        k2u("a\x00")
    assert max_keyword_units(keys64.params) == 7
    assert fits_k2u("chiens!", keys64.params)
    with pytest.raises(KeywordError):
        k2u("abcdefgh", keys64.params)


def test_tfidf_example():
    stats = CorpusStats(8, {"x": 2, "y": 8})
    toks = ["x", "x"] + ["y"] * 8
    assert dict(tfidf_weights(stats, toks)) == {"x": 277}
    assert math.floor(1000 * 0.2 * math.log(4) + 0.5) == 277


def test_single_document_corpus_has_no_weights(caplog):
    stats = CorpusStats.from_token_lists([["a", "b"]])
    assert tfidf_weights(stats, ["a", "b"]) == []
    assert "single-document" in caplog.text


def test_tokenize():
    assert tokenize("The Dog, the dog!  «chien»") == ["the", "dog", "the", "dog", "chien"]
    assert tokenize("狗 猫。") == ["狗", "猫"]


def test_prepare_documents_drops_long_tokens_and_weights(keys64):
    entries = [(1, "eng", "dog dog cat"), (2, "eng", "cat bird"), (3, "eng", "extraordinarily dog")]
    docs = prepare_documents(entries, keys64.params)
    assert [d.id for d in docs] == [1, 2, 3]
    assert all(len(k) <= 7 for d in docs for k, _ in d.keywords)
    weights = dict(docs[0].keywords)
    assert weights["dog"] == math.floor(1000 * (2 / 3) * math.log(3 / 2) + 0.5)


def test_index_shape_and_randomness(keys64):
    p, pk = keys64.params, keys64.owner.pk
    doc = DocumentRecord(5, b"x", "eng", tuple((f"w{i}", i + 1) for i in range(8)))
    a = build_secure_index(p, pk, doc, random.Random(1))
    b = build_secure_index(p, pk, doc, random.Random(2))
    assert len(a) == 8 and sum(len(e) for e in a) == 16
    flat_a = {c.c1 for e in a for c in e}
    assert flat_a.isdisjoint({c.c1 for e in b for c in e})
    opened = {pctd.decrypt_weak(p, keys64.owner.sk, u): pctd.decrypt_weak(p, keys64.owner.sk, w) for u, w in a}
    assert opened == {k2u(k): w for k, w in doc.keywords}


def test_symmetric_key_derivation():
    assert derive_symmetric_key(0) == derive_symmetric_key(0)
    assert derive_symmetric_key(12345) != derive_symmetric_key(12346)
    assert len(derive_symmetric_key(2**500)) == 32


def test_outsource_round_trip_and_tamper(keys64):
    p, owner = keys64.params, keys64.owner
    doc = DocumentRecord(2**39 + 7, "chien noir".encode(), "fra", (("chien", 100),))
    tup = outsource(p, owner.pk, doc)
    K = pctd.decrypt_weak(p, owner.sk, tup.enc_keyseed)
    assert decrypt_document(derive_symmetric_key(K), tup.doc_blob) == doc.body
    assert pctd.decrypt_weak(p, owner.sk, tup.enc_id) == doc.id
    assert pctd.decrypt_weak(p, owner.sk, tup.enc_lang) == k2u("fra")
    bad = bytearray(tup.doc_blob)
    bad[-1] ^= 1
    with pytest.raises(IntegrityError):
        decrypt_document(derive_symmetric_key(K), bytes(bad))


def test_tuple_record_never_contains_plaintext(keys64):
    p = keys64.params
    doc = DocumentRecord(0x5EC12E7D0C, b"secret body", "eng", (("zyxwvut", 4321),))
    rec = OutsourcedTuple.to_record(outsource(p, keys64.owner.pk, doc))
    text = repr(rec)
    assert format(doc.id, "x") not in text
    assert format(k2u("zyxwvut"), "x") not in text
    assert OutsourcedTuple.from_record(rec).enc_id.to_record() == rec["id"]
    with pytest.raises(StoreError):
        OutsourcedTuple.from_record(rec | {"version": 9})


def test_read_corpus(tmp_path):
    (tmp_path / "a.txt").write_text("dog dog", encoding="utf-8")
    (tmp_path / "b.txt").write_text("狗", encoding="utf-8")
    (tmp_path / "manifest.tsv").write_text("# id lang file\n1\teng\ta.txt\n2\tcmn\tb.txt\t狗=1500;猫=20\n", encoding="utf-8")
    entries, overrides = read_corpus(tmp_path)
    assert entries == [(1, "eng", "dog dog"), (2, "cmn", "狗")]
    assert overrides == {2: [("狗", 1500), ("猫", 20)]}
    (tmp_path / "manifest.tsv").write_text("1\teng\ta.txt\n1\teng\ta.txt\n", encoding="utf-8")
    with pytest.raises(StoreError):
        read_corpus(tmp_path)
