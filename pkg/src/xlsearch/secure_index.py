"""Data-owner side: keyword integerization, TF-IDF weights, secure index, outsourcing."""

from __future__ import annotations

import hashlib
import logging
import math
import os
import secrets
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from . import pctd
from .errors import IntegrityError, KeywordError, StoreError
from .lexicon import normalize
from .pctd import Ciphertext, PublicParams

log = logging.getLogger(__name__)

SCALE = 1000
NONCE_BYTES = 12


# -- K2U ----------------------------------------------------------------------


def k2u(keyword: str, params: PublicParams | None = None) -> int:
    """Read the keyword's UTF-16 code units as a little-endian base-65536 integer.

    Unit ``i`` is weighted by ``2^(16 i)``.  Characters outside the BMP
    contribute their two surrogate units.
    """
    if not keyword:
        raise KeywordError("empty keyword")
    units = keyword.encode("utf-16-le")
    n_units = len(units) // 2
    u = int.from_bytes(units, "little")
    for i in range(n_units):
        if units[2 * i] == 0 and units[2 * i + 1] == 0:
            raise KeywordError(f"keyword {keyword!r} contains U+0000")
    if params is not None:
        if n_units > max_keyword_units(params) or u >= params.N:
            raise KeywordError(f"keyword {keyword!r} is too long for a {params.N.bit_length()}-bit modulus")
    return u


def max_keyword_units(params: PublicParams) -> int:
    return params.N.bit_length() // 16 - 1


def fits_k2u(keyword: str, params: PublicParams) -> bool:
    try:
        k2u(keyword, params)
    except KeywordError:
        return False
    return True


# -- keyword weights -----------------------------------------------------------


def tokenize(text: str) -> list[str]:
    """Whitespace tokens with surrounding punctuation stripped, NFC + casefolded."""
    out = []
    for raw in text.split():
        tok = raw.strip("".join(ch for ch in set(raw) if unicodedata.category(ch).startswith("P")))
        tok = normalize(tok)
        if tok:
            out.append(tok)
    return out


@dataclass(frozen=True)
class CorpusStats:
    n_docs: int
    df: dict[str, int]

    @classmethod
    def from_token_lists(cls, docs: Iterable[Sequence[str]]) -> "CorpusStats":
        df: Counter = Counter()
        n = 0
        for tokens in docs:
            n += 1
            df.update(set(tokens))
        return cls(n, dict(df))


def tfidf_weights(stats: CorpusStats, tokens: Sequence[str], scale: int = SCALE) -> list[tuple[str, int]]:
    """``round(S * tf * ln(M / df))`` per distinct token, zero weights dropped.

    ``tf`` is the relative frequency inside the document.  Order follows
    first occurrence.
    """
    if stats.n_docs < 1:
        raise ValueError("corpus statistics cover no documents")
    if stats.n_docs == 1:
        log.warning("single-document corpus: every IDF is zero")
    counts = Counter(tokens)
    length = len(tokens)
    out = []
    for term in dict.fromkeys(tokens):
        df = stats.df.get(term, 0)
        if df == 0:
            raise KeyError(f"term {term!r} is absent from the corpus statistics")
        alpha = math.floor(scale * (counts[term] / length) * math.log(stats.n_docs / df) + 0.5)
        if alpha > 0:
            out.append((term, alpha))
    return out


@dataclass(frozen=True)
class DocumentRecord:
    id: int
    body: bytes
    lang: str
    keywords: tuple[tuple[str, int], ...]


def prepare_documents(
    entries: Sequence[tuple[int, str, str]],
    params: PublicParams | None = None,
    *,
    overrides: dict[int, list[tuple[str, int]]] | None = None,
    scale: int = SCALE,
) -> list[DocumentRecord]:
    """Weight every ``(id, lang, text)`` entry against the corpus it belongs to.

    Tokens that cannot be integerized under ``params`` are dropped before
    statistics are taken.
    """
    overrides = overrides or {}
    token_lists = []
    for doc_id, _, text in entries:
        toks = tokenize(text)
        if params is not None:
            dropped = [t for t in toks if not fits_k2u(t, params)]
            if dropped:
                log.warning("doc %d: dropping %d over-long tokens", doc_id, len(dropped))
                toks = [t for t in toks if fits_k2u(t, params)]
        token_lists.append(toks)
    stats = CorpusStats.from_token_lists(token_lists)
    docs = []
    for (doc_id, lang, text), toks in zip(entries, token_lists):
        if doc_id in overrides:
            kws = [(normalize(k), int(w)) for k, w in overrides[doc_id]]
        else:
            kws = tfidf_weights(stats, toks, scale) if toks else []
        if not kws:
            log.warning("doc %d has no positively weighted keyword", doc_id)
        docs.append(DocumentRecord(doc_id, text.encode("utf-8"), lang, tuple(kws)))
    return docs


# -- secure index and outsourcing ------------------------------------------------


def build_secure_index(params: PublicParams, pk: int, doc: DocumentRecord, rng=None) -> list[tuple[Ciphertext, Ciphertext]]:
    rng = rng or secrets.SystemRandom()
    entries = [
        (pctd.encrypt(params, pk, k2u(kw, params), rng=rng), pctd.encrypt(params, pk, alpha, rng=rng))
        for kw, alpha in doc.keywords
    ]
    rng.shuffle(entries)
    return entries


def derive_symmetric_key(K: int) -> bytes:
    """SHA-256 of the minimal big-endian encoding of ``K``."""
    if K < 0:
        raise ValueError("key seed must be non-negative")
    return hashlib.sha256(K.to_bytes(max(1, (K.bit_length() + 7) // 8), "big")).digest()


def encrypt_document(key: bytes, body: bytes) -> bytes:
    nonce = os.urandom(NONCE_BYTES)
    return nonce + AESGCM(key).encrypt(nonce, body, None)


def decrypt_document(key: bytes, blob: bytes) -> bytes:
    try:
        return AESGCM(key).decrypt(blob[:NONCE_BYTES], blob[NONCE_BYTES:], None)
    except (InvalidTag, ValueError):
        raise IntegrityError("document blob failed authentication") from None


@dataclass(frozen=True)
class OutsourcedTuple:
    index: tuple[tuple[Ciphertext, Ciphertext], ...]
    enc_id: Ciphertext
    enc_keyseed: Ciphertext
    enc_lang: Ciphertext
    doc_blob: bytes = field(repr=False, default=b"")

    def to_record(self) -> dict:
        return {
            "version": pctd.RECORD_VERSION,
            "kind": "tuple",
            "index": [[u.to_record(), a.to_record()] for u, a in self.index],
            "id": self.enc_id.to_record(),
            "keyseed": self.enc_keyseed.to_record(),
            "lang": self.enc_lang.to_record(),
        }

    @classmethod
    def from_record(cls, rec: dict, doc_blob: bytes = b"") -> "OutsourcedTuple":
        if rec.get("kind") != "tuple" or rec.get("version") != pctd.RECORD_VERSION:
            raise StoreError("not a version-1 tuple record")
        ct = Ciphertext.from_record
        return cls(
            tuple((ct(u), ct(a)) for u, a in rec["index"]),
            ct(rec["id"]),
            ct(rec["keyseed"]),
            ct(rec["lang"]),
            doc_blob,
        )


def outsource(params: PublicParams, pk: int, doc: DocumentRecord, rng=None) -> OutsourcedTuple:
    """Encrypt one document and its index under the owner's key."""
    rng = rng or secrets.SystemRandom()
    K = rng.randrange(params.N)
    blob = encrypt_document(derive_symmetric_key(K), doc.body)
    return OutsourcedTuple(
        index=tuple(build_secure_index(params, pk, doc, rng)),
        enc_id=pctd.encrypt(params, pk, doc.id, rng=rng),
        enc_keyseed=pctd.encrypt(params, pk, K, rng=rng),
        enc_lang=pctd.encrypt(params, pk, k2u(doc.lang, params), rng=rng),
        doc_blob=blob,
    )


# -- corpus directories -------------------------------------------------------------


def read_corpus(path) -> tuple[list[tuple[int, str, str]], dict[int, list[tuple[str, int]]]]:
    """Parse ``manifest.tsv``: ``id TAB lang TAB file [TAB kw=weight;...]``."""
    path = Path(path)
    manifest = path / "manifest.tsv"
    if not manifest.exists():
        raise StoreError(f"{manifest} not found")
    entries, overrides = [], {}
    seen = set()
    with open(manifest, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) < 3:
                raise StoreError(f"manifest.tsv:{lineno}: expected id, lang and file columns")
            doc_id = int(cols[0])
            if doc_id in seen:
                raise StoreError(f"manifest.tsv:{lineno}: duplicate document id {doc_id}")
            seen.add(doc_id)
            text = (path / cols[2]).read_text(encoding="utf-8")
            entries.append((doc_id, cols[1], text))
            if len(cols) > 3 and cols[3].strip():
                pairs = []
                for item in cols[3].split(";"):
                    kw, _, w = item.partition("=")
                    pairs.append((kw.strip(), int(w)))
                overrides[doc_id] = pairs
    return entries, overrides
