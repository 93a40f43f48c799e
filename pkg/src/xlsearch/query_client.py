"""Data-user side: trapdoor generation and decryption of ranked results."""

from __future__ import annotations

import logging
import secrets
from dataclasses import dataclass, field

from . import pctd
from .errors import IntegrityError, StoreError
from .expansion import ExtendedQuery
from .pctd import Ciphertext, PublicParams
from .secure_index import decrypt_document, derive_symmetric_key, k2u

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrapdoorGroup:
    words: tuple[Ciphertext, ...]
    score: Ciphertext


@dataclass(frozen=True)
class TrapdoorBlock:
    tag: Ciphertext
    groups: tuple[TrapdoorGroup, ...]


@dataclass(frozen=True)
class Trapdoor:
    blocks: tuple[TrapdoorBlock, ...]
    k: int

    def ciphertexts(self) -> list[Ciphertext]:
        out = []
        for b in self.blocks:
            out.append(b.tag)
            for g in b.groups:
                out.extend(g.words)
                out.append(g.score)
        return out

    def word_count(self) -> int:
        return sum(len(g.words) for b in self.blocks for g in b.groups)

    def to_record(self) -> dict:
        return {
            "version": pctd.RECORD_VERSION,
            "kind": "trapdoor",
            "k": self.k,
            "blocks": [
                {
                    "tag": b.tag.to_record(),
                    "groups": [
                        {"words": [w.to_record() for w in g.words], "score": g.score.to_record()}
                        for g in b.groups
                    ],
                }
                for b in self.blocks
            ],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Trapdoor":
        ct = Ciphertext.from_record
        return cls(
            tuple(
                TrapdoorBlock(
                    ct(b["tag"]),
                    tuple(
                        TrapdoorGroup(tuple(ct(w) for w in g["words"]), ct(g["score"]))
                        for g in b["groups"]
                    ),
                )
                for b in rec["blocks"]
            ),
            int(rec["k"]),
        )


def generate_trapdoor(params: PublicParams, pk_user: int, query: ExtendedQuery, k: int, rng=None) -> Trapdoor:
    """Encrypt every lemma, group score and language tag under the user's key."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if not query.blocks or query.group_count() == 0:
        raise ValueError("extended query is empty")
    rng = rng or secrets.SystemRandom()
    enc = lambda m: pctd.encrypt(params, pk_user, m, rng=rng)  # noqa: E731
    blocks = []
    for block in query.blocks:
        groups = tuple(
            TrapdoorGroup(tuple(enc(k2u(w, params)) for w in g.lemmas), enc(g.eta))
            for g in block.groups
        )
        blocks.append(TrapdoorBlock(enc(k2u(block.lang, params)), groups))
    return Trapdoor(tuple(blocks), k)


@dataclass(frozen=True)
class ResultItem:
    doc_id: int
    key: bytes
    body: bytes | None
    error: str | None = None


@dataclass
class SearchResult:
    items: list[ResultItem] = field(default_factory=list)

    @property
    def ids(self) -> list[int]:
        return [it.doc_id for it in self.items]

    def __len__(self) -> int:
        return len(self.items)


def decrypt_results(params: PublicParams, sk_user: int, tuples, store) -> SearchResult:
    """Recover ids and key seeds, then fetch and open each document.

    ``tuples`` are ``(enc_id, enc_keyseed)`` pairs already switched to the
    user's key.  A blob that fails authentication or is missing marks only
    its own item as failed.
    """
    result = SearchResult()
    for enc_id, enc_seed in tuples:
        doc_id = pctd.decrypt_weak(params, sk_user, enc_id)
        key = derive_symmetric_key(pctd.decrypt_weak(params, sk_user, enc_seed))
        try:
            body = decrypt_document(key, store.fetch(doc_id))
        except (IntegrityError, StoreError) as exc:
            log.warning("result %d unusable: %s", doc_id, exc)
            result.items.append(ResultItem(doc_id, key, None, getattr(exc, "code", "error")))
            continue
        result.items.append(ResultItem(doc_id, key, body))
    return result
