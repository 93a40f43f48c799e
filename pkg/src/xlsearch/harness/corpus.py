"""Synthetic multilingual corpora drawn from a lexicon's vocabulary."""

from __future__ import annotations

import random
import string
from pathlib import Path
from typing import Sequence

from ..lexicon import Lexicon
from ..secure_index import DocumentRecord, fits_k2u


def _filler(rng: random.Random, n: int) -> list[str]:
    # lowercase ASCII nonsense words; an accidental lemma is harmless
    return ["".join(rng.choice(string.ascii_lowercase) for _ in range(rng.randint(3, 6))) for _ in range(n)]


def generate_corpus(
    lexicon: Lexicon,
    n_docs: int,
    langs: Sequence[str] = ("eng", "cmn", "fra"),
    *,
    seed: int = 0,
    tokens: tuple[int, int] = (4, 12),
    filler_share: float = 0.3,
    params=None,
    id_bits: int = 40,
) -> list[tuple[int, str, str]]:
    """``(id, lang, text)`` entries with languages assigned round-robin.

    Each text mixes lemmas of its language (with repetition, so weights vary)
    and a share of filler words.  Ids are distinct random ``id_bits``-bit
    integers.
    """
    if n_docs < 1:
        raise ValueError("n_docs must be positive")
    rng = random.Random(seed)
    vocab = {}
    for lang in langs:
        lexicon._check_lang(lang)
        words = sorted({lem for (lg, lem) in lexicon.lemmas if lg == lang})
        if params is not None:
            words = [w for w in words if fits_k2u(w, params)]
        if not words:
            raise ValueError(f"no usable lemmas for {lang}")
        vocab[lang] = words
    fillers = _filler(rng, 24)
    ids: set[int] = set()
    out = []
    for i in range(n_docs):
        lang = langs[i % len(langs)]
        while True:
            doc_id = rng.getrandbits(id_bits) | (1 << (id_bits - 1))
            if doc_id not in ids:
                ids.add(doc_id)
                break
        n_tok = rng.randint(*tokens)
        focus = rng.sample(vocab[lang], min(len(vocab[lang]), rng.randint(1, 4)))
        toks = [rng.choice(fillers) if rng.random() < filler_share else rng.choice(focus) for _ in range(n_tok)]
        out.append((doc_id, lang, " ".join(toks)))
    return out


def synthetic_documents(n_docs: int, keywords_per_doc: int, *, seed: int = 0, lang: str = "eng") -> list[DocumentRecord]:
    """Documents with ready-made random keywords and weights, for benchmarks."""
    rng = random.Random(seed)
    docs = []
    for i in range(n_docs):
        kws = tuple(
            ("".join(rng.choice(string.ascii_lowercase) for _ in range(6)), rng.randint(1, 3000))
            for _ in range(keywords_per_doc)
        )
        body = " ".join(k for k, _ in kws).encode()
        docs.append(DocumentRecord(i + 1, body, lang, kws))
    return docs


def write_corpus(path, entries) -> Path:
    """Lay entries out as ``manifest.tsv`` plus one text file per document."""
    path = Path(path)
    (path / "docs").mkdir(parents=True, exist_ok=True)
    lines = []
    for doc_id, lang, text in entries:
        name = f"docs/{doc_id}.txt"
        (path / name).write_text(text, encoding="utf-8")
        lines.append(f"{doc_id}\t{lang}\t{name}\n")
    (path / "manifest.tsv").write_text("".join(lines), encoding="utf-8")
    return path
