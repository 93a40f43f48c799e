"""Plaintext reference ranking.

Deliberately independent of the query constructor and the encrypted engine:
the expansion below walks the lexicon graph itself, and matching compares
normalized strings instead of integerized keywords.  Only the lexicon data
is shared.
"""

from __future__ import annotations

import math
from collections import deque
from fractions import Fraction

from ..lexicon import Lexicon, normalize

RELATION_KINDS = ("hypernym", "hyponym", "meronym", "holonym")


def _hops_within(lexicon: Lexicon, start: str, limit: int) -> dict[str, int]:
    seen = {start: 0}
    frontier = deque([start])
    while frontier:
        cur = frontier.popleft()
        if seen[cur] == limit:
            continue
        for kind, nxt in lexicon.synsets[cur].relations:
            if kind in RELATION_KINDS and nxt not in seen:
                seen[nxt] = seen[cur] + 1
                frontier.append(nxt)
    return seen


def oracle_expansion(lexicon: Lexicon, spec, scale: int = 1000) -> dict[str, list[tuple[frozenset[str], int]]]:
    """Per target language, the list of (lemma set, eta) groups."""
    t = Fraction(spec.threshold).limit_denominator(10**9)
    limit = math.floor(1 / t) - 1
    src = spec.source_lang
    out = {}
    for lang, gamma in zip(spec.langs, spec.lang_scores):
        best: dict[str, tuple[int, bool, int]] = {}  # synset -> (eta, is_direct, first seen)
        literal: dict[str, str] = {}
        seq = 0

        def offer(key, eta, direct):
            nonlocal seq
            cur = best.get(key)
            if cur is None:
                best[key] = (eta, direct, seq)
            elif (eta, direct) > cur[:2]:
                best[key] = (eta, direct, cur[2])
            seq += 1

        for kw, beta in zip(spec.keywords, spec.keyword_scores):
            norm = normalize(kw, lexicon.casefold)
            senses = sorted(lexicon.lemmas.get((src, norm), ()))
            if not senses:
                if lang == src:
                    literal["#" + norm] = norm
                    offer("#" + norm, beta * gamma * scale, True)
                continue
            for sid in senses:
                offer(sid, beta * gamma * scale, True)
            for sid in senses:
                if limit < 1:
                    continue
                ranked = sorted(
                    ((Fraction(1, 1 + d), other) for other, d in _hops_within(lexicon, sid, limit).items() if other != sid),
                    key=lambda x: (-x[0], x[1]),
                )
                for sim, other in ranked:
                    offer(other, beta * gamma * math.floor(sim * scale + Fraction(1, 2)), False)

        taken: set[str] = set()
        groups = {}
        for key, (eta, _, _) in sorted(best.items(), key=lambda kv: (-kv[1][0], kv[1][2])):
            words = {literal[key]} if key in literal else set(lexicon.inverse.get((key, lang), ()))
            words -= taken
            taken |= words
            if words:
                groups[key] = (frozenset(words), eta)
        out[lang] = [groups[k] for k, _ in sorted(best.items(), key=lambda kv: kv[1][2]) if k in groups]
    return out


def oracle_scores(docs, lexicon: Lexicon, spec, scale: int = 1000) -> list[int | None]:
    """Score per document in store order; ``None`` for a non-matching language."""
    expansion = oracle_expansion(lexicon, spec, scale)
    scores = []
    for doc in docs:
        if doc.lang not in expansion:
            scores.append(None)
            continue
        total = 0
        for blk in expansion.values():
            for words, eta in blk:
                for kw, alpha in doc.keywords:
                    if normalize(kw, lexicon.casefold) in words:
                        total += alpha * eta
        scores.append(total)
    return scores


def oracle_rank(docs, spec, lexicon: Lexicon, k: int, scale: int = 1000) -> list[tuple[int, int]]:
    """Top-k ``(id, score)`` pairs, highest first, earlier document first on ties."""
    scores = oracle_scores(docs, lexicon, spec, scale)
    live = [(s, pos, d.id) for pos, (d, s) in enumerate(zip(docs, scores)) if s is not None]
    live.sort(key=lambda x: (-x[0], x[1]))
    return [(doc_id, s) for s, _, doc_id in live[:k]]
