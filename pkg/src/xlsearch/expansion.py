"""Cross-lingual query construction.

A user query (keywords with preference scores, target languages with
preference scores, extension threshold) becomes, per target language, a
list of synonym groups each carrying a fixed-point preference score
``eta = beta * gamma * round(S * sim)``.  The four steps are language
conversion, synonym replacement, reduction and semantic extension.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import QueryError
from .lexicon import Lexicon, max_hops, normalize, semantic_neighbors, synsets_for

log = logging.getLogger(__name__)

SCALE = 1000
MAX_PREFERENCE = 100


def round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


def scaled_similarity(sim: Fraction, scale: int = SCALE) -> int:
    return round_half_up(Fraction(sim) * scale)


@dataclass(frozen=True)
class QuerySpec:
    keywords: tuple[str, ...]
    keyword_scores: tuple[int, ...]
    langs: tuple[str, ...]
    lang_scores: tuple[int, ...]
    threshold: float = 1.0
    source_lang: str = "eng"

    def __post_init__(self):
        object.__setattr__(self, "keywords", tuple(self.keywords))
        object.__setattr__(self, "keyword_scores", tuple(self.keyword_scores))
        object.__setattr__(self, "langs", tuple(self.langs))
        object.__setattr__(self, "lang_scores", tuple(self.lang_scores))
        self.validate()

    def validate(self) -> None:
        if not self.keywords:
            raise QueryError("empty query")
        if len(self.keywords) != len(self.keyword_scores):
            raise QueryError("one preference score is needed per keyword")
        if not self.langs or len(self.langs) != len(self.lang_scores):
            raise QueryError("one preference score is needed per target language")
        if len(set(self.langs)) != len(self.langs):
            raise QueryError("duplicate target language tags")
        for score in self.keyword_scores + self.lang_scores:
            if not isinstance(score, int) or not 1 <= score <= MAX_PREFERENCE:
                raise QueryError(f"preference scores must be integers in [1, {MAX_PREFERENCE}]")
        if not 0 < self.threshold <= 1:
            raise QueryError("threshold must lie in (0, 1]")


@dataclass(frozen=True)
class SynonymGroup:
    synset: str
    lemmas: tuple[str, ...]
    eta: int
    provenance: str  # "direct" or "extended"
    sim: Fraction = Fraction(1)
    beta: int = 1


@dataclass(frozen=True)
class LanguageBlock:
    lang: str
    gamma: int
    groups: tuple[SynonymGroup, ...]


@dataclass(frozen=True)
class ExtendedQuery:
    blocks: tuple[LanguageBlock, ...]

    @property
    def langs(self) -> tuple[str, ...]:
        return tuple(b.lang for b in self.blocks)

    def block(self, lang: str) -> LanguageBlock:
        for b in self.blocks:
            if b.lang == lang:
                return b
        raise KeyError(lang)

    def group_count(self) -> int:
        return sum(len(b.groups) for b in self.blocks)


@dataclass
class _Candidate:
    synset: str
    eta: int
    provenance: str
    sim: Fraction
    order: int
    beta: int


def _reduce(candidates: list[_Candidate], lemma_lookup) -> list[SynonymGroup]:
    # one group per synset, keeping the best score (direct wins ties)
    best: dict[str, _Candidate] = {}
    for c in candidates:
        cur = best.get(c.synset)
        if cur is None:
            best[c.synset] = c
        elif (c.eta, c.provenance == "direct") > (cur.eta, cur.provenance == "direct"):
            # the group keeps the position where its synset first appeared
            best[c.synset] = _Candidate(c.synset, c.eta, c.provenance, c.sim, cur.order, c.beta)
    kept = sorted(best.values(), key=lambda c: c.order)
    # lemma sets made disjoint: a shared lemma stays with the higher-scored group
    claimed: set[str] = set()
    lemma_sets: dict[str, tuple[str, ...]] = {}
    for c in sorted(kept, key=lambda c: (-c.eta, c.order)):
        mine = tuple(lem for lem in lemma_lookup(c.synset) if lem not in claimed)
        claimed.update(mine)
        lemma_sets[c.synset] = mine
    return [
        SynonymGroup(c.synset, lemma_sets[c.synset], c.eta, c.provenance, c.sim, c.beta)
        for c in kept
        if lemma_sets[c.synset]
    ]


def build_target_query(lexicon: Lexicon, spec: QuerySpec, *, scale: int = SCALE) -> ExtendedQuery:
    """Run language conversion, synonym replacement, reduction and extension."""
    spec.validate()
    for lang in spec.langs:
        lexicon._check_lang(lang)
    max_hops(spec.threshold)

    resolved: list[tuple[int, str, frozenset[str]]] = []
    for beta, kw in zip(spec.keyword_scores, spec.keywords):
        senses = synsets_for(lexicon, kw, spec.source_lang)
        if not senses:
            log.warning("keyword %r has no synset in %s; kept as a literal", kw, spec.source_lang)
        resolved.append((beta, kw, senses))
    if not any(senses for _, _, senses in resolved):
        raise QueryError("no query keyword could be resolved in the lexicon")

    neighbor_cache: dict[str, list[tuple[str, Fraction]]] = {}

    def neighbors(sid: str):
        if sid not in neighbor_cache:
            neighbor_cache[sid] = semantic_neighbors(lexicon, sid, spec.threshold)
        return neighbor_cache[sid]

    blocks = []
    for lang, gamma in zip(spec.langs, spec.lang_scores):
        candidates: list[_Candidate] = []
        literals: dict[str, tuple[str, ...]] = {}
        order = 0
        for beta, kw, senses in resolved:
            if not senses:
                if lang == spec.source_lang:
                    sid = f"literal:{normalize(kw, lexicon.casefold)}"
                    literals[sid] = (normalize(kw, lexicon.casefold),)
                    candidates.append(_Candidate(sid, beta * gamma * scale, "direct", Fraction(1), order, beta))
                    order += 1
                continue
            for sid in sorted(senses):
                candidates.append(_Candidate(sid, beta * gamma * scale, "direct", Fraction(1), order, beta))
                order += 1
            for sid in sorted(senses):
                for other, sim in neighbors(sid):
                    eta = beta * gamma * scaled_similarity(sim, scale)
                    candidates.append(_Candidate(other, eta, "extended", sim, order, beta))
                    order += 1

        def lookup(sid, lang=lang, literals=literals):
            return literals.get(sid) or lexicon.lemmas_of(sid, lang)

        blocks.append(LanguageBlock(lang, gamma, tuple(_reduce(candidates, lookup))))
    return ExtendedQuery(tuple(blocks))


def spec_from_lists(
    keywords: Sequence[str],
    scores: Sequence[int],
    langs: Sequence[str],
    lang_scores: Sequence[int],
    threshold: float = 1.0,
    source_lang: str = "eng",
) -> QuerySpec:
    return QuerySpec(tuple(keywords), tuple(scores), tuple(langs), tuple(lang_scores), threshold, source_lang)
