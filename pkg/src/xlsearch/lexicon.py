"""Immutable multilingual wordnet.

Two on-disk layouts are understood:

* the fixture layout, a directory holding ``synsets.tsv``
  (``id TAB pos TAB rel=target;rel=target``) and ``lemmas.tsv``
  (``synset-id TAB lang TAB lemma``);
* Open Multilingual Wordnet ``.tab`` files (``offset-pos TAB lang:lemma TAB
  value``) merged onto a core synset dump whose optional fourth column
  lists English lemmas separated by ``;``.

Relations are closed under inversion at load time, so a fixture only has to
state one direction of each hypernym/hyponym or meronym/holonym edge.
"""

from __future__ import annotations

import logging
import re
import unicodedata
from collections import defaultdict, deque
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import LexiconError, UnknownLanguageError

log = logging.getLogger(__name__)

RELATIONS = ("hypernym", "hyponym", "meronym", "holonym")
INVERSE = {"hypernym": "hyponym", "hyponym": "hypernym", "meronym": "holonym", "holonym": "meronym"}
TAXONOMIC = frozenset({"hypernym", "hyponym"})

# WordNet pointer names folded onto the four relation families
_ALIASES = {
    "instance_hypernym": "hypernym",
    "instance_hyponym": "hyponym",
    "part_meronym": "meronym",
    "member_meronym": "meronym",
    "substance_meronym": "meronym",
    "part_holonym": "holonym",
    "member_holonym": "holonym",
    "substance_holonym": "holonym",
}

_LANG_RE = re.compile(r"^[a-z]{3}$")
_SYNSET_RE = re.compile(r"^[^\s]+-[a-z]$")


def normalize(text: str, casefold: bool = True) -> str:
    text = unicodedata.normalize("NFC", text.strip())
    return text.casefold() if casefold else text


@dataclass(frozen=True)
class Synset:
    id: str
    pos: str
    relations: tuple[tuple[str, str], ...] = ()

    def targets(self, kinds: Iterable[str] = RELATIONS) -> list[str]:
        kinds = set(kinds)
        return [t for r, t in self.relations if r in kinds]


class Lexicon:
    """Read-only synset graph plus (language, lemma) indexes in both directions."""

    def __init__(
        self,
        synsets: Mapping[str, Synset],
        lemma_rows: Iterable[tuple[str, str, str]],
        *,
        casefold: bool = True,
    ):
        if not synsets:
            raise LexiconError("empty lexicon")
        self.casefold = casefold
        self.synsets = MappingProxyType(dict(sorted(synsets.items())))
        lemmas: dict[tuple[str, str], set[str]] = defaultdict(set)
        inverse: dict[tuple[str, str], list[str]] = defaultdict(list)
        for sid, lang, lemma in lemma_rows:
            if sid not in self.synsets:
                raise LexiconError(f"lemma {lemma!r} refers to unknown synset {sid}")
            if not _LANG_RE.match(lang):
                raise UnknownLanguageError(f"language tag {lang!r} is not a 3-letter ISO-639-3 code")
            key = normalize(lemma, casefold)
            if not key:
                continue
            if sid not in lemmas[(lang, key)]:
                lemmas[(lang, key)].add(sid)
                inverse[(sid, lang)].append(key)
        self.lemmas = MappingProxyType({k: frozenset(v) for k, v in sorted(lemmas.items())})
        self.inverse = MappingProxyType({k: tuple(v) for k, v in sorted(inverse.items())})
        self.languages = frozenset(lang for lang, _ in self.lemmas)

    def __len__(self) -> int:
        return len(self.synsets)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Lexicon):
            return NotImplemented
        return (
            dict(self.synsets) == dict(other.synsets)
            and dict(self.lemmas) == dict(other.lemmas)
            and dict(self.inverse) == dict(other.inverse)
        )

    def _check_lang(self, lang: str) -> None:
        if lang not in self.languages:
            raise UnknownLanguageError(f"language {lang!r} is not in this lexicon")

    def _check_id(self, sid: str) -> Synset:
        try:
            return self.synsets[sid]
        except KeyError:
            raise LexiconError(f"unknown synset id {sid!r}") from None

    def lemmas_of(self, sid: str, lang: str) -> tuple[str, ...]:
        return self.inverse.get((sid, lang), ())

    def stats(self) -> dict:
        per_lang: dict[str, int] = defaultdict(int)
        for lang, _ in self.lemmas:
            per_lang[lang] += 1
        relations: dict[str, int] = defaultdict(int)
        for s in self.synsets.values():
            for r, _ in s.relations:
                relations[r] += 1
        return {
            "synsets": len(self.synsets),
            "languages": sorted(self.languages),
            "lemmas": dict(sorted(per_lang.items())),
            "relations": dict(sorted(relations.items())),
        }


def _link(raw: dict[str, tuple[str, list[tuple[str, str]]]]) -> dict[str, Synset]:
    rels: dict[str, set[tuple[str, str]]] = {sid: set() for sid in raw}
    for sid, (_, edges) in raw.items():
        for kind, target in edges:
            if target not in raw:
                raise LexiconError(f"{sid} has a {kind} edge to missing synset {target}")
            rels[sid].add((kind, target))
            rels[target].add((INVERSE[kind], sid))
    return {sid: Synset(sid, pos, tuple(sorted(rels[sid]))) for sid, (pos, _) in raw.items()}


def _parse_relations(field: str, where: str) -> list[tuple[str, str]]:
    edges = []
    for item in filter(None, (p.strip() for p in field.split(";"))):
        kind, sep, target = item.partition("=")
        kind = _ALIASES.get(kind.strip(), kind.strip())
        if not sep or kind not in INVERSE or not target.strip():
            raise LexiconError(f"{where}: bad relation {item!r}")
        edges.append((kind, target.strip()))
    return edges


def _read_lines(path: Path) -> Iterable[tuple[int, str]]:
    with open(path, encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if line.strip() and not line.startswith("#"):
                yield lineno, line


def _read_synsets(path: Path) -> tuple[dict, list[tuple[str, str, str]]]:
    raw: dict[str, tuple[str, list[tuple[str, str]]]] = {}
    english: list[tuple[str, str, str]] = []
    for lineno, line in _read_lines(path):
        cols = line.split("\t")
        where = f"{path.name}:{lineno}"
        if len(cols) < 2 or not _SYNSET_RE.match(cols[0]):
            raise LexiconError(f"{where}: malformed synset line")
        sid = cols[0]
        if sid in raw:
            raise LexiconError(f"{where}: duplicate synset id {sid}")
        raw[sid] = (cols[1], _parse_relations(cols[2] if len(cols) > 2 else "", where))
        if len(cols) > 3:
            english.extend((sid, "eng", lem) for lem in filter(None, cols[3].split(";")))
    return raw, english


def load_fixture(path, *, casefold: bool = True) -> Lexicon:
    """Load a ``synsets.tsv`` + ``lemmas.tsv`` directory."""
    path = Path(path)
    raw, rows = _read_synsets(path / "synsets.tsv")
    if not raw:
        raise LexiconError("empty lexicon")
    synsets = _link(raw)
    lemma_path = path / "lemmas.tsv"
    if lemma_path.exists():
        for lineno, line in _read_lines(lemma_path):
            cols = line.split("\t")
            if len(cols) != 3:
                raise LexiconError(f"lemmas.tsv:{lineno}: expected 3 columns")
            rows.append((cols[0], cols[1], cols[2]))
    return Lexicon(synsets, rows, casefold=casefold)


def load_omw_tab(core_path, tab_paths=(), *, strict: bool = True, casefold: bool = True) -> Lexicon:
    """Merge OMW per-language ``.tab`` files onto a core synset dump.

    Only ``lang:lemma`` rows are used; other OMW row types (definitions,
    examples) are ignored.  With ``strict=False`` malformed lines are logged
    with their line number and skipped instead of aborting the load.
    """
    raw, rows = _read_synsets(Path(core_path))
    if not raw:
        raise LexiconError("empty lexicon")
    synsets = _link(raw)
    for tab in tab_paths:
        tab = Path(tab)
        for lineno, line in _read_lines(tab):
            cols = line.split("\t")
            try:
                if len(cols) < 3:
                    raise LexiconError(f"{tab.name}:{lineno}: expected 3 tab-separated columns")
                lang, _, kind = cols[1].partition(":")
                if kind != "lemma":
                    continue
                if cols[0] not in synsets:
                    raise LexiconError(f"{tab.name}:{lineno}: unknown synset {cols[0]}")
                if not _LANG_RE.match(lang):
                    raise UnknownLanguageError(f"{tab.name}:{lineno}: bad language tag {lang!r}")
            except LexiconError:
                if strict:
                    raise
                log.warning("skipping malformed line %s:%d", tab, lineno)
                continue
            rows.append((cols[0], lang, cols[2]))
    return Lexicon(synsets, rows, casefold=casefold)


def bundled_fixture() -> Lexicon:
    """The small three-language fixture shipped with the package."""
    return load_fixture(resources.files("xlsearch") / "data" / "lexicon")


def bundled_fixture_path() -> Path:
    return Path(str(resources.files("xlsearch") / "data" / "lexicon"))


# -- lookups and similarity --------------------------------------------------


def synsets_for(lexicon: Lexicon, lemma: str, lang: str) -> frozenset[str]:
    lexicon._check_lang(lang)
    return lexicon.lemmas.get((lang, normalize(lemma, lexicon.casefold)), frozenset())


def _distances(lexicon: Lexicon, source: str, kinds: frozenset[str] | tuple, limit: int | None = None) -> dict[str, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        sid = queue.popleft()
        if limit is not None and dist[sid] >= limit:
            continue
        for target in lexicon.synsets[sid].targets(kinds):
            if target not in dist:
                dist[target] = dist[sid] + 1
                queue.append(target)
    return dist


def path_similarity(lexicon: Lexicon, a: str, b: str) -> Fraction:
    """``1 / (1 + d)`` over the undirected hypernym/hyponym graph; 0 if disconnected."""
    lexicon._check_id(a)
    lexicon._check_id(b)
    d = _distances(lexicon, a, TAXONOMIC).get(b)
    return Fraction(0) if d is None else Fraction(1, 1 + d)


def max_hops(threshold) -> int:
    """Largest hop count ``d`` with ``1/(1+d) >= threshold``."""
    t = Fraction(threshold).limit_denominator(10**9)
    if not 0 < t <= 1:
        raise LexiconError(f"threshold must lie in (0, 1], got {threshold}")
    return int(1 / t) - 1


def semantic_neighbors(lexicon: Lexicon, sid: str, threshold) -> list[tuple[str, Fraction]]:
    """Synsets related to ``sid`` with similarity at least ``threshold``.

    Traversal follows all four relation families; similarity is
    ``1/(1+d)`` with ``d`` the hop count, which equals the path similarity
    whenever the shortest route is taxonomic.
    """
    lexicon._check_id(sid)
    hops = max_hops(threshold)
    if hops == 0:
        return []
    dist = _distances(lexicon, sid, RELATIONS, limit=hops)
    found = [(other, Fraction(1, 1 + d)) for other, d in dist.items() if other != sid]
    return sorted(found, key=lambda item: (-item[1], item[0]))
