"""Joint CP/CSP search: relevance scoring with language filtering, then oblivious top-k.

Scoring follows the relevance-score protocol: a document takes part only if
its encrypted language tag equals one trapdoor language (the match count is
the one value both servers see in the clear).  Its score is then

    sum over index entries a, trapdoor words w (group g):  [k_a == w] * alpha_a * eta_g

computed entirely under the joint key ``pk_owner * pk_user``.  Because the
lemmas of a group are distinct, ``sum_w [k_a == w]`` is itself a bit, so the
equality bits are summed per group before the single multiplication by
``alpha_a * eta_g``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import pctd
from .errors import ProtocolError
from .mpc.parties import CloudPlatform
from .pctd import Ciphertext, JointPublicKey
from .query_client import Trapdoor

log = logging.getLogger(__name__)

DEFAULT_MU = 48


@dataclass(frozen=True)
class RelevanceTuple:
    score: Ciphertext
    id: Ciphertext
    keyseed: Ciphertext

    def fields(self) -> tuple[Ciphertext, Ciphertext, Ciphertext]:
        return (self.score, self.id, self.keyseed)


@dataclass
class _PreparedTrapdoor:
    """Trapdoor components moved under the joint key, shared by every document."""

    tags: list[Ciphertext]
    # one (eta, negated words) entry per group, in block order
    groups: list[tuple[Ciphertext, list[Ciphertext]]]


@dataclass
class RSCOutput:
    tuples: list[RelevanceTuple] = field(default_factory=list)
    positions: list[int] = field(default_factory=list)  # store positions of the tuples
    excluded: list[int] = field(default_factory=list)
    failures: dict[int, str] = field(default_factory=dict)


@dataclass
class SearchOutcome:
    results: list[tuple[Ciphertext, Ciphertext]]  # (id, keyseed) under the user key
    ranked: list[RelevanceTuple]  # same order, still under the joint key
    rsc: RSCOutput


class SearchEngine:
    def __init__(self, cp: CloudPlatform, *, mu: int = DEFAULT_MU, workers: int = 1):
        self.cp = cp
        self.params = cp.params
        self.mu = mu
        self.workers = max(1, workers)

    # -- relevance scores ------------------------------------------------------

    def prepare(self, trapdoor: Trapdoor, sigma: int) -> _PreparedTrapdoor:
        flat: list[Ciphertext] = []
        shape = []
        for block in trapdoor.blocks:
            flat.append(block.tag)
            for g in block.groups:
                shape.append(len(g.words))
                flat.append(g.score)
                flat.extend(g.words)
        moved = iter(self.cp.rekey_many(flat, sigma))
        tags, groups = [], []
        it_shape = iter(shape)
        for block in trapdoor.blocks:
            tags.append(next(moved))
            for _ in block.groups:
                eta = next(moved)
                words = [pctd.hom_scale(self.params, next(moved), -1) for _ in range(next(it_shape))]
                groups.append((eta, words))
        return _PreparedTrapdoor(tags, groups)

    def _score_document(self, tup, prep: _PreparedTrapdoor, sigma: int) -> RelevanceTuple | None:
        cp, params = self.cp, self.params
        (lang,) = cp.rekey_many([tup.enc_lang], sigma)
        bits = cp.zero_test_many([pctd.hom_sub(params, lang, tag) for tag in prep.tags], sigma)
        d_ct = bits[0]
        for b in bits[1:]:
            d_ct = pctd.hom_add(params, d_ct, b)
        d = cp.reveal_to_servers(d_ct, "lang-match")
        if d != 1:
            return None

        n = len(tup.index)
        moved = cp.rekey_many(
            [c for entry in tup.index for c in entry] + [tup.enc_id, tup.enc_keyseed], sigma
        )
        keys = moved[0 : 2 * n : 2]
        alphas = moved[1 : 2 * n : 2]
        enc_id, enc_seed = moved[2 * n], moved[2 * n + 1]

        weighted = cp.smd_many([(alpha, eta) for alpha in alphas for eta, _ in prep.groups], sigma)
        diffs = [
            pctd.hom_add(params, key, neg_w)
            for key in keys
            for _, words in prep.groups
            for neg_w in words
        ]
        eq = iter(cp.zero_test_many(diffs, sigma))
        hits = []
        for _ in keys:
            for _, words in prep.groups:
                acc = pctd.encrypt(params, sigma, 0)
                for _ in words:
                    acc = pctd.hom_add(params, acc, next(eq))
                hits.append(acc)
        score = pctd.encrypt(params, sigma, 0)
        for s in cp.smd_many(list(zip(hits, weighted)), sigma):
            score = pctd.hom_add(params, score, s)
        return RelevanceTuple(score, enc_id, enc_seed)

    def rsc(self, tuples, trapdoor: Trapdoor, sigma) -> RSCOutput:
        """Relevance tuples for every language-matching document, in store order."""
        sigma = sigma.pk_sigma if isinstance(sigma, JointPublicKey) else sigma
        prep = self.prepare(trapdoor, sigma)
        out = RSCOutput()

        def run(pos_tup):
            pos, tup = pos_tup
            try:
                return pos, self._score_document(tup, prep, sigma), None
            except ProtocolError as exc:
                log.error("relevance scoring of document #%d aborted: %s", pos, exc)
                return pos, None, str(exc)

        if self.workers > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                results = list(pool.map(run, enumerate(tuples)))
        else:
            results = [run(item) for item in enumerate(tuples)]
        for pos, rel, err in results:
            if err is not None:
                out.failures[pos] = err
            elif rel is None:
                out.excluded.append(pos)
            else:
                out.tuples.append(rel)
                out.positions.append(pos)
        return out

    # -- top-k -----------------------------------------------------------------

    def compare_swap(self, left: RelevanceTuple, right: RelevanceTuple) -> tuple[RelevanceTuple, RelevanceTuple]:
        """Obliviously order a pair so the higher score ends on the right.

        The swap bit is the strict comparison ``right < left``, so equal
        scores never swap.
        """
        params = self.params
        swap = self.cp.slt(right.score, left.score, self.mu)
        new_left = self.cp.osel_many([(swap, rf, lf) for lf, rf in zip(left.fields(), right.fields())])
        new_right = [
            pctd.hom_sub(params, pctd.hom_add(params, lf, rf), nl)
            for lf, rf, nl in zip(left.fields(), right.fields(), new_left)
        ]
        return RelevanceTuple(*new_left), RelevanceTuple(*new_right)

    def top_k(self, tuples: list[RelevanceTuple], k: int) -> list[RelevanceTuple]:
        """k oblivious bubble passes; returns the k best, highest first.

        The passes run over the tuples in reverse order.  Bubble passes
        without swaps on ties are stable, so of two equal scores the
        earlier tuple finishes further right and ranks higher.
        """
        if k < 1:
            raise ValueError("k must be at least 1")
        work = list(reversed(tuples))
        n = len(work)
        for j in range(min(k, n - 1)):
            for i in range(n - 1 - j):
                work[i], work[i + 1] = self.compare_swap(work[i], work[i + 1])
        return work[::-1][: min(k, n)]

    @staticmethod
    def comparisons(n: int, k: int) -> int:
        """Compare-swap count of :meth:`top_k` for ``n`` tuples."""
        return sum(n - 1 - j for j in range(min(k, n - 1))) if n else 0

    # -- full search ----------------------------------------------------------------

    def search(self, store, trapdoor: Trapdoor, k: int | None = None, *, allow_partial: bool = False) -> SearchOutcome:
        k = trapdoor.k if k is None else k
        if store.owner_pk is None:
            raise ValueError("store has no owner key")
        pk_user = trapdoor.blocks[0].tag.key_tag
        sigma = JointPublicKey.combine(self.params, store.owner_pk, pk_user).pk_sigma
        rsc = self.rsc(store.tuples, trapdoor, sigma)
        if rsc.failures and not allow_partial:
            raise ProtocolError(f"relevance scoring failed for {len(rsc.failures)} document(s)")
        ranked = self.top_k(rsc.tuples, k) if rsc.tuples else []
        moved = self.cp.rekey_many([c for t in ranked for c in (t.id, t.keyseed)], pk_user)
        results = [(moved[2 * i], moved[2 * i + 1]) for i in range(len(ranked))]
        return SearchOutcome(results, ranked, rsc)
