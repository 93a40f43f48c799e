"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import random
import subprocess
import sys
import time
from collections import Counter
from fractions import Fraction
from pathlib import Path

import pytest

from helpers import criterion, make_keys, signed, strong_decrypt
from oracles.toy_vectors import compute as toy_oracle
from xlsearch import pctd
from xlsearch.expansion import build_target_query, scaled_similarity, spec_from_lists
from xlsearch.harness.bench import bench_outsource, bench_query
from xlsearch.harness.corpus import generate_corpus
from xlsearch.harness.deployment import outsource_corpus, run_deployment, run_query
from xlsearch.harness.oracle import oracle_expansion, oracle_rank, oracle_scores
from xlsearch.harness.plots import plot_report
from xlsearch.lexicon import synsets_for
from xlsearch.mpc import in_process_pair
from xlsearch.query_client import generate_trapdoor
from xlsearch.secure_index import prepare_documents

LANGS = ("eng", "cmn", "fra")
ORACLE_SCRIPT = Path(__file__).parent / "oracles" / "toy_vectors.py"


def eng_vocabulary(lexicon):
    return sorted(w for lang, w in lexicon.lemmas if lang == "eng")


def random_spec(rng, vocab, threshold):
    words = rng.sample(vocab, rng.randint(1, 4))
    langs = rng.sample(LANGS, rng.randint(1, 3))
    return spec_from_lists(
        words,
        [rng.randint(1, 100) for _ in words],
        langs,
        [rng.randint(1, 100) for _ in langs],
        threshold=threshold,
    )


def test_criterion_1_toy_vector(toy):
    with criterion(1, "toy PCTD vector") as info:
        start = time.perf_counter()
        # the oracle script must run on its own, outside the package
        out = subprocess.run([sys.executable, str(ORACLE_SCRIPT)], capture_output=True, text=True, check=True)
        script = dict(line.split("\t") for line in out.stdout.splitlines())
        ref = toy_oracle()
        assert {k: int(v) for k, v in script.items()} == ref
        expected = {"N": 15, "g": 26, "pk": 26, "C1": 56, "C2": 26, "weak": 7, "strong": 7, "partial": 176, "combined": 106, "shares": 7}
        assert {k: ref[k] for k in expected} == expected

        params, strong = toy
        pk = pctd.public_key_for(params, 3)
        ct = pctd.encrypt(params, pk, 7, r=1)
        got = {
            "N": params.N,
            "g": params.g,
            "pk": pk,
            "C1": ct.c1,
            "C2": ct.c2,
            "weak": pctd.decrypt_weak(params, 3, ct),
            "strong": pctd.decrypt_strong(params, strong, ct),
        }
        lambda2 = (ref["sigma"] - ref["lambda1"]) % (strong.lam * params.N)
        partial = pctd.partial_decrypt_1(params, ref["lambda1"], ct)
        got["partial"] = partial
        got["combined"] = pctd.combine_partials(params, lambda2, ct, partial)
        got["shares"] = pctd.partial_decrypt_2_combine(params, lambda2, ct, partial)
        assert got == expected
        elapsed = time.perf_counter() - start
        assert elapsed < 1.0
        info["detail"] = f"{elapsed * 1000:.0f} ms"


def test_criterion_2_crypto_properties_at_512_bit_modulus(keys256):
    with criterion(2, "PCTD property suite, 512-bit N") as info:
        keys = keys256
        params, N = keys.params, keys.params.N
        assert N.bit_length() == 512
        rng = random.Random(20240)
        trials = 1000
        failures = {"round-trip": 0, "double-trapdoor": 0, "shares": 0, "additive": 0, "scalar": 0}
        start = time.perf_counter()
        for _ in range(trials):
            user = pctd.user_keygen(params, rng)
            a, b, c = rng.randrange(N), rng.randrange(N), rng.randrange(N)
            ca = pctd.encrypt(params, user.pk, a, rng=rng)
            cb = pctd.encrypt(params, user.pk, b, rng=rng)
            weak = pctd.decrypt_weak(params, user.sk, ca)
            failures["round-trip"] += weak != a
            failures["double-trapdoor"] += pctd.decrypt_strong(params, keys.strong, ca) != weak
            failures["shares"] += pctd.decrypt_with_shares(params, keys.shares, ca) != a
            failures["additive"] += pctd.decrypt_weak(params, user.sk, pctd.hom_add(params, ca, cb)) != (a + b) % N
            failures["scalar"] += pctd.decrypt_weak(params, user.sk, pctd.hom_scale(params, ca, c)) != a * c % N
        elapsed = time.perf_counter() - start
        assert failures == dict.fromkeys(failures, 0)
        assert elapsed < 120
        info["detail"] = f"{trials} trials x 5 properties, {elapsed:.1f} s"


def test_criterion_3_protocols_match_plaintext_oracle(keys64, toy):
    with criterion(3, "two-server protocols vs plaintext oracle") as info:
        keys = keys64
        params, N = keys.params, keys.params.N
        cp, _ = in_process_pair(params, keys.shares, rng=random.Random(31))
        owner, user = keys.owner.pk, keys.user.pk
        sigma = pctd.JointPublicKey.combine(params, owner, user).pk_sigma
        mu = 48
        edge = 2**mu - 1
        rng = random.Random(32)

        def enc(pk, v):
            return pctd.encrypt(params, pk, pctd.from_signed(v, N), rng=rng)

        boundary = [(0, 0), (edge, edge), (-edge, -edge), (edge, -edge), (-edge, edge), (0, edge), (edge, 0), (0, -edge), (-edge, 0), (1, 1), (-1, -1)]
        inputs = boundary + [(rng.randint(-edge, edge), rng.randint(-edge, edge)) for _ in range(1000)]
        # a share of equal pairs so KET sees both outcomes many times
        inputs += [(v, v) for v in (rng.randint(-edge, edge) for _ in range(100))]
        failures = {name: 0 for name in ("sad", "smd", "ket", "slt", "osel", "convert_to_joint", "key_switch")}
        for a, b in inputs:
            ca, cb = enc(owner, a), enc(user, b)
            failures["sad"] += signed(keys, cp.sad(ca, cb)) != a + b
            failures["smd"] += signed(keys, cp.smd(ca, cb)) != a * b
            failures["ket"] += strong_decrypt(keys, cp.ket(ca, cb)) != int(a == b)
            sa, sb = enc(sigma, a), enc(sigma, b)
            failures["slt"] += strong_decrypt(keys, cp.slt(sa, sb, mu)) != int(a < b)
            bit = rng.getrandbits(1)
            failures["osel"] += signed(keys, cp.osel(enc(sigma, bit), sa, sb)) != (a if bit else b)
            joint = cp.convert_to_joint(ca, sigma)
            failures["convert_to_joint"] += joint.key_tag != sigma or signed(keys, joint) != a
            back = cp.key_switch(sa, user)
            failures["key_switch"] += back.key_tag != user or pctd.to_signed(pctd.decrypt_weak(params, keys.user.sk, back), N) != a
        assert failures == dict.fromkeys(failures, 0)

        tparams, tstrong = toy
        tcp, _ = in_process_pair(tparams, pctd.split_strong_key(tparams, tstrong, random.Random(33)), rng=random.Random(34))
        pk_a, pk_b = pctd.public_key_for(tparams, 3), pctd.public_key_for(tparams, 2)
        target = pctd.JointPublicKey.combine(tparams, pk_a, pk_b)
        grid = [(x, y) for x in range(15) for y in range(15)]
        bits = tcp.ket_many([(pctd.encrypt(tparams, pk_a, x), pctd.encrypt(tparams, pk_b, y)) for x, y in grid], target)
        got = [pctd.decrypt_strong(tparams, tstrong, c) for c in bits]
        assert got == [int(x == y) for x, y in grid]
        info["detail"] = f"{len(inputs)} inputs per protocol, KET 225/225 at N=15"


def test_criterion_4_end_to_end_ranking(keys64, lexicon):
    with criterion(4, "encrypted ranking equals plaintext oracle") as info:
        keys = keys64
        start = time.perf_counter()
        entries = generate_corpus(lexicon, 32, LANGS, seed=404, params=keys.params)
        docs = prepare_documents(entries, keys.params)
        assert {d.lang for d in docs} == set(LANGS)
        store = outsource_corpus(keys.params, keys.owner.pk, docs, rng=random.Random(405))
        vocab = eng_vocabulary(lexicon)
        rng = random.Random(406)
        combos = [(t, k) for t in (1.0, 0.5) for k in (1, 3, 5)]
        mismatches, nonzero = [], 0
        n_queries = 60
        with run_deployment(keys, rng=random.Random(407)) as dep:
            for i in range(n_queries):
                threshold, k = combos[i % len(combos)]
                spec = random_spec(rng, vocab, threshold)
                run = run_query(dep, lexicon, store, spec, keys.user, k, rng=rng)
                expected = oracle_rank(docs, spec, lexicon, k)
                got_ids = run.result.ids
                got_scores = [strong_decrypt(keys, t.score) for t in run.outcome.ranked]
                assert [strong_decrypt(keys, t.id) for t in run.outcome.ranked] == got_ids
                if (got_ids, got_scores) != ([d for d, _ in expected], [s for _, s in expected]):
                    mismatches.append((spec, expected, got_ids, got_scores))
                # every scored document, not just the top k
                reference = oracle_scores(docs, lexicon, spec)
                rsc = run.outcome.rsc
                assert rsc.excluded == [j for j, s in enumerate(reference) if s is None]
                all_scores = [strong_decrypt(keys, t.score) for t in rsc.tuples]
                if all_scores != [reference[j] for j in rsc.positions]:
                    mismatches.append((spec, "rsc", all_scores))
                nonzero += any(s for _, s in expected)
        elapsed = time.perf_counter() - start
        assert not mismatches, mismatches[:3]
        assert nonzero >= n_queries // 2
        info["detail"] = f"{n_queries} queries, {nonzero} with hits, {elapsed:.0f} s"


def test_criterion_5_expansion_law(lexicon):
    with criterion(5, "query expansion law") as info:
        vocab = eng_vocabulary(lexicon)
        rng = random.Random(505)
        grid = (1.0, 0.5, Fraction(1, 3), 0.25, 0.2, 0.1)
        n = 200
        for _ in range(n):
            base = random_spec(rng, vocab, 1.0)
            counts = []
            for t in grid:
                spec = spec_from_lists(base.keywords, base.keyword_scores, base.langs, base.lang_scores, threshold=t)
                q = build_target_query(lexicon, spec)
                counts.append(q.group_count())
                reference = oracle_expansion(lexicon, spec)
                for blk in q.blocks:
                    assert Counter((frozenset(g.lemmas), g.eta) for g in blk.groups) == Counter(reference[blk.lang])
                    for g in blk.groups:
                        assert g.eta == g.beta * blk.gamma * scaled_similarity(g.sim)
                        assert g.eta == g.beta * blk.gamma * int(Fraction(1000) * g.sim + Fraction(1, 2))
                if t == 1.0:
                    direct = set().union(*(synsets_for(lexicon, w, "eng") for w in spec.keywords))
                    for blk in q.blocks:
                        for g in blk.groups:
                            assert g.provenance == "direct" and g.sim == 1 and g.synset in direct
                            assert set(g.lemmas) <= set(lexicon.lemmas_of(g.synset, blk.lang))
            assert counts == sorted(counts), counts
        info["detail"] = f"{n} queries x {len(grid)} thresholds"


def test_criterion_6_trapdoor_unlinkability(keys64, lexicon):
    with criterion(6, "trapdoor unlinkability") as info:
        rng = random.Random(606)
        vocab = eng_vocabulary(lexicon)
        components = 0
        for _ in range(20):
            spec = random_spec(rng, vocab, rng.choice((1.0, 0.5)))
            q = build_target_query(lexicon, spec)
            a = generate_trapdoor(keys64.params, keys64.user.pk, q, 3)
            b = generate_trapdoor(keys64.params, keys64.user.pk, q, 3)
            ca, cb = a.ciphertexts(), b.ciphertexts()
            assert len(ca) == len(cb)
            for x, y in zip(ca, cb):
                assert x.c1 != y.c1 and x.c2 != y.c2
            assert [strong_decrypt(keys64, c) for c in ca] == [strong_decrypt(keys64, c) for c in cb]
            assert [[len(g.words) for g in blk.groups] for blk in a.blocks] == [[len(g.words) for g in blk.groups] for blk in b.blocks]
            components += len(ca)
        info["detail"] = f"20 trapdoor pairs, {components} ciphertexts each side"


def test_criterion_7_scaling_shapes(tmp_path):
    with criterion(7, "benchmark curves are linear") as info:
        keys = make_keys(64, 707)
        reports = [
            (bench_outsource(keys, "docs", [16, 32, 48, 64, 80, 96], fixed=8, repeats=9), 0.98),
            (bench_outsource(keys, "keywords", [4, 8, 12, 16, 20, 24], fixed=64, repeats=9), 0.98),
            (bench_query(keys, "k", [1, 2, 3, 4, 5, 6], fixed=48, repeats=5), 0.95),
        ]
        fits = []
        for report, floor in reports:
            name = f"{report.phase}_{report.var}"
            (tmp_path / f"{name}.tsv").write_text(report.to_tsv())
            plot_report(report, tmp_path / f"{name}.png")
            slope, _, r2 = report.fit()
            fits.append(f"{name} R^2={r2:.4f}")
            assert slope > 0
            assert r2 >= floor, f"{name}: R^2 {r2:.4f} < {floor}"
        info["detail"] = ", ".join(fits)


def test_criterion_8_user_survey_excluded():
    with criterion(8, "user-satisfaction survey"):
        pytest.skip("human-subject data; exact oracle equivalence of criterion 4 stands in")
