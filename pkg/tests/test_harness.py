import random

import pytest

from helpers import make_keys
from xlsearch import pctd
from xlsearch.errors import KeyMismatchError, ParameterError, ProtocolError
from xlsearch.expansion import spec_from_lists
from xlsearch.harness.bench import BenchReport, bench_outsource, bench_query
from xlsearch.harness.config import Config
from xlsearch.harness.corpus import generate_corpus, synthetic_documents, write_corpus
from xlsearch.harness.deployment import Deployment, outsource_corpus, run_deployment, run_query
from xlsearch.harness.oracle import oracle_expansion, oracle_rank, oracle_scores
from xlsearch.harness.plots import plot_report
from xlsearch.secure_index import DocumentRecord, prepare_documents, read_corpus
from xlsearch.store import DirectoryStore


def test_config_parse_and_errors(tmp_path):
    cfg = Config.parse("bits = 128\n# comment\nthreshold=0.5\nmode=two-socket\nport=0\n")
    assert (cfg.bits, cfg.threshold, cfg.mode) == (128, 0.5, "two-socket")
    assert Config.parse(cfg.dump()) == cfg
    for bad in ("bits", "colour=red", "bits=many", "mode=carrier-pigeon", "threshold=2"):
        with pytest.raises(ParameterError):
            Config.parse(bad)
    with pytest.raises(ParameterError):
        Config.load(tmp_path / "none.cfg")


THREE_DOCS = [
    DocumentRecord(1, b"", "eng", (("dog", 1500),)),
    DocumentRecord(2, b"", "eng", (("car", 40),)),
    DocumentRecord(3, b"", "fra", (("chien", 9),)),
]


def test_oracle_fixture_case(lexicon):
    spec = spec_from_lists(["dog"], [2], ["eng", "cmn"], [3, 1])
    assert oracle_scores(THREE_DOCS, lexicon, spec) == [9_000_000, 0, None]
    assert oracle_rank(THREE_DOCS, spec, lexicon, 2) == [(1, 9_000_000), (2, 0)]
    assert oracle_rank(THREE_DOCS[:1], spec, lexicon, 5) == [(1, 9_000_000)]


def test_oracle_total_order(lexicon):
    docs = [DocumentRecord(i, b"", "eng", (("dog", w),)) for i, w in enumerate([5, 1, 5, 9, 0])]
    spec = spec_from_lists(["dog"], [1], ["eng"], [1])
    ranked = oracle_rank(docs, spec, lexicon, len(docs))
    assert [i for i, _ in ranked] == [3, 0, 2, 1, 4]
    assert all(a[1] >= b[1] for a, b in zip(ranked, ranked[1:]))


def test_oracle_expansion_agrees_on_examples(lexicon):
    spec = spec_from_lists(["dog"], [2], ["eng"], [3], threshold=0.5)
    exp = oracle_expansion(lexicon, spec)["eng"]
    assert (frozenset({"dog", "hound"}), 6000) in exp
    assert (frozenset({"puppy", "pup"}), 3000) in exp and len(exp) == 4


def test_generate_corpus(lexicon, keys64):
    entries = generate_corpus(lexicon, 30, seed=3, params=keys64.params)
    assert len(entries) == 30 and len({e[0] for e in entries}) == 30
    assert {e[1] for e in entries} == {"eng", "cmn", "fra"}
    assert entries == generate_corpus(lexicon, 30, seed=3, params=keys64.params)
    docs = prepare_documents(entries, keys64.params)
    assert sum(1 for d in docs if d.keywords) >= 25


def test_write_corpus_round_trip(tmp_path, lexicon):
    entries = generate_corpus(lexicon, 5, seed=1)
    write_corpus(tmp_path / "c", entries)
    assert read_corpus(tmp_path / "c")[0] == entries


def fixture_run(keys, lexicon, n_docs=12, seed=5):
    entries = generate_corpus(lexicon, n_docs, seed=seed, params=keys.params)
    docs = prepare_documents(entries, keys.params)
    store = outsource_corpus(keys.params, keys.owner.pk, docs, rng=random.Random(seed))
    return docs, store


def test_in_process_pipeline_matches_oracle(keys64, lexicon):
    docs, store = fixture_run(keys64, lexicon)
    spec = spec_from_lists(["dog", "cat"], [3, 1], ["eng", "cmn", "fra"], [2, 2, 1], threshold=0.5)
    with run_deployment(keys64) as dep:
        run = run_query(dep, lexicon, store, spec, keys64.user, 4)
    assert run.result.ids == [i for i, _ in oracle_rank(docs, spec, lexicon, 4)]
    assert all(item.body is not None for item in run.result.items)


def test_two_socket_mode_matches_in_process(keys64, lexicon):
    docs, store = fixture_run(keys64, lexicon)
    spec = spec_from_lists(["hound", "car"], [2, 5], ["eng", "fra"], [3, 1], threshold=0.5)
    ranked = []
    for mode in ("in-process", "two-socket"):
        with run_deployment(keys64, mode) as dep:
            run = run_query(dep, lexicon, store, spec, keys64.user, 5)
            ranked.append([(it.doc_id, it.body) for it in run.result.items])
            if mode == "two-socket":
                assert dep.server is not None and dep.cp.transport.__class__.__name__ == "SocketTransport"
    assert ranked[0] == ranked[1] and ranked[0]


@pytest.mark.parametrize("mode", ["in-process", "two-socket"])
def test_killing_csp_aborts_query_and_keeps_store(tmp_path, keys64, lexicon, mode):
    entries = generate_corpus(lexicon, 6, seed=9, params=keys64.params)
    docs = prepare_documents(entries, keys64.params)
    store = DirectoryStore(tmp_path / "store", keys64.owner.pk)
    outsource_corpus(keys64.params, keys64.owner.pk, docs, store)
    before = {p.name: p.read_bytes() for p in (tmp_path / "store").rglob("*") if p.is_file()}
    spec = spec_from_lists(["dog"], [1], ["eng", "cmn", "fra"], [1, 1, 1])
    dep = run_deployment(keys64, mode)
    exchange = dep.cp.transport.exchange
    count = {"n": 0}

    def dying(frame):
        count["n"] += 1
        if count["n"] == 6:
            dep.kill_csp()
        return exchange(frame)

    dep.cp.transport.exchange = dying
    with pytest.raises(ProtocolError):
        run_query(dep, lexicon, store, spec, keys64.user, 3)
    dep.close()
    after = {p.name: p.read_bytes() for p in (tmp_path / "store").rglob("*") if p.is_file()}
    assert after == before
    assert len(DirectoryStore(tmp_path / "store")) == 6


def test_share_mismatch_detected(keys64):
    other = make_keys(64, 77)
    with pytest.raises(KeyMismatchError):
        Deployment(keys64.params, keys64.shares.lambda1, other.shares.lambda2)
    with pytest.raises(KeyMismatchError):
        Deployment(keys64.params, keys64.shares.lambda1, keys64.shares.lambda1)


def test_debug_decrypt_is_gated(keys64):
    ct = pctd.encrypt(keys64.params, keys64.user.pk, 321)
    with run_deployment(keys64) as dep:
        with pytest.raises(PermissionError):
            dep.debug_decrypt(ct)
    with run_deployment(keys64, unsafe=True) as dep:
        assert dep.debug_decrypt(ct) == 321


def test_dump_transcript_requires_test_mode(keys64):
    with run_deployment(keys64) as dep:
        with pytest.raises(ParameterError):
            dep.dump_transcript()


def test_bench_report_fit_and_tsv(tmp_path):
    rep = BenchReport("outsource", "docs", [1, 2, 3, 4], [2.0, 4.0, 6.0, 8.0])
    slope, intercept, r2 = rep.fit()
    assert slope == pytest.approx(2.0) and intercept == pytest.approx(0.0, abs=1e-9) and r2 == pytest.approx(1.0)
    assert rep.to_tsv().splitlines() == ["var\tvalue\tmillis", "docs\t1\t2.000", "docs\t2\t4.000", "docs\t3\t6.000", "docs\t4\t8.000"]
    png = plot_report(rep, tmp_path / "fig.png")
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    with pytest.raises(ValueError):
        BenchReport("outsource", "docs", [1, 2, 3], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        BenchReport("outsource", "docs", [1, 3, 2, 4], [1.0, 2.0, 3.0, 4.0])


def test_bench_drivers_smoke(keys64):
    rep = bench_outsource(keys64, "keywords", [1, 2, 3, 4], fixed=4, repeats=1)
    assert rep.points == [1, 2, 3, 4] and all(ms > 0 for ms in rep.millis)
    rep = bench_query(keys64, "k", [1, 2, 3, 4], fixed=6, repeats=1)
    assert len(rep.millis) == 4
    with pytest.raises(ValueError):
        bench_outsource(keys64, "k", [1, 2, 3, 4])


def test_synthetic_documents():
    docs = synthetic_documents(3, 8, seed=1)
    assert [len(d.keywords) for d in docs] == [8, 8, 8]
    assert docs == synthetic_documents(3, 8, seed=1)
