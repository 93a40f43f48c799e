"""Command-line entry point: ``xlsearch <command> ...``.

Failures print one JSON object on stderr (``{"error": code, "message": ...,
"command": ...}``) and exit with status 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
from pathlib import Path

from . import __version__, pctd
from .errors import XLSearchError
from .expansion import QuerySpec
from .harness.config import MODES, Config
from .lexicon import bundled_fixture_path, load_fixture
from .mpc.parties import ComputeProvider
from .mpc.transport import FrameServer
from .store import DirectoryStore, KeyDir, read_public_key, read_record, read_share

log = logging.getLogger("xlsearch")


class CommandError(Exception):
    code = "usage"


def _csv(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in _csv(text)]
    except ValueError:
        raise CommandError(f"expected comma-separated integers, got {text!r}") from None


def _config(args) -> Config:
    return Config.load(args.config) if getattr(args, "config", None) else Config()


def _params_for(owner_key: Path, explicit: str | None) -> pctd.PublicParams:
    path = Path(explicit) if explicit else owner_key.parent / KeyDir.PARAMS
    return pctd.PublicParams.from_record(read_record(path))


# -- commands -----------------------------------------------------------------------


def cmd_keygen(args) -> int:
    from .harness.deployment import setup_keys

    bits = args.bits or _config(args).bits
    keys = setup_keys(bits)
    KeyDir(args.out).write(keys.params, keys.shares, keys.owner, keys.user)
    print(json.dumps({"out": str(args.out), "bits": bits, "modulus_bits": keys.params.N.bit_length()}))
    return 0


def cmd_gen_corpus(args) -> int:
    from .harness.corpus import generate_corpus, write_corpus

    lexicon = load_fixture(args.lexicon) if args.lexicon else load_fixture(bundled_fixture_path())
    params = pctd.PublicParams.from_record(read_record(args.params)) if args.params else None
    entries = generate_corpus(lexicon, args.docs, _csv(args.langs), seed=args.seed, params=params)
    write_corpus(args.out, entries)
    print(json.dumps({"out": str(args.out), "docs": len(entries)}))
    return 0


def cmd_outsource(args) -> int:
    from .harness.deployment import outsource_corpus
    from .secure_index import prepare_documents, read_corpus

    owner_key = Path(args.owner_key)
    owner_pk = read_public_key(owner_key)
    params = _params_for(owner_key, args.params)
    entries, overrides = read_corpus(args.corpus)
    docs = prepare_documents(entries, params, overrides=overrides, scale=_config(args).scale)
    store = DirectoryStore(args.store, owner_pk)
    outsource_corpus(params, owner_pk, docs, store)
    print(json.dumps({"store": str(args.store), "documents": len(docs), "total": len(store)}))
    return 0


def cmd_query(args) -> int:
    from .expansion import build_target_query
    from .harness.deployment import Deployment
    from .query_client import decrypt_results, generate_trapdoor

    cfg = _config(args)
    keys = KeyDir(args.keys)
    params, user = keys.params(), keys.user()
    lexicon = load_fixture(args.lexicon) if args.lexicon else load_fixture(bundled_fixture_path())
    spec = QuerySpec(
        tuple(args.keywords),
        tuple(args.scores),
        tuple(args.langs),
        tuple(args.lang_scores),
        args.threshold if args.threshold is not None else cfg.threshold,
        args.source_lang,
    )
    store = DirectoryStore(args.store)
    mode = args.mode or cfg.mode
    if args.csp:
        host, _, port = args.csp.rpartition(":")
        dep = Deployment(params, keys.cp_share(), None, mode="two-socket", config=cfg, csp_address=(host, int(port)))
    else:
        dep = Deployment(params, keys.cp_share(), keys.csp_share(), mode=mode, config=cfg)
    with dep:
        query = build_target_query(lexicon, spec, scale=cfg.scale)
        trapdoor = generate_trapdoor(params, user.pk, query, args.k)
        outcome = dep.search(store, trapdoor, args.k)
    result = decrypt_results(params, user.sk, outcome.results, store)
    for item in result.items:
        if args.show_text and item.body is not None:
            print(f"{item.doc_id}\t{item.body.decode('utf-8', 'replace')}")
        else:
            print(item.doc_id)
    return 0


def cmd_validate(args) -> int:
    keys = KeyDir(args.keys)
    params = keys.params()
    lam1, lam2 = keys.cp_share(), keys.csp_share()
    owner, user = keys.owner(), keys.user()
    for who, pair in (("owner", owner), ("user", user)):
        if pctd.public_key_for(params, pair.sk) != pair.pk:
            raise XLSearchError(f"{who} key pair is inconsistent")
    probe = pctd.encrypt(params, user.pk, 42)
    if pctd.decrypt_with_shares(params, pctd.StrongKeyShares(lam1, lam2), probe) != 42:
        raise XLSearchError("key shares do not combine to the strong key")
    report = {"keys": "ok", "modulus_bits": params.N.bit_length()}
    if args.store:
        store = DirectoryStore(args.store)
        if store.owner_pk != owner.pk:
            raise XLSearchError("store was built for a different owner key")
        for tup in store.tuples:
            for ct in (tup.enc_id, tup.enc_keyseed, tup.enc_lang):
                if ct.key_tag != store.owner_pk:
                    raise XLSearchError("tuple ciphertext under an unexpected key")
        report["store"] = {"tuples": len(store)}
    print(json.dumps(report))
    return 0


def cmd_lexicon(args) -> int:
    lex = load_fixture(args.dir)
    if args.action == "validate":
        print(json.dumps({"valid": True, "synsets": len(lex)}))
    else:
        print(json.dumps(lex.stats(), ensure_ascii=False))
    return 0


def cmd_bench(args) -> int:
    from .harness.bench import bench_outsource, bench_query
    from .harness.deployment import setup_keys
    from .harness.plots import plot_report

    cfg = _config(args)
    keys = setup_keys(args.bits or cfg.bits)
    points = _ints(args.points)
    if args.phase == "outsource":
        report = bench_outsource(keys, args.var, points, fixed=args.fixed, repeats=args.repeats)
    else:
        report = bench_query(keys, args.var, points, fixed=args.fixed, repeats=args.repeats, mode=args.mode or cfg.mode)
    tsv = report.to_tsv()
    if args.out:
        Path(args.out).write_text(tsv)
    else:
        sys.stdout.write(tsv)
    if args.plot:
        plot_report(report, args.plot)
    slope, intercept, r2 = report.fit()
    log.info("slope %.4f ms/unit, intercept %.2f ms, R^2 %.4f", slope, intercept, r2)
    return 0


def cmd_csp_serve(args) -> int:
    params = pctd.PublicParams.from_record(read_record(Path(args.keys) / KeyDir.PARAMS))
    share = read_share(Path(args.share) if args.share else Path(args.keys) / KeyDir.CSP_SHARE, "csp")
    csp = ComputeProvider(params, share)
    server = FrameServer(csp.handle_bytes, args.host, args.port)
    host, port = server.address
    print(json.dumps({"listening": f"{host}:{port}"}), flush=True)
    signal.signal(signal.SIGTERM, lambda *_: sys.exit(0))
    try:
        server.serve_forever()
    except (KeyboardInterrupt, SystemExit):
        pass
    finally:
        server.stop()
    return 0


# -- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="xlsearch", description="Cross-lingual ranked search over encrypted documents.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate parameters, key shares and user keys")
    p.add_argument("--bits", type=int, help="bit length of each prime")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("gen-corpus", help="write a synthetic multilingual corpus")
    p.add_argument("--docs", type=int, required=True)
    p.add_argument("--langs", default="eng,cmn,fra")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lexicon")
    p.add_argument("--params", help="drop lemmas too long for these parameters")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("outsource", help="index, encrypt and store a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--owner-key", required=True)
    p.add_argument("--params")
    p.add_argument("--store", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_outsource)

    p = sub.add_parser("query", help="run a ranked search; prints document ids, best first")
    p.add_argument("--keywords", nargs="+", required=True)
    p.add_argument("--scores", nargs="+", type=int, required=True)
    p.add_argument("--langs", nargs="+", required=True)
    p.add_argument("--lang-scores", nargs="+", type=int, required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--source-lang", default="eng")
    p.add_argument("--keys", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--csp", help="HOST:PORT of a running csp-serve")
    p.add_argument("--show-text", action="store_true")
    p.add_argument("--config")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("validate", help="check key files and, optionally, a store")
    p.add_argument("--keys", required=True)
    p.add_argument("--store")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("lexicon", help="inspect a fixture lexicon directory")
    p.add_argument("action", choices=("validate", "stats"))
    p.add_argument("dir")
    p.set_defaults(func=cmd_lexicon)

    p = sub.add_parser("bench", help="scaling benchmark emitting TSV")
    p.add_argument("phase", choices=("outsource", "query"))
    p.add_argument("--var", required=True, choices=("docs", "keywords", "k"))
    p.add_argument("--points", required=True, help="comma-separated, increasing")
    p.add_argument("--fixed", type=int, help="value of the variable held constant")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--bits", type=int)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--out", help="TSV path (default stdout)")
    p.add_argument("--plot", help="PNG path for the figure")
    p.add_argument("--config")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("csp-serve", help="run the CSP on a TCP port")
    p.add_argument("--keys", required=True, help="directory holding params.json")
    p.add_argument("--share", help="CSP share file (default KEYS/csp.share)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0)
    p.set_defaults(func=cmd_csp_serve)
    return ap


def _error_record(command: str | None, code: str, message: str) -> str:
    return json.dumps({"error": code, "message": message, "command": command}, ensure_ascii=False)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (XLSearchError, CommandError) as exc:
        print(_error_record(args.command, exc.code, str(exc)), file=sys.stderr)
    except (OSError, ValueError, KeyError) as exc:
        print(_error_record(args.command, type(exc).__name__, str(exc)), file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
