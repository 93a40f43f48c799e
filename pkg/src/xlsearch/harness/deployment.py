"""Wiring of the six roles: key generation, owner, query transform, user, CP and CSP.

The query transform and the data user run in the caller's process.  CP and
CSP each hold exactly one strong-key share; in ``two-socket`` mode the CSP
answers on its own TCP server thread and every protocol message crosses a
real socket.
"""

from __future__ import annotations

import logging
import secrets
from dataclasses import dataclass

from .. import pctd
from ..errors import DecryptionError, KeyMismatchError, ParameterError, ProtocolError
from ..expansion import ExtendedQuery, QuerySpec, build_target_query
from ..lexicon import Lexicon
from ..mpc.parties import CloudPlatform, ComputeProvider, Transcript
from ..mpc.transport import FrameServer, InProcessTransport, SocketTransport
from ..pctd import Ciphertext, PublicParams, StrongKey, StrongKeyShares, UserKeyPair
from ..query_client import SearchResult, Trapdoor, decrypt_results, generate_trapdoor
from ..search_engine import SearchEngine, SearchOutcome
from ..secure_index import DocumentRecord, outsource
from ..store import KeyDir, MemoryStore
from .config import MODES, Config

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KeyMaterial:
    params: PublicParams
    shares: StrongKeyShares
    owner: UserKeyPair
    user: UserKeyPair
    strong: StrongKey | None = None


def setup_keys(bits: int, rng=None, *, keep_strong: bool = False) -> KeyMaterial:
    """Key generation centre: parameters, split strong key, owner and user keys."""
    rng = rng or secrets.SystemRandom()
    params, strong = pctd.keygen(bits, rng=rng)
    shares = pctd.split_strong_key(params, strong, rng)
    owner = pctd.user_keygen(params, rng)
    user = pctd.user_keygen(params, rng)
    return KeyMaterial(params, shares, owner, user, strong if keep_strong else None)


def outsource_corpus(params: PublicParams, owner_pk: int, docs: list[DocumentRecord], store=None, rng=None):
    store = store if store is not None else MemoryStore(owner_pk)
    for doc in docs:
        store.append(doc.id, outsource(params, owner_pk, doc, rng))
    return store


class Deployment:
    """A live CP/CSP pair plus the search engine running on CP."""

    def __init__(
        self,
        params: PublicParams,
        cp_share: int,
        csp_share: int | None,
        *,
        mode: str = "in-process",
        config: Config | None = None,
        csp_address: tuple[str, int] | None = None,
        rng=None,
        record_views: bool = False,
        transcript: Transcript | None = None,
        unsafe: bool = False,
    ):
        if mode not in MODES:
            raise ParameterError(f"mode must be one of {', '.join(MODES)}")
        self.config = config or Config(mode=mode)
        self.mode = mode
        self.params = params
        self.unsafe = unsafe
        self.transcript = transcript
        self.csp: ComputeProvider | None = None
        self.server: FrameServer | None = None
        if csp_address is None:
            if csp_share is None:
                raise ParameterError("a local CSP needs its key share")
            self.csp = ComputeProvider(params, csp_share, rng=rng, record_views=record_views)
        if mode == "in-process":
            if self.csp is None:
                raise ParameterError("in-process mode runs the CSP locally")
            transport = InProcessTransport(self.csp.handle_bytes)
        else:
            if csp_address is None:
                self.server = FrameServer(self.csp.handle_bytes, self.config.host, self.config.port).start()
                csp_address = self.server.address
            transport = SocketTransport(*csp_address)
        self.cp = CloudPlatform(params, cp_share, transport, rng=rng, transcript=transcript)
        self.engine = SearchEngine(self.cp, mu=self.config.mu, workers=self.config.workers)
        self._debug_shares = (cp_share, csp_share) if unsafe and csp_share is not None else None
        try:
            self._readiness_check()
        except BaseException:
            self.close()
            raise

    def _readiness_check(self) -> None:
        if not self.cp.ping():
            raise ProtocolError("CSP did not answer the readiness ping")
        # a REKEY round trip between throwaway keys (secret keys 1 and 2)
        # only succeeds if the two shares belong together
        m = secrets.randbelow(self.params.N)
        probe = pctd.encrypt(self.params, pctd.public_key_for(self.params, 1), m)
        try:
            back = self.cp.rekey_many([probe], pctd.public_key_for(self.params, 2))[0]
            ok = pctd.decrypt_weak(self.params, 2, back) == m
        except (ProtocolError, DecryptionError):
            ok = False
        if not ok:
            raise KeyMismatchError("CP and CSP key shares do not combine to the strong key")

    # -- server runtime surface ---------------------------------------------------

    def search(self, store, trapdoor: Trapdoor, k: int | None = None) -> SearchOutcome:
        return self.engine.search(store, trapdoor, k)

    def dump_transcript(self) -> Transcript:
        if self.transcript is None:
            raise ParameterError("deployment was started without a transcript")
        return self.transcript

    def debug_decrypt(self, ct: Ciphertext) -> int:
        """Joint decryption of any ciphertext; only for test deployments."""
        if self._debug_shares is None:
            raise PermissionError("debug decryption requires an unsafe deployment with both shares")
        lam1, lam2 = self._debug_shares
        return pctd.decrypt_with_shares(self.params, StrongKeyShares(lam1, lam2), ct)

    def kill_csp(self) -> None:
        """Fault injection: take the CSP off the wire."""
        if self.server is not None:
            self.server.stop()
            self.server = None
        else:
            self.cp.transport.close()

    def close(self) -> None:
        try:
            self.cp.transport.close()
        finally:
            if self.server is not None:
                self.server.stop()
                self.server = None

    def __enter__(self) -> "Deployment":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def run_deployment(keys: KeyMaterial, mode: str = "in-process", **kwargs) -> Deployment:
    return Deployment(keys.params, keys.shares.lambda1, keys.shares.lambda2, mode=mode, **kwargs)


def deployment_from_keydir(path, mode: str = "in-process", **kwargs) -> Deployment:
    kd = KeyDir(path)
    return Deployment(kd.params(), kd.cp_share(), kd.csp_share(), mode=mode, **kwargs)


@dataclass
class QueryRun:
    query: ExtendedQuery
    trapdoor: Trapdoor
    outcome: SearchOutcome
    result: SearchResult


def run_query(
    deployment: Deployment,
    lexicon: Lexicon,
    store,
    spec: QuerySpec,
    user: UserKeyPair,
    k: int,
    *,
    scale: int = 1000,
    rng=None,
) -> QueryRun:
    """User-side expansion and trapdoor, joint search, then result decryption."""
    params = deployment.params
    query = build_target_query(lexicon, spec, scale=scale)
    trapdoor = generate_trapdoor(params, user.pk, query, k, rng)
    outcome = deployment.search(store, trapdoor, k)
    result = decrypt_results(params, user.sk, outcome.results, store)
    return QueryRun(query, trapdoor, outcome, result)
