"""The two non-colluding servers and the interactive protocols between them.

``CloudPlatform`` (CP) holds the first strong-key share and drives every
protocol; ``ComputeProvider`` (CSP) holds the second share and only ever
answers requests.  Every value the CSP decrypts has been blinded by CP
first, either additively (``m + rho``) or multiplicatively (``r * x``),
except results explicitly whitelisted for joint reveal.

All CP operations accept batches so that one message round can carry many
independent items; the single-item methods are thin wrappers.
"""

from __future__ import annotations

import itertools
import logging
import math
import secrets
import threading
from collections import Counter
from dataclasses import dataclass, field

from .. import pctd
from ..errors import ProtocolError, RevealRefused, XLSearchError
from ..pctd import Ciphertext, JointPublicKey, PublicParams
from .transport import (
    Frame,
    ProtocolId,
    Transport,
    decode_frame,
    encode_frame,
    error_frame,
    unwire_ints,
    wire_ints,
)

log = logging.getLogger(__name__)

# value classes that may be decrypted in the clear for both servers
REVEALABLE = frozenset({"lang-match"})


@dataclass
class TranscriptEntry:
    direction: str  # "cp->csp" or "csp->cp"
    session: int
    protocol: str
    step: int
    payload: dict


@dataclass
class Transcript:
    """Ordered record of every frame crossing the transport, seen from CP."""

    entries: list[TranscriptEntry] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def record(self, direction: str, frame: Frame) -> None:
        with self._lock:
            self.entries.append(
                TranscriptEntry(direction, frame.session, frame.protocol.name, frame.step, frame.payload)
            )

    def protocols(self) -> Counter:
        return Counter(e.protocol for e in self.entries if e.direction == "cp->csp")


@dataclass(frozen=True)
class View:
    """A plaintext the CSP learned while serving a request."""

    protocol: str
    value_class: str
    value: int


def _target_of(target) -> int:
    return target.pk_sigma if isinstance(target, JointPublicKey) else target


class ComputeProvider:
    """CSP: completes partial decryptions of blinded values and re-encrypts."""

    role = "CSP"

    def __init__(self, params: PublicParams, lambda2: int, *, rng=None, record_views: bool = False):
        self.params = params
        self._share = lambda2
        self._rng = rng or secrets.SystemRandom()
        self.record_views = record_views
        self.views: list[View] = []
        self.requests = Counter()
        self._lock = threading.Lock()
        self._handlers = {
            ProtocolId.PING: self._ping,
            ProtocolId.REKEY: self._rekey,
            ProtocolId.SMD: self._smd,
            ProtocolId.ZERO_TEST: self._zero_test,
            ProtocolId.SIGN_TEST: self._sign_test,
            ProtocolId.REVEAL: self._reveal,
        }

    # frame entry points

    def handle_bytes(self, raw: bytes) -> bytes:
        try:
            request = decode_frame(raw)
        except ProtocolError as exc:
            return encode_frame(Frame(0, ProtocolId.ERROR, 0, {"error": exc.code, "message": str(exc)}))
        return encode_frame(self.handle(request))

    def handle(self, request: Frame) -> Frame:
        handler = self._handlers.get(request.protocol)
        try:
            if handler is None:
                raise ProtocolError(f"unsupported protocol {request.protocol.name}")
            with self._lock:
                self.requests[request.protocol.name] += 1
            payload = handler(request.payload)
        except (XLSearchError, KeyError, TypeError, ValueError) as exc:
            log.warning("CSP rejected %s session %d: %s", request.protocol.name, request.session, exc)
            return error_frame(request, exc)
        return Frame(request.session, request.protocol, request.step + 1, payload)

    # helpers

    def _see(self, protocol: str, value_class: str, value: int) -> None:
        if self.record_views:
            with self._lock:
                self.views.append(View(protocol, value_class, value))

    def _open(self, c1: int, partial: int) -> int:
        return pctd.partial_decrypt_2_combine(self.params, self._share, c1, partial)

    def _enc(self, pk: int, m: int) -> list[int]:
        ct = pctd.encrypt(self.params, pk, m % self.params.N, rng=self._rng)
        return [ct.c1, ct.c2]

    def _items(self, payload: dict) -> list:
        return unwire_ints(payload["items"])

    # handlers

    def _ping(self, payload: dict) -> dict:
        return {"nonce": payload.get("nonce", "0"), "role": self.role}

    def _rekey(self, payload: dict) -> dict:
        target = unwire_ints(payload["target"])
        out = []
        for c1, partial in self._items(payload):
            m = self._open(c1, partial)
            self._see("REKEY", "blinded", m)
            out.append(self._enc(target, m))
        return {"items": wire_ints(out)}

    def _smd(self, payload: dict) -> dict:
        target = unwire_ints(payload["target"])
        N = self.params.N
        out = []
        for c1a, pa, c1b, pb in self._items(payload):
            a = self._open(c1a, pa)
            b = self._open(c1b, pb)
            self._see("SMD", "blinded", a)
            self._see("SMD", "blinded", b)
            out.append(self._enc(target, a * b % N) + self._enc(target, a) + self._enc(target, b))
        return {"items": wire_ints(out)}

    def _zero_test(self, payload: dict) -> dict:
        target = unwire_ints(payload["target"])
        out = []
        for c1, partial in self._items(payload):
            x = self._open(c1, partial)
            self._see("ZERO_TEST", "blinded-product", x)
            out.append(self._enc(target, 1 if x == 0 else 0))
        return {"items": wire_ints(out)}

    def _sign_test(self, payload: dict) -> dict:
        target = unwire_ints(payload["target"])
        out = []
        for c1, partial in self._items(payload):
            x = self._open(c1, partial)
            self._see("SIGN_TEST", "blinded-product", x)
            out.append(self._enc(target, 1 if 2 * x > self.params.N else 0))
        return {"items": wire_ints(out)}

    def _reveal(self, payload: dict) -> dict:
        value_class = payload.get("class")
        if value_class not in REVEALABLE:
            raise RevealRefused(f"value class {value_class!r} may not be revealed")
        values = []
        for c1, partial in self._items(payload):
            m = self._open(c1, partial)
            self._see("REVEAL", f"revealed:{value_class}", m)
            values.append(m)
        return {"values": wire_ints(values)}


class CloudPlatform:
    """CP: owns the first key share and orchestrates every two-party protocol."""

    role = "CP"

    def __init__(
        self,
        params: PublicParams,
        lambda1: int,
        transport: Transport,
        *,
        rng=None,
        transcript: Transcript | None = None,
    ):
        self.params = params
        self._share = lambda1
        self.transport = transport
        self._rng = rng or secrets.SystemRandom()
        self.transcript = transcript
        self.messages = Counter()
        self.items = Counter()
        self._sessions = itertools.count(1)
        self._lock = threading.Lock()

    # -- plumbing ---------------------------------------------------------

    def _new_session(self) -> int:
        with self._lock:
            return next(self._sessions) & 0xFFFFFFFF

    def _exchange(self, protocol: ProtocolId, payload: dict, n_items: int = 0, session: int | None = None) -> dict:
        request = Frame(session if session is not None else self._new_session(), protocol, 1, payload)
        if self.transcript is not None:
            self.transcript.record("cp->csp", request)
        with self._lock:
            self.messages[protocol.name] += 1
            self.items[protocol.name] += n_items
        reply = self.transport.exchange(request)
        if self.transcript is not None:
            self.transcript.record("csp->cp", reply)
        if reply.protocol == ProtocolId.ERROR:
            cls = RevealRefused if reply.payload.get("error") == RevealRefused.code else ProtocolError
            raise cls(f"CSP error in {protocol.name}: {reply.payload.get('message')}")
        if reply.session != request.session or reply.protocol != protocol:
            raise ProtocolError("reply does not belong to the request's session")
        return reply.payload

    def _enc(self, pk: int, m: int) -> Ciphertext:
        return pctd.encrypt(self.params, pk, m % self.params.N, rng=self._rng)

    def _partial(self, ct: Ciphertext) -> int:
        return pctd.partial_decrypt_1(self.params, self._share, ct)

    def _additive_blind(self, ct: Ciphertext) -> tuple[Ciphertext, int]:
        rho = self._rng.randrange(self.params.N)
        return pctd.hom_add(self.params, ct, self._enc(ct.key_tag, rho)), rho

    def _unit(self) -> int:
        N = self.params.N
        while True:
            r = self._rng.randrange(1, N)
            if math.gcd(r, N) == 1:
                return r

    def _cts(self, raw: list, pk: int, stride: int = 1) -> list[list[Ciphertext]]:
        return [
            [Ciphertext(row[2 * i], row[2 * i + 1], pk) for i in range(stride)]
            for row in raw
        ]

    def _resolve(self, a: Ciphertext, b: Ciphertext, target) -> int:
        if target is not None:
            return _target_of(target)
        if a.key_tag == b.key_tag:
            return a.key_tag
        return JointPublicKey.combine(self.params, a.key_tag, b.key_tag).pk_sigma

    # -- protocols ----------------------------------------------------------

    def ping(self) -> bool:
        nonce = format(self._rng.getrandbits(32), "x")
        reply = self._exchange(ProtocolId.PING, {"nonce": nonce})
        return reply.get("nonce") == nonce and reply.get("role") == ComputeProvider.role

    def rekey_many(self, cts: list[Ciphertext], target) -> list[Ciphertext]:
        """Move each ciphertext under ``target`` without changing its plaintext.

        CP adds a random pad, partially decrypts, CSP finishes the
        decryption (seeing only the padded value) and re-encrypts under the
        target key, and CP strips the pad homomorphically.
        """
        pk = _target_of(target)
        todo = [i for i, ct in enumerate(cts) if ct.key_tag != pk]
        out = list(cts)
        if not todo:
            return out
        pads, items = [], []
        for i in todo:
            blinded, rho = self._additive_blind(cts[i])
            pads.append(rho)
            items.append([blinded.c1, self._partial(blinded)])
        reply = self._exchange(
            ProtocolId.REKEY, {"target": wire_ints(pk), "items": wire_ints(items)}, len(items)
        )
        fresh = self._cts(unwire_ints(reply["items"]), pk)
        if len(fresh) != len(todo):
            raise ProtocolError("REKEY reply has the wrong item count")
        for i, (ct,), rho in zip(todo, fresh, pads):
            out[i] = pctd.hom_add(self.params, ct, self._enc(pk, -rho))
        return out

    def convert_to_joint(self, ct: Ciphertext, target) -> Ciphertext:
        return self.rekey_many([ct], target)[0]

    def key_switch(self, ct: Ciphertext, pk_user: int) -> Ciphertext:
        return self.rekey_many([ct], pk_user)[0]

    def sad(self, a: Ciphertext, b: Ciphertext, target=None) -> Ciphertext:
        pk = self._resolve(a, b, target)
        a2, b2 = self.rekey_many([a, b], pk)
        return pctd.hom_add(self.params, a2, b2)

    def smd_many(self, pairs: list[tuple[Ciphertext, Ciphertext]], target) -> list[Ciphertext]:
        """Products ``A * B`` under ``target`` for operands under any keys.

        CSP sees ``A + ra`` and ``B + rb`` and returns encryptions of their
        product and of each padded operand; CP then removes the cross terms:
        ``AB = a'b' - rb a' - ra b' + ra rb``.
        """
        if not pairs:
            return []
        pk = _target_of(target)
        params = self.params
        pads, items = [], []
        for a, b in pairs:
            ba, ra = self._additive_blind(a)
            bb, rb = self._additive_blind(b)
            pads.append((ra, rb))
            items.append([ba.c1, self._partial(ba), bb.c1, self._partial(bb)])
        reply = self._exchange(
            ProtocolId.SMD, {"target": wire_ints(pk), "items": wire_ints(items)}, len(items)
        )
        rows = self._cts(unwire_ints(reply["items"]), pk, stride=3)
        if len(rows) != len(pairs):
            raise ProtocolError("SMD reply has the wrong item count")
        out = []
        for (ab, ea, eb), (ra, rb) in zip(rows, pads):
            acc = pctd.hom_add(params, ab, pctd.hom_scale(params, ea, -rb))
            acc = pctd.hom_add(params, acc, pctd.hom_scale(params, eb, -ra))
            out.append(pctd.hom_add(params, acc, self._enc(pk, ra * rb)))
        return out

    def smd(self, a: Ciphertext, b: Ciphertext, target=None) -> Ciphertext:
        return self.smd_many([(a, b)], self._resolve(a, b, target))[0]

    def zero_test_many(self, diffs: list[Ciphertext], target, *, shuffle: bool = True) -> list[Ciphertext]:
        """Encrypted indicator ``[x == 0]`` for each ciphertext of ``x``.

        CP multiplies by a fresh unit so CSP sees zero or a uniformly
        scrambled nonzero value, and submits the batch in random order so
        CSP cannot tie an outcome to a position.
        """
        if not diffs:
            return []
        pk = _target_of(target)
        order = list(range(len(diffs)))
        if shuffle:
            self._rng.shuffle(order)
        items = []
        for i in order:
            masked = pctd.hom_scale(self.params, diffs[i], self._unit())
            items.append([masked.c1, self._partial(masked)])
        reply = self._exchange(
            ProtocolId.ZERO_TEST, {"target": wire_ints(pk), "items": wire_ints(items)}, len(items)
        )
        bits = self._cts(unwire_ints(reply["items"]), pk)
        if len(bits) != len(diffs):
            raise ProtocolError("ZERO_TEST reply has the wrong item count")
        out: list[Ciphertext] = [None] * len(diffs)  # type: ignore[list-item]
        for pos, (bit,) in zip(order, bits):
            out[pos] = bit
        return out

    def ket_many(self, pairs: list[tuple[Ciphertext, Ciphertext]], target) -> list[Ciphertext]:
        pk = _target_of(target)
        flat = self.rekey_many([c for pair in pairs for c in pair], pk)
        diffs = [pctd.hom_sub(self.params, flat[2 * i], flat[2 * i + 1]) for i in range(len(pairs))]
        return self.zero_test_many(diffs, pk)

    def ket(self, a: Ciphertext, b: Ciphertext, target=None) -> Ciphertext:
        """Encrypted bit: 1 iff the two plaintexts are equal."""
        return self.ket_many([(a, b)], self._resolve(a, b, target))[0]

    def slt_many(self, pairs: list[tuple[Ciphertext, Ciphertext]], mu: int) -> list[Ciphertext]:
        """Encrypted bits ``[A < B]`` for signed plaintexts with ``|A|, |B| < 2^mu``.

        CP flips a coin per pair choosing between ``2(A-B)+1`` and
        ``2(B-A)-1``, scales by a random positive factor small enough to
        keep the product below N/2, and CSP reports only its sign.
        """
        if not pairs:
            return []
        params = self.params
        blind_bits = params.N.bit_length() // 2 - mu - 2
        if blind_bits < 1:
            raise ProtocolError(f"magnitude bound 2^{mu} leaves no room to blind within N")
        pk = pairs[0][0].key_tag
        coins, items = [], []
        for a, b in pairs:
            if a.key_tag != pk or b.key_tag != pk:
                raise ProtocolError("slt operands must share one key")
            s = self._rng.getrandbits(1)
            lo, hi = (a, b) if s == 0 else (b, a)
            x = pctd.hom_scale(params, pctd.hom_sub(params, lo, hi), 2)
            x = pctd.hom_add(params, x, self._enc(pk, 1 if s == 0 else -1))
            x = pctd.hom_scale(params, x, self._rng.randrange(1, (1 << blind_bits) + 1))
            coins.append(s)
            items.append([x.c1, self._partial(x)])
        reply = self._exchange(
            ProtocolId.SIGN_TEST, {"target": wire_ints(pk), "items": wire_ints(items)}, len(items)
        )
        signs = self._cts(unwire_ints(reply["items"]), pk)
        if len(signs) != len(pairs):
            raise ProtocolError("SIGN_TEST reply has the wrong item count")
        out = []
        for (neg,), s in zip(signs, coins):
            if s == 0:
                out.append(neg)
            else:
                out.append(pctd.hom_sub(params, self._enc(pk, 1), neg))
        return out

    def slt(self, a: Ciphertext, b: Ciphertext, mu: int) -> Ciphertext:
        return self.slt_many([(a, b)], mu)[0]

    def osel_many(self, triples: list[tuple[Ciphertext, Ciphertext, Ciphertext]]) -> list[Ciphertext]:
        """``b*A + (1-b)*B`` computed as ``B + SMD(b, A - B)``."""
        params = self.params
        if not triples:
            return []
        pk = triples[0][0].key_tag
        diffs = [(bit, pctd.hom_sub(params, a, b)) for bit, a, b in triples]
        prods = self.smd_many(diffs, pk)
        return [pctd.hom_add(params, b, p) for (_, _, b), p in zip(triples, prods)]

    def osel(self, bit: Ciphertext, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        return self.osel_many([(bit, a, b)])[0]

    def reveal_many(self, cts: list[Ciphertext], value_class: str) -> list[int]:
        """Jointly decrypt protocol-public values; both servers learn them."""
        if value_class not in REVEALABLE:
            raise RevealRefused(f"value class {value_class!r} may not be revealed")
        items = [[ct.c1, self._partial(ct)] for ct in cts]
        reply = self._exchange(
            ProtocolId.REVEAL, {"class": value_class, "items": wire_ints(items)}, len(items)
        )
        values = unwire_ints(reply["values"])
        if len(values) != len(cts):
            raise ProtocolError("REVEAL reply has the wrong item count")
        return values

    def reveal_to_servers(self, ct: Ciphertext, value_class: str) -> int:
        return self.reveal_many([ct], value_class)[0]
