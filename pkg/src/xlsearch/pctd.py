"""Paillier cryptosystem with threshold decryption (PCTD).

A double-trapdoor Paillier variant: every user owns a weak key ``sk`` with
``pk = g^sk mod N^2``, while the strong key ``lambda = lcm(p-1, q-1)``
decrypts ciphertexts under *any* public key.  The strong key is split into
two additive shares so that two servers can jointly decrypt without either
one learning lambda.

Ciphertexts are pairs ``(C1, C2) = (pk^r (1 + mN), g^r) mod N^2``.  Only
``C1`` participates in strong and partial decryption.
"""

from __future__ import annotations

import math
import secrets
from dataclasses import dataclass, replace
from functools import cached_property

import gmpy2

from .errors import (
    DecryptionError,
    KeyMismatchError,
    ParameterError,
    PlaintextRangeError,
)

RECORD_VERSION = 1

_sysrand = secrets.SystemRandom()


def _powmod(base: int, exp: int, mod: int) -> int:
    return int(gmpy2.powmod(base, exp, mod))


def _invert(x: int, mod: int) -> int:
    try:
        return int(gmpy2.invert(x, mod))
    except ZeroDivisionError:
        raise DecryptionError(f"{x} is not invertible mod N^2") from None


# -- canonical integer encoding -------------------------------------------


def int_to_hex(n: int) -> str:
    """Lowercase, big-endian hex with no leading zeros."""
    if n < 0:
        raise ValueError("canonical encoding covers non-negative integers only")
    return format(n, "x")


def hex_to_int(s: str) -> int:
    if not isinstance(s, str) or not s or (len(s) > 1 and s[0] == "0"):
        raise ValueError(f"non-canonical hex integer: {s!r}")
    if s.strip("0123456789abcdef"):
        raise ValueError(f"non-canonical hex integer: {s!r}")
    return int(s, 16)


# -- key material -----------------------------------------------------------


@dataclass(frozen=True)
class PublicParams:
    N: int
    g: int
    bit_length: int

    @cached_property
    def N2(self) -> int:
        return self.N * self.N

    @cached_property
    def half(self) -> int:
        return self.N // 2

    def to_record(self) -> dict:
        return {
            "version": RECORD_VERSION,
            "kind": "params",
            "N": int_to_hex(self.N),
            "g": int_to_hex(self.g),
            "bit_length": self.bit_length,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "PublicParams":
        _check_record(rec, "params")
        return cls(hex_to_int(rec["N"]), hex_to_int(rec["g"]), int(rec["bit_length"]))


@dataclass(frozen=True)
class StrongKey:
    lam: int


@dataclass(frozen=True)
class StrongKeyShares:
    lambda1: int  # held by CP
    lambda2: int  # held by CSP


@dataclass(frozen=True)
class UserKeyPair:
    sk: int
    pk: int

    def to_record(self) -> dict:
        return {
            "version": RECORD_VERSION,
            "kind": "user-key",
            "sk": int_to_hex(self.sk),
            "pk": int_to_hex(self.pk),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "UserKeyPair":
        _check_record(rec, "user-key")
        return cls(hex_to_int(rec["sk"]), hex_to_int(rec["pk"]))


@dataclass(frozen=True)
class JointPublicKey:
    """``pk_sigma = pk_a * pk_b``; its virtual secret is ``sk_a + sk_b``."""

    pk_sigma: int
    components: tuple[int, int]

    @classmethod
    def combine(cls, params: PublicParams, pk_a: int, pk_b: int) -> "JointPublicKey":
        return cls(pk_a * pk_b % params.N2, (pk_a, pk_b))


@dataclass(frozen=True)
class Ciphertext:
    c1: int
    c2: int
    key_tag: int  # the encrypting public key itself

    def to_record(self) -> dict:
        return {
            "c1": int_to_hex(self.c1),
            "c2": int_to_hex(self.c2),
            "key_tag": int_to_hex(self.key_tag),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Ciphertext":
        return cls(hex_to_int(rec["c1"]), hex_to_int(rec["c2"]), hex_to_int(rec["key_tag"]))


def _check_record(rec: dict, kind: str) -> None:
    if rec.get("version") != RECORD_VERSION:
        raise ParameterError(f"unsupported {kind} record version {rec.get('version')!r}")
    if rec.get("kind") != kind:
        raise ParameterError(f"expected a {kind} record, got {rec.get('kind')!r}")


# -- key generation ---------------------------------------------------------


def _random_safe_prime(bits: int, rng, max_attempts: int) -> int:
    for _ in range(max_attempts):
        # top two bits set so that N = pq has exactly 2 * bits bits
        q = rng.getrandbits(bits - 1) | (3 << (bits - 3)) | 1
        # q = 1 mod 3 would put 3 | 2q + 1
        if q % 3 != 2:
            continue
        if gmpy2.is_prime(q, 30) and gmpy2.is_prime(2 * q + 1, 30):
            return 2 * q + 1
    raise ParameterError(f"prime generation timeout after {max_attempts} candidates")


def params_from_primes(p: int, q: int, a: int) -> tuple[PublicParams, StrongKey]:
    """Deterministic construction used for test vectors and by :func:`keygen`."""
    N = p * q
    N2 = N * N
    if p == q or math.gcd(a, N) != 1:
        raise ParameterError("need distinct primes and a in Z*_{N^2}")
    g = (-_powmod(a, 2 * N, N2)) % N2
    lam = math.lcm(p - 1, q - 1)
    if _powmod(g, lam, N2) != 1:
        raise ParameterError("order check g^lambda = 1 mod N^2 failed")
    if math.gcd(lam, N) != 1:
        raise ParameterError("lambda and N share a factor")
    return PublicParams(N, g, max(p.bit_length(), q.bit_length())), StrongKey(lam)


def keygen(
    bit_length: int,
    *,
    primes: tuple[int, int] | None = None,
    a: int | None = None,
    rng=None,
    max_attempts: int = 10_000_000,
) -> tuple[PublicParams, StrongKey]:
    """Generate public parameters and the strong key.

    ``bit_length`` is the size of each prime; N therefore has about twice
    as many bits.  Generated primes are safe primes.  ``primes`` and ``a``
    force the construction (test vectors); otherwise both are sampled.
    """
    rng = rng or _sysrand
    if primes is None:
        if bit_length < 16:
            raise ParameterError("bit_length must be at least 16")
        while True:
            p = _random_safe_prime(bit_length, rng, max_attempts)
            q = _random_safe_prime(bit_length, rng, max_attempts)
            if p != q:
                break
    else:
        p, q = primes
    N2 = (p * q) ** 2
    for _ in range(64):
        base = a if a is not None else rng.randrange(2, N2)
        if math.gcd(base, p * q) != 1:
            if a is not None:
                raise ParameterError("forced a is not a unit mod N^2")
            continue
        params, strong = params_from_primes(p, q, base)
        params = replace(params, bit_length=bit_length)
        # g of order <= 2 hides nothing; tolerated only for forced toy vectors
        if a is None and _powmod(params.g, 2, N2) == 1:
            continue
        return params, strong
    raise ParameterError("could not find a generator with the order property")


def split_strong_key(params: PublicParams, strong_key: StrongKey, rng=None) -> StrongKeyShares:
    """Split lambda into shares whose sum is 0 mod lambda and 1 mod N."""
    rng = rng or _sysrand
    lam, N = strong_key.lam, params.N
    if math.gcd(lam, N) != 1:
        raise ParameterError("lambda and N are not coprime")
    modulus = lam * N
    sigma = lam * pow(lam, -1, N) % modulus  # CRT: 0 mod lambda, 1 mod N
    lambda1 = rng.randrange(1, modulus)
    return StrongKeyShares(lambda1, (sigma - lambda1) % modulus)


def user_keygen(params: PublicParams, rng=None) -> UserKeyPair:
    rng = rng or _sysrand
    sk = rng.randrange(1, params.N // 4 + 1)
    return UserKeyPair(sk, _powmod(params.g, sk, params.N2))


def public_key_for(params: PublicParams, sk: int) -> int:
    return _powmod(params.g, sk, params.N2)


# -- encryption / decryption ------------------------------------------------


def encrypt(params: PublicParams, pk: int, m: int, *, r: int | None = None, rng=None) -> Ciphertext:
    if not 0 <= m < params.N:
        raise PlaintextRangeError(f"plaintext must lie in [0, N), got {m}")
    if r is None:
        r = (rng or _sysrand).randrange(1, params.N // 4 + 1)
    N, N2 = params.N, params.N2
    c1 = _powmod(pk, r, N2) * (1 + m * N) % N2
    return Ciphertext(c1, _powmod(params.g, r, N2), pk)


def _L(x: int, N: int) -> int:
    if (x - 1) % N:
        raise DecryptionError("L-argument is not 1 mod N (wrong key or corrupt ciphertext)")
    return (x - 1) // N


def decrypt_weak(params: PublicParams, sk: int, ct: Ciphertext) -> int:
    N2 = params.N2
    if public_key_for(params, sk) != ct.key_tag:
        raise KeyMismatchError("secret key does not match the ciphertext's public key")
    mask = _powmod(ct.c2, sk, N2)
    return _L(ct.c1 * _invert(mask, N2) % N2, params.N)


def decrypt_strong(params: PublicParams, strong_key: StrongKey, ct: Ciphertext) -> int:
    N = params.N
    x = _powmod(ct.c1, strong_key.lam, params.N2)
    return _L(x, N) * pow(strong_key.lam, -1, N) % N


def partial_decrypt_1(params: PublicParams, lambda1: int, ct: Ciphertext) -> int:
    """First share's contribution ``C1^lambda1 mod N^2``."""
    return _powmod(ct.c1, lambda1, params.N2)


def combine_partials(params: PublicParams, lambda2: int, ct: Ciphertext | int, partial: int) -> int:
    """``C1^lambda2 * partial mod N^2``, which is ``1 + mN`` for matching shares."""
    c1 = ct.c1 if isinstance(ct, Ciphertext) else ct
    return _powmod(c1, lambda2, params.N2) * partial % params.N2


def partial_decrypt_2_combine(
    params: PublicParams, lambda2: int, ct: Ciphertext | int, partial: int
) -> int:
    """Finish a partial decryption; ``ct`` may be the bare ``C1`` value."""
    return _L(combine_partials(params, lambda2, ct, partial), params.N)


def is_l_form(params: PublicParams, x: int) -> bool:
    """True when ``x`` has the shape ``1 + mN`` that only full decryption yields."""
    return (x - 1) % params.N == 0


def decrypt_with_shares(params: PublicParams, shares: StrongKeyShares, ct: Ciphertext) -> int:
    return partial_decrypt_2_combine(
        params, shares.lambda2, ct, partial_decrypt_1(params, shares.lambda1, ct)
    )


# -- homomorphisms ----------------------------------------------------------


def hom_add(params: PublicParams, a: Ciphertext, b: Ciphertext) -> Ciphertext:
    if a.key_tag != b.key_tag:
        raise KeyMismatchError("homomorphic addition needs a common public key")
    N2 = params.N2
    return Ciphertext(a.c1 * b.c1 % N2, a.c2 * b.c2 % N2, a.key_tag)


def hom_scale(params: PublicParams, ct: Ciphertext, c: int) -> Ciphertext:
    """Encryption of ``c * m mod N``; ``c`` is reduced mod N so -1 negates."""
    c %= params.N
    N2 = params.N2
    return Ciphertext(_powmod(ct.c1, c, N2), _powmod(ct.c2, c, N2), ct.key_tag)


def hom_sub(params: PublicParams, a: Ciphertext, b: Ciphertext) -> Ciphertext:
    return hom_add(params, a, hom_scale(params, b, -1))


def hom_add_plain(params: PublicParams, ct: Ciphertext, k: int, rng=None) -> Ciphertext:
    return hom_add(params, ct, encrypt(params, ct.key_tag, k % params.N, rng=rng))


def rerandomize(params: PublicParams, ct: Ciphertext, rng=None) -> Ciphertext:
    return hom_add(params, ct, encrypt(params, ct.key_tag, 0, rng=rng))


# -- signed plaintexts ------------------------------------------------------


def to_signed(raw: int, N: int) -> int:
    """Map ``Z_N`` onto ``(-N/2, N/2)``."""
    if not 0 <= raw < N:
        raise PlaintextRangeError(f"{raw} is not in Z_N")
    return raw if 2 * raw < N else raw - N


def from_signed(x: int, N: int) -> int:
    if 2 * abs(x) >= N:
        raise PlaintextRangeError(f"|{x}| does not fit below N/2")
    return x % N
