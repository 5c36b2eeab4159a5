"""Paillier cryptosystem over Z_n with additive-homomorphic operators.

Keys and ciphertexts are immutable. Every function that needs randomness
takes an ``rng`` (any :class:`random.Random`); the default is the operating
system CSPRNG, and a seeded ``random.Random`` gives reproducible vectors.

Two decryption routes are provided. :func:`decrypt` uses the prime factors
(per-prime exponentiation recombined by CRT) and is what the protocols use;
:func:`decrypt_textbook` evaluates ``L(c^lambda mod n^2) * mu mod n``
directly and serves as its independent check.
"""

from __future__ import annotations

import math
import random
import secrets
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import _backend as B
from .errors import (
    DomainError,
    InvariantViolationError,
    KeyGenerationError,
    MalformedCiphertextError,
    PayloadFormatError,
)

__all__ = [
    "PublicKey",
    "SecretKey",
    "Ciphertext",
    "keygen",
    "encrypt",
    "decrypt",
    "decrypt_textbook",
    "decrypt_reduced_mod_n_squared",
    "hom_add",
    "hom_scale",
    "hom_linear",
    "is_probable_prime",
    "MILLER_RABIN_ROUNDS",
]

# 4^-40 = 2^-80 bound on accepting a composite
MILLER_RABIN_ROUNDS = 40

_SYSTEM_RNG = secrets.SystemRandom()

_SMALL_PRIMES = [p for p in range(3, 2000, 2) if all(p % d for d in range(3, int(p**0.5) + 1, 2))]


def _L(u, n):
    return (u - 1) // n


def _pack_ints(*values) -> bytes:
    out = bytearray()
    for v in values:
        v = int(v)
        raw = v.to_bytes(max(1, (v.bit_length() + 7) // 8), "big")
        out += struct.pack(">I", len(raw)) + raw
    return bytes(out)


def _unpack_ints(data: bytes, count: int) -> list[int]:
    values, pos = [], 0
    for _ in range(count):
        if pos + 4 > len(data):
            raise PayloadFormatError("truncated integer length prefix")
        (size,) = struct.unpack_from(">I", data, pos)
        pos += 4
        if pos + size > len(data):
            raise PayloadFormatError("truncated integer body")
        values.append(int.from_bytes(data[pos : pos + size], "big"))
        pos += size
    if pos != len(data):
        raise PayloadFormatError("trailing bytes after key material")
    return values


@dataclass(frozen=True)
class PublicKey:
    n: int
    g: int
    n_sq: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n, g = B.mpz(self.n), B.mpz(self.g)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "n_sq", n * n)

    @property
    def bits(self) -> int:
        return int(self.n).bit_length()

    @property
    def ciphertext_width(self) -> int:
        """Bytes needed for one ciphertext in the fixed-width wire form."""
        return (int(self.n_sq).bit_length() + 7) // 8

    @property
    def plaintext_width(self) -> int:
        return (int(self.n).bit_length() + 7) // 8

    def to_bytes(self) -> bytes:
        return _pack_ints(self.n, self.g)

    @classmethod
    def from_bytes(cls, data: bytes) -> "PublicKey":
        n, g = _unpack_ints(data, 2)
        return cls(n, g)

    def to_json(self) -> dict:
        return {"n": format(int(self.n), "x"), "g": format(int(self.g), "x")}

    @classmethod
    def from_json(cls, obj: dict) -> "PublicKey":
        return cls(int(obj["n"], 16), int(obj["g"], 16))


@dataclass(frozen=True)
class SecretKey:
    """Carmichael exponent ``lam`` and the fixed decryption factor ``mu``.

    ``p`` and ``q`` are kept for the CRT fast paths. The ``_``-prefixed
    fields are derived and excluded from equality.
    """

    public_key: PublicKey
    lam: int
    mu: int
    p: int
    q: int
    _p_sq: int = field(init=False, repr=False, compare=False)
    _q_sq: int = field(init=False, repr=False, compare=False)
    _hp: int = field(init=False, repr=False, compare=False)
    _hq: int = field(init=False, repr=False, compare=False)
    _q_inv_p: int = field(init=False, repr=False, compare=False)
    _p_sq_inv_q_sq: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        p, q = B.mpz(self.p), B.mpz(self.q)
        for name, value in (("lam", self.lam), ("mu", self.mu), ("p", p), ("q", q)):
            object.__setattr__(self, name, B.mpz(value))
        g = self.public_key.g
        p_sq, q_sq = p * p, q * q
        object.__setattr__(self, "_p_sq", p_sq)
        object.__setattr__(self, "_q_sq", q_sq)
        try:
            object.__setattr__(self, "_hp", B.invert(_L(B.powmod(g, p - 1, p_sq), p), p))
            object.__setattr__(self, "_hq", B.invert(_L(B.powmod(g, q - 1, q_sq), q), q))
            object.__setattr__(self, "_q_inv_p", B.invert(q, p))
            object.__setattr__(self, "_p_sq_inv_q_sq", B.invert(p_sq, q_sq))
        except ValueError as exc:
            raise KeyGenerationError(f"inconsistent secret key: {exc}") from None

    def nth_power(self, r):
        """Return ``r^n mod n^2`` using the factorisation.

        ``r^p mod p^2`` depends only on ``r mod p``, so ``r^n mod p^2`` equals
        ``((r mod p)^q mod p)^p mod p^2``; likewise for q, then CRT.
        """
        p, q = self.p, self.q
        a = B.powmod(B.powmod(r % p, q, p), p, self._p_sq)
        b = B.powmod(B.powmod(r % q, p, q), q, self._q_sq)
        return self._crt_sq(a, b)

    def random_nth_power(self, rng: random.Random):
        """A uniformly random n-th residue mod n^2, without ever forming r.

        ``x -> x^q`` permutes Z_p^* (gcd(q, p - 1) = 1), so drawing the unit
        mod p directly and raising it to p gives the same distribution as
        ``r^n`` for uniform r, one exponentiation cheaper per prime.
        """
        p, q = self.p, self.q
        a = B.powmod(B.mpz(rng.randrange(1, int(p))), p, self._p_sq)
        b = B.powmod(B.mpz(rng.randrange(1, int(q))), q, self._q_sq)
        return self._crt_sq(a, b)

    def _crt_sq(self, a, b):
        return a + self._p_sq * ((b - a) * self._p_sq_inv_q_sq % self._q_sq)

    def to_bytes(self) -> bytes:
        return self.public_key.to_bytes() + _pack_ints(self.p, self.q)

    @classmethod
    def from_bytes(cls, data: bytes) -> "SecretKey":
        n, g, p, q = _unpack_ints(data, 4)
        if p * q != n:
            raise PayloadFormatError("secret key factors do not match the modulus")
        return _derive_secret(PublicKey(n, g), p, q)

    def to_json(self) -> dict:
        return {
            **self.public_key.to_json(),
            "p": format(int(self.p), "x"),
            "q": format(int(self.q), "x"),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SecretKey":
        pk = PublicKey.from_json(obj)
        p, q = int(obj["p"], 16), int(obj["q"], 16)
        if p * q != pk.n:
            raise PayloadFormatError("secret key factors do not match the modulus")
        return _derive_secret(pk, p, q)


@dataclass(frozen=True)
class Ciphertext:
    value: int

    def __post_init__(self):
        object.__setattr__(self, "value", B.mpz(self.value))

    def to_bytes(self, pk: PublicKey) -> bytes:
        return int(self.value).to_bytes(pk.ciphertext_width, "big")

    @classmethod
    def from_bytes(cls, pk: PublicKey, data: bytes) -> "Ciphertext":
        if len(data) != pk.ciphertext_width:
            raise PayloadFormatError(
                f"ciphertext must be {pk.ciphertext_width} bytes, got {len(data)}"
            )
        c = cls(int.from_bytes(data, "big"))
        _check_ciphertext(pk, c)
        return c

    def to_hex(self) -> str:
        return format(int(self.value), "x")


# -- primes and keys ---------------------------------------------------------


def is_probable_prime(n: int, rng: random.Random | None = None, rounds: int = MILLER_RABIN_ROUNDS) -> bool:
    """Miller-Rabin with random bases after trial division by small primes."""
    n = int(n)
    if n < 2:
        return False
    if n in (2, 3):
        return True
    if n % 2 == 0:
        return False
    for sp in _SMALL_PRIMES:
        if n == sp:
            return True
        if n % sp == 0:
            return False
    rng = rng or _SYSTEM_RNG
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    nm = B.mpz(n)
    for _ in range(rounds):
        x = B.powmod(B.mpz(rng.randrange(2, n - 1)), d, nm)
        if x == 1 or x == nm - 1:
            continue
        for _ in range(s - 1):
            x = x * x % nm
            if x == nm - 1:
                break
        else:
            return False
    return True


def _random_prime(bits: int, rng: random.Random, attempts: int) -> int:
    # top two bits set so that the product of two such primes has exactly 2*bits bits
    top = (1 << (bits - 1)) | (1 << (bits - 2))
    for _ in range(attempts):
        candidate = rng.getrandbits(bits) | top | 1
        if is_probable_prime(candidate, rng):
            return candidate
    raise KeyGenerationError(f"no {bits}-bit prime found in {attempts} candidates")


def _order_factor(pk: PublicKey, lam):
    """Return mu = L(g^lam mod n^2)^-1 mod n, or None if g is unusable."""
    if B.gcd(pk.g, pk.n_sq) != 1:
        return None
    u = B.powmod(pk.g, lam, pk.n_sq)
    if (u - 1) % pk.n:
        return None
    try:
        return B.invert(_L(u, pk.n), pk.n)
    except ValueError:
        return None


def _derive_secret(pk: PublicKey, p: int, q: int) -> SecretKey:
    lam = B.mpz((p - 1) * (q - 1) // math.gcd(p - 1, q - 1))
    mu = _order_factor(pk, lam)
    if mu is None:
        raise KeyGenerationError("n does not divide the order of g modulo n^2")
    return SecretKey(pk, lam, mu, p, q)


def keygen(
    bit_length: int | None = None,
    rng: random.Random | None = None,
    *,
    primes: tuple[int, int] | None = None,
    g: int | None = None,
    random_g: bool = False,
    max_attempts: int | None = None,
) -> tuple[PublicKey, SecretKey]:
    """Generate a Paillier key pair.

    ``primes`` pins (p, q) for reproducible test vectors; ``g`` pins the
    generator. Otherwise g = n + 1, or a random valid g when ``random_g``.
    """
    rng = rng or _SYSTEM_RNG
    if primes is not None:
        p, q = (int(x) for x in primes)
        if p == q or not (is_probable_prime(p, rng) and is_probable_prime(q, rng)):
            raise KeyGenerationError("pinned factors must be two distinct primes")
        if bit_length is not None and (p * q).bit_length() != bit_length:
            raise KeyGenerationError(
                f"pinned factors give a {(p * q).bit_length()}-bit modulus, not {bit_length}"
            )
    else:
        if bit_length is None or bit_length < 16:
            raise DomainError("bit_length must be at least 16")
        half = bit_length // 2
        attempts = max_attempts or 100 * half
        while True:
            p = _random_prime(bit_length - half, rng, attempts)
            q = _random_prime(half, rng, attempts)
            n = p * q
            if p != q and n.bit_length() == bit_length and math.gcd(n, (p - 1) * (q - 1)) == 1:
                break
    n = p * q
    if math.gcd(n, (p - 1) * (q - 1)) != 1:
        raise KeyGenerationError("gcd(n, phi(n)) != 1; choose different primes")

    if g is not None:
        pk = PublicKey(n, g)
        return pk, _derive_secret(pk, p, q)
    if not random_g:
        pk = PublicKey(n, n + 1)
        return pk, _derive_secret(pk, p, q)
    n_sq = n * n
    for _ in range(max_attempts or 1000):
        pk = PublicKey(n, rng.randrange(2, n_sq))
        try:
            return pk, _derive_secret(pk, p, q)
        except KeyGenerationError:
            continue
    raise KeyGenerationError("no valid random generator found")


# -- encryption --------------------------------------------------------------


def _check_ciphertext(pk: PublicKey, c: Ciphertext) -> None:
    if not 0 < c.value < pk.n_sq:
        raise MalformedCiphertextError("ciphertext outside (0, n^2)")
    if B.gcd(c.value, pk.n) != 1:
        raise MalformedCiphertextError("ciphertext is not a unit modulo n^2")


def _sample_unit(n, rng: random.Random):
    while True:
        r = rng.randrange(1, int(n))
        if math.gcd(r, int(n)) == 1:
            return B.mpz(r)


def encrypt(
    pk: PublicKey,
    m: int,
    rng: random.Random | None = None,
    *,
    r: int | None = None,
    sk: SecretKey | None = None,
) -> Ciphertext:
    """Return ``g^m * r^n mod n^2`` for a fresh unit r.

    ``r`` is a test hook fixing the randomness. Passing the matching ``sk``
    computes ``r^n`` through the factorisation; the result is identical.
    """
    if not 0 <= m < pk.n:
        raise DomainError(f"plaintext must lie in [0, n); got {m}")
    if sk is not None and sk.public_key.n != pk.n:
        raise DomainError("secret key does not match public key")
    if r is not None:
        r = B.mpz(r)
        if not 0 < r < pk.n or B.gcd(r, pk.n) != 1:
            raise DomainError("r must be a unit modulo n")
    n, n_sq = pk.n, pk.n_sq
    if pk.g == n + 1:
        gm = (1 + B.mpz(m) * n) % n_sq
    else:
        gm = B.powmod(pk.g, B.mpz(m), n_sq)
    if sk is None:
        r = _sample_unit(n, rng or _SYSTEM_RNG) if r is None else r
        rn = B.powmod(r, n, n_sq)
    elif r is None:
        rn = sk.random_nth_power(rng or _SYSTEM_RNG)
    else:
        rn = sk.nth_power(r)
    return Ciphertext(gm * rn % n_sq)


def decrypt(pk: PublicKey, sk: SecretKey, c: Ciphertext) -> int:
    """Recover m from c; evaluated modulo p^2 and q^2 and recombined."""
    _check_ciphertext(pk, c)
    p, q = sk.p, sk.q
    up = B.powmod(c.value % sk._p_sq, p - 1, sk._p_sq)
    uq = B.powmod(c.value % sk._q_sq, q - 1, sk._q_sq)
    if (up - 1) % p or (uq - 1) % q:
        raise MalformedCiphertextError("L is undefined for this ciphertext")
    mp = _L(up, p) * sk._hp % p
    mq = _L(uq, q) * sk._hq % q
    return int(mq + q * ((mp - mq) * sk._q_inv_p % p))


def decrypt_textbook(pk: PublicKey, sk: SecretKey, c: Ciphertext) -> int:
    """``L(c^lam mod n^2) * mu mod n`` with ``L(u) = (u - 1) / n``."""
    _check_ciphertext(pk, c)
    u = B.powmod(c.value, sk.lam, pk.n_sq)
    if (u - 1) % pk.n:
        raise MalformedCiphertextError("c^lambda is not 1 modulo n")
    return int(_L(u, pk.n) * sk.mu % pk.n)


def decrypt_reduced_mod_n_squared(pk: PublicKey, sk: SecretKey, c: Ciphertext) -> int:
    """Deliberately wrong variant: divide and reduce modulo n^2 instead of n.

    Exists only to show that the final reduction matters.
    """
    _check_ciphertext(pk, c)
    numerator = _L(B.powmod(c.value, sk.lam, pk.n_sq), pk.n)
    denominator = _L(B.powmod(pk.g, sk.lam, pk.n_sq), pk.n)
    return int(numerator * B.invert(denominator, pk.n_sq) % pk.n_sq)


# -- homomorphic operators ---------------------------------------------------


def hom_add(pk: PublicKey, a: Ciphertext, b: Ciphertext) -> Ciphertext:
    return Ciphertext(a.value * b.value % pk.n_sq)


def _inverse(pk: PublicKey, value):
    try:
        return B.invert(value, pk.n_sq)
    except ValueError:
        raise InvariantViolationError(
            "ciphertext is not invertible modulo n^2 (it shares a factor with n)"
        ) from None


def hom_scale(pk: PublicKey, c: Ciphertext, k: int) -> Ciphertext:
    """Ciphertext of ``k * m mod n``; negative k goes through the inverse."""
    if k < 0:
        return Ciphertext(B.powmod(_inverse(pk, c.value), B.mpz(-k), pk.n_sq))
    return Ciphertext(B.powmod(c.value, B.mpz(k), pk.n_sq))


def hom_linear(pk: PublicKey, cts: Sequence[Ciphertext], weights: Iterable[int]) -> Ciphertext:
    """Ciphertext of ``sum(w_i * m_i) mod n`` for signed integer weights.

    Negative-weight terms are multiplied together first and inverted once,
    so the whole combination costs one inversion at most.
    """
    weights = list(weights)
    if len(weights) != len(cts):
        raise DomainError("weights and ciphertexts differ in length")
    n_sq = pk.n_sq
    pos = neg = B.mpz(1)
    for c, w in zip(cts, weights):
        if w > 0:
            pos = pos * B.powmod(c.value, B.mpz(w), n_sq) % n_sq
        elif w < 0:
            neg = neg * B.powmod(c.value, B.mpz(-w), n_sq) % n_sq
    if neg != 1:
        pos = pos * _inverse(pk, neg) % n_sq
    return Ciphertext(pos)
