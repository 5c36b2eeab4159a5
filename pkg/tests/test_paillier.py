import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hesearch import paillier as P
from hesearch.errors import (
    DomainError,
    InvariantViolationError,
    KeyGenerationError,
    MalformedCiphertextError,
    PayloadFormatError,
)

N35_UNITS = [r for r in range(1, 35) if math.gcd(r, 35) == 1]


def brute_force_table(pk):
    """Map every ciphertext of the n=35 key back to its plaintext by
    enumerating all (m, r) pairs with plain integer pow."""
    n, n_sq, g = int(pk.n), int(pk.n_sq), int(pk.g)
    table = {}
    for m in range(n):
        for r in N35_UNITS:
            c = pow(g, m, n_sq) * pow(r, n, n_sq) % n_sq
            assert table.setdefault(c, m) == m
    return table


@pytest.fixture(scope="module")
def oracle(tiny_key):
    return brute_force_table(tiny_key[0])


def test_tiny_key_parameters(tiny_key):
    pk, sk = tiny_key
    assert (pk.n, pk.g, pk.n_sq) == (35, 36, 1225)
    assert sk.lam == 12
    assert sk.mu * 12 % 35 == 1


def test_g36_order_condition_by_hand():
    # 36^12 = (1 + 35)^12 = 1 + 12*35 = 421 (mod 1225), L = 12, 12 * 3 = 36 = 1 (mod 35)
    assert pow(36, 12, 1225) == 421
    assert (421 - 1) // 35 == 12
    pk, sk = P.keygen(primes=(5, 7), g=36)
    assert sk.mu == 3


def test_keygen_bit_length_and_distinct_primes():
    pk, sk = P.keygen(1024)
    assert pk.n.bit_length() == 1024
    assert sk.p != sk.q and sk.p * sk.q == pk.n
    assert sk.p.bit_length() == sk.q.bit_length() == 512
    assert math.lcm(int(sk.p) - 1, int(sk.q) - 1) == sk.lam
    assert pk.g == pk.n + 1


def test_keygen_is_reproducible_with_seeded_rng():
    a = P.keygen(128, random.Random(3))
    b = P.keygen(128, random.Random(3))
    assert a == b


@pytest.mark.parametrize("bits", [16, 17, 64, 255])
def test_keygen_small_and_odd_lengths(bits):
    pk, sk = P.keygen(bits, random.Random(bits))
    assert pk.n.bit_length() == bits
    m = int(pk.n) // 3
    assert P.decrypt(pk, sk, P.encrypt(pk, m, random.Random(1))) == m


def test_keygen_rejects_bad_inputs():
    with pytest.raises(DomainError):
        P.keygen(8)
    with pytest.raises(KeyGenerationError):
        P.keygen(primes=(5, 5))
    with pytest.raises(KeyGenerationError):
        P.keygen(primes=(5, 9))
    with pytest.raises(KeyGenerationError):
        P.keygen(20, primes=(5, 7))
    # gcd(n, phi(n)) = 3 for (3, 7)
    with pytest.raises(KeyGenerationError):
        P.keygen(primes=(3, 7))
    # g = 1 has order 1, which n does not divide
    with pytest.raises(KeyGenerationError):
        P.keygen(primes=(5, 7), g=1)


def test_random_generator_path(tiny_key):
    r = random.Random(11)
    pk, sk = P.keygen(primes=(5, 7), random_g=True, rng=r)
    assert pk.g != 36
    table = brute_force_table(pk)
    for m in range(35):
        c = P.encrypt(pk, m, r)
        assert table[int(c.value)] == m
        assert P.decrypt(pk, sk, c) == P.decrypt_textbook(pk, sk, c) == m


def test_prime_generation_failure_is_reported():
    class Even(random.Random):
        def getrandbits(self, k):
            return 0

    # every candidate is 2^(b-1) + 2^(b-2) + 1; for 16-bit halves that's 49153 = 13 * 3781
    with pytest.raises(KeyGenerationError):
        P.keygen(32, Even(), max_attempts=5)


def test_is_probable_prime_against_trial_division():
    def slow(n):
        return n >= 2 and all(n % d for d in range(2, math.isqrt(n) + 1))

    for n in range(0, 5000):
        assert P.is_probable_prime(n) == slow(n), n
    # Carmichael numbers
    for n in (561, 41041, 825265, 321197185):
        assert not P.is_probable_prime(n)
    assert P.is_probable_prime(2**127 - 1)
    assert not P.is_probable_prime((2**61 - 1) * (2**89 - 1))


def test_encrypt_zero_with_unit_randomness_is_one(tiny_key):
    pk, _ = tiny_key
    assert P.encrypt(pk, 0, r=1).value == 1


def test_decrypt_of_one_is_zero(tiny_key):
    pk, sk = tiny_key
    assert P.decrypt(pk, sk, P.Ciphertext(1)) == 0
    assert P.decrypt_textbook(pk, sk, P.Ciphertext(1)) == 0


def test_exhaustive_roundtrip_against_brute_force(tiny_key, oracle):
    pk, sk = tiny_key
    for m in range(35):
        for r in N35_UNITS:
            c = P.encrypt(pk, m, r=r)
            assert oracle[int(c.value)] == m
            assert P.decrypt(pk, sk, c) == m
            assert P.decrypt_textbook(pk, sk, c) == m
            assert P.encrypt(pk, m, r=r, sk=sk) == c


def test_same_plaintext_two_randomizers(tiny_key, oracle):
    pk, sk = tiny_key
    a, b = P.encrypt(pk, 3, r=2), P.encrypt(pk, 3, r=4)
    assert a != b
    assert oracle[int(a.value)] == oracle[int(b.value)] == 3
    assert P.decrypt(pk, sk, a) == P.decrypt(pk, sk, b) == 3


def test_encrypt_domain_errors(tiny_key):
    pk, _ = tiny_key
    for m in (-1, 35, 100):
        with pytest.raises(DomainError):
            P.encrypt(pk, m)
    for r in (0, 5, 7, 35):
        with pytest.raises(DomainError):
            P.encrypt(pk, 1, r=r)


def test_secret_key_mismatch_rejected(tiny_key, key256):
    with pytest.raises(DomainError):
        P.encrypt(tiny_key[0], 1, sk=key256[1])


def test_malformed_ciphertexts(tiny_key):
    pk, sk = tiny_key
    for bad in (0, 1225, 5, 14, 1300):
        with pytest.raises(MalformedCiphertextError):
            P.decrypt(pk, sk, P.Ciphertext(bad))
        with pytest.raises(MalformedCiphertextError):
            P.decrypt_textbook(pk, sk, P.Ciphertext(bad))


def test_mod_n_squared_reduction_has_witness(tiny_key):
    pk, sk = tiny_key
    witnesses = [
        m for m in range(35) if P.decrypt_reduced_mod_n_squared(pk, sk, P.encrypt(pk, m, r=1)) != m
    ]
    assert witnesses
    # 3 * 12 = 36 wraps mod 35: L = 1, 1 / 12 mod 1225 = 1123
    assert 3 in witnesses
    assert P.decrypt_reduced_mod_n_squared(pk, sk, P.encrypt(pk, 3, r=1)) == 1123


@pytest.mark.parametrize("a,b,expected", [(3, 4, 7), (30, 10, 5), (34, 1, 0), (0, 0, 0)])
def test_hom_add_small(tiny_key, a, b, expected):
    pk, sk = tiny_key
    assert (a + b) % 35 == expected
    c = P.hom_add(pk, P.encrypt(pk, a, r=2), P.encrypt(pk, b, r=3))
    assert P.decrypt(pk, sk, c) == expected


def test_hom_add_identity(tiny_key):
    pk, sk = tiny_key
    c = P.encrypt(pk, 17, r=4)
    zero = P.encrypt(pk, 0, r=1)
    assert P.decrypt(pk, sk, P.hom_add(pk, c, zero)) == 17
    assert P.hom_add(pk, c, zero) == c


@pytest.mark.parametrize("m,k,expected", [(5, -2, 25), (3, 4, 12), (9, 0, 0), (1, -1, 34)])
def test_hom_scale_small(tiny_key, m, k, expected):
    pk, sk = tiny_key
    assert (k * m) % 35 == expected
    assert P.decrypt(pk, sk, P.hom_scale(pk, P.encrypt(pk, m, r=6), k)) == expected


def test_hom_scale_identity(tiny_key):
    pk, _ = tiny_key
    c = P.encrypt(pk, 8, r=9)
    assert P.hom_scale(pk, c, 1) == c


def test_hom_scale_non_unit_raises(tiny_key):
    pk, _ = tiny_key
    with pytest.raises(InvariantViolationError):
        P.hom_scale(pk, P.Ciphertext(5), -1)


def test_scaling_exhaustive_small_key(tiny_key):
    pk, sk = tiny_key
    for m in range(35):
        c = P.encrypt(pk, m, r=2)
        for k in range(-100, 101):
            assert P.decrypt(pk, sk, P.hom_scale(pk, c, k)) == (k * m) % 35


def test_hom_linear_matches_plain_combination(key256):
    pk, sk = key256
    r = random.Random(5)
    ms = [r.randrange(10**6) for _ in range(9)]
    ws = [r.randrange(-500, 500) for _ in range(9)]
    cts = [P.encrypt(pk, m, r) for m in ms]
    out = P.hom_linear(pk, cts, ws)
    assert P.decrypt(pk, sk, out) == sum(w * m for w, m in zip(ws, ms)) % pk.n
    with pytest.raises(DomainError):
        P.hom_linear(pk, cts, ws[:-1])


@settings(max_examples=200, deadline=None)
@given(m1=st.integers(min_value=0), m2=st.integers(min_value=0), k=st.integers(-100, 100))
def test_homomorphic_properties_random(key256, m1, m2, k):
    pk, sk = key256
    m1, m2 = m1 % pk.n, m2 % pk.n
    c1, c2 = P.encrypt(pk, m1), P.encrypt(pk, m2, sk=sk)
    assert P.decrypt(pk, sk, c1) == m1
    assert P.decrypt_textbook(pk, sk, c2) == m2
    assert P.decrypt(pk, sk, P.hom_add(pk, c1, c2)) == (m1 + m2) % pk.n
    assert P.decrypt(pk, sk, P.hom_scale(pk, c1, k)) == (k * m1) % pk.n


def test_randomization_at_1024_bits(key1024):
    pk, sk = key1024
    values = {P.encrypt(pk, 42, sk=sk).value for _ in range(100)}
    assert len(values) >= 99


def test_crt_and_textbook_agree_at_1024_bits(key1024):
    pk, sk = key1024
    r = random.Random(9)
    for _ in range(20):
        m = r.randrange(int(pk.n))
        c = P.encrypt(pk, m, r)
        assert P.decrypt(pk, sk, c) == P.decrypt_textbook(pk, sk, c) == m
        rr = r.randrange(1, int(pk.n))
        assert P.encrypt(pk, m, r=rr) == P.encrypt(pk, m, r=rr, sk=sk)


def test_key_and_ciphertext_serialization(key256):
    pk, sk = key256
    assert P.PublicKey.from_bytes(pk.to_bytes()) == pk
    assert P.PublicKey.from_json(pk.to_json()) == pk
    assert P.SecretKey.from_bytes(sk.to_bytes()) == sk
    assert P.SecretKey.from_json(sk.to_json()) == sk
    c = P.encrypt(pk, 1234)
    raw = c.to_bytes(pk)
    assert len(raw) == pk.ciphertext_width == 64
    assert P.Ciphertext.from_bytes(pk, raw) == c
    assert int(c.to_hex(), 16) == c.value
    with pytest.raises(PayloadFormatError):
        P.Ciphertext.from_bytes(pk, raw[:-1])
    with pytest.raises(PayloadFormatError):
        P.PublicKey.from_bytes(pk.to_bytes()[:-1])
    with pytest.raises(PayloadFormatError):
        P.PublicKey.from_bytes(pk.to_bytes() + b"\0")
    with pytest.raises(MalformedCiphertextError):
        P.Ciphertext.from_bytes(pk, b"\0" * pk.ciphertext_width)


def test_fresh_nth_power_covers_residues_uniformly(tiny_key):
    from scipy import stats

    pk, sk = tiny_key
    residues = {pow(r, 35, 1225) for r in N35_UNITS}
    rng = random.Random(12)
    counts = {}
    for _ in range(24_000):
        x = int(sk.random_nth_power(rng))
        counts[x] = counts.get(x, 0) + 1
    assert set(counts) == residues
    assert stats.chisquare(list(counts.values())).pvalue > 0.001
