import random

import pytest

from hesearch.encoding import EncodedVector, encode_vector
from hesearch.envelope import (
    NONCE_BYTES,
    TAG_BYTES,
    Envelope,
    SymKey,
    decode_feature_payload,
    encode_feature_payload,
    feature_payload_size,
    sym_decrypt,
    sym_encrypt,
)
from hesearch.errors import PayloadFormatError, TamperError


@pytest.fixture
def key():
    return SymKey.generate(random.Random(1))


def test_empty_roundtrip(key):
    env = sym_encrypt(key, b"")
    assert len(env.to_bytes()) == NONCE_BYTES + TAG_BYTES
    assert sym_decrypt(key, env) == b""


def test_nonces_differ(key):
    a, b = sym_encrypt(key, b"same"), sym_encrypt(key, b"same")
    assert a.nonce != b.nonce
    assert a != b


def test_mebibyte_payload(key):
    payload = random.Random(2).randbytes(1 << 20)
    env = Envelope.from_bytes(sym_encrypt(key, payload).to_bytes())
    assert sym_decrypt(key, env) == payload


def test_every_single_bit_flip_is_detected(key):
    env = sym_encrypt(key, b"pseudo-image bytes")
    body = bytearray(env.ciphertext_and_tag)
    for pos in range(len(body) * 8):
        flipped = bytearray(body)
        flipped[pos // 8] ^= 1 << (pos % 8)
        with pytest.raises(TamperError):
            sym_decrypt(key, Envelope(env.nonce, bytes(flipped)))


def test_wrong_key(key):
    env = sym_encrypt(key, b"x")
    with pytest.raises(TamperError):
        sym_decrypt(SymKey.generate(), env)


def test_key_contract():
    with pytest.raises(ValueError):
        SymKey(b"short")
    assert "redacted" in repr(SymKey(bytes(32)))


def test_envelope_too_short():
    with pytest.raises(PayloadFormatError):
        Envelope.from_bytes(b"\0" * (NONCE_BYTES + TAG_BYTES - 1))


def test_feature_payload_roundtrip_random():
    r = random.Random(3)
    for _ in range(50):
        n = r.getrandbits(r.randrange(8, 300)) | 3
        t = r.randrange(1, 40)
        v = EncodedVector(tuple(r.randrange(n) for _ in range(t)), r.randrange(1, 10**6), n)
        raw = encode_feature_payload(v)
        assert len(raw) == feature_payload_size(t, n)
        assert decode_feature_payload(raw) == v


def test_feature_payload_size_formula():
    v = encode_vector((0.1, 0.2, 0.3), 100, 2**1024 + 643)
    width = 129
    assert len(encode_feature_payload(v)) == 14 + width + 3 * width


def test_feature_payload_errors():
    v = encode_vector((1.0, 2.0), 10, 1009)
    raw = encode_feature_payload(v)
    with pytest.raises(PayloadFormatError):
        decode_feature_payload(raw[:-1])
    with pytest.raises(PayloadFormatError):
        decode_feature_payload(raw[:5])
    zero_dim = b"\0\0\0\0" + raw[4:14] + raw[14:16]
    with pytest.raises(PayloadFormatError):
        decode_feature_payload(zero_dim)
    unreduced = raw[:16] + (1009).to_bytes(2, "big") + raw[18:]
    with pytest.raises(PayloadFormatError):
        decode_feature_payload(unreduced)


def test_symmetric_cost_independent_of_key_size(key):
    """The sealed feature payload grows with n; the envelope overhead does not."""
    small = encode_feature_payload(encode_vector((0.5,) * 8, 100, 2**255 - 19))
    large = encode_feature_payload(encode_vector((0.5,) * 8, 100, 2**2047 + 9))
    for payload in (small, large):
        env = sym_encrypt(key, payload)
        assert len(env.to_bytes()) - len(payload) == NONCE_BYTES + TAG_BYTES
