"""Symmetric authenticated encryption for images and revised-scheme features.

Envelopes are AES-256-GCM: ``nonce (12) || ciphertext || tag (16)`` on the
wire. Nonces are drawn at random per message, so a single key should not
seal more than 2^32 envelopes.
"""

from __future__ import annotations

import random
import secrets
import struct
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .encoding import EncodedVector
from .errors import PayloadFormatError, TamperError

KEY_BYTES = 32
NONCE_BYTES = 12
TAG_BYTES = 16

_SYSTEM_RNG = secrets.SystemRandom()

# dimension, scale, residue width in bytes
_FEATURE_HEADER = struct.Struct(">IQH")


@dataclass(frozen=True)
class SymKey:
    key_bytes: bytes

    def __post_init__(self):
        if len(self.key_bytes) != KEY_BYTES:
            raise ValueError(f"symmetric key must be {KEY_BYTES} bytes")

    def __repr__(self) -> str:
        return "SymKey(<redacted>)"

    @classmethod
    def generate(cls, rng: random.Random | None = None) -> "SymKey":
        return cls((rng or _SYSTEM_RNG).randbytes(KEY_BYTES))


@dataclass(frozen=True)
class Envelope:
    nonce: bytes
    ciphertext_and_tag: bytes

    def to_bytes(self) -> bytes:
        return self.nonce + self.ciphertext_and_tag

    @classmethod
    def from_bytes(cls, data: bytes) -> "Envelope":
        if len(data) < NONCE_BYTES + TAG_BYTES:
            raise PayloadFormatError("envelope shorter than nonce and tag")
        return cls(bytes(data[:NONCE_BYTES]), bytes(data[NONCE_BYTES:]))

    def __len__(self) -> int:
        return NONCE_BYTES + len(self.ciphertext_and_tag)


def sym_encrypt(k: SymKey, plaintext: bytes, rng: random.Random | None = None) -> Envelope:
    nonce = (rng or _SYSTEM_RNG).randbytes(NONCE_BYTES)
    return Envelope(nonce, AESGCM(k.key_bytes).encrypt(nonce, bytes(plaintext), None))


def sym_decrypt(k: SymKey, e: Envelope) -> bytes:
    try:
        return AESGCM(k.key_bytes).decrypt(e.nonce, e.ciphertext_and_tag, None)
    except InvalidTag:
        raise TamperError("envelope failed authentication") from None


def encode_feature_payload(v: EncodedVector) -> bytes:
    """Header (t, S, w, n as w bytes) followed by t residues of w bytes each."""
    width = (int(v.modulus).bit_length() + 7) // 8
    if v.scale >= 1 << 64:
        raise PayloadFormatError("scale does not fit the 64-bit header field")
    parts = [_FEATURE_HEADER.pack(v.dim, v.scale, width), int(v.modulus).to_bytes(width, "big")]
    parts.extend(int(z).to_bytes(width, "big") for z in v.residues)
    return b"".join(parts)


def feature_payload_size(t: int, n: int) -> int:
    width = (int(n).bit_length() + 7) // 8
    return _FEATURE_HEADER.size + width + t * width


def decode_feature_payload(b: bytes) -> EncodedVector:
    if len(b) < _FEATURE_HEADER.size:
        raise PayloadFormatError("feature payload shorter than its header")
    t, scale, width = _FEATURE_HEADER.unpack_from(b)
    if t < 1:
        raise PayloadFormatError("feature payload declares zero components")
    if width < 1 or scale < 1:
        raise PayloadFormatError("feature payload has a zero width or scale")
    expected = _FEATURE_HEADER.size + width * (t + 1)
    if len(b) != expected:
        raise PayloadFormatError(f"feature payload is {len(b)} bytes, expected {expected}")
    pos = _FEATURE_HEADER.size
    n = int.from_bytes(b[pos : pos + width], "big")
    if n < 2 or (n.bit_length() + 7) // 8 != width:
        raise PayloadFormatError("modulus inconsistent with declared width")
    pos += width
    residues = []
    for _ in range(t):
        z = int.from_bytes(b[pos : pos + width], "big")
        if z >= n:
            raise PayloadFormatError("residue not reduced modulo n")
        residues.append(z)
        pos += width
    return EncodedVector(tuple(residues), scale, n)
