"""Client and server for the three image-search schemes.

* ``Scheme.SCHEME1`` stores Paillier-encrypted feature components and ships
  them all back to the client, which decrypts every one of them.
* ``Scheme.SCHEME2`` additionally stores ``chi_i = E(sum f^2)``; the server
  evaluates ``h_i = E(||f - q||^2)`` homomorphically and the client decrypts
  one ciphertext per image, then pads the requested index set with decoys.
* ``Scheme.REVISED`` keeps features under the symmetric envelope and does
  the distance arithmetic on the client in the clear.

All distances are compared in encoded units, ``d^2 <= (S * threshold)^2``,
with exact rational arithmetic, so the matched set is scheme-independent.
"""

from __future__ import annotations

import math
import random
import secrets
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence, Union

from .. import paillier as P
from ..encoding import (
    DEFAULT_SCALE,
    EncodedVector,
    check_distance_bound,
    encode_vector,
    encoded_sq_distance,
)
from ..envelope import (
    Envelope,
    SymKey,
    decode_feature_payload,
    encode_feature_payload,
    sym_decrypt,
    sym_encrypt,
)
from ..errors import ConfigurationError, DomainError, ProtocolError
from .ledger import C2S, CLIENT, S2C, SERVER, CostLedger, RoleCost, SessionTranscript
from .wire import (
    Channel,
    MessageKind,
    Reader,
    Writer,
    decode_index_set,
    encode_index_set,
    parse_frame,
)

_SYSTEM_RNG = secrets.SystemRandom()


class Scheme(str, Enum):
    SCHEME1 = "1"
    SCHEME2 = "2"
    REVISED = "revised"

    @property
    def uses_paillier(self) -> bool:
        return self is not Scheme.REVISED


@dataclass(frozen=True)
class StoredRecord:
    index: int
    enc_features: Union[tuple[P.Ciphertext, ...], Envelope]
    enc_image: Envelope
    chi: P.Ciphertext | None = None


@dataclass(frozen=True)
class MatchSets:
    matched: frozenset[int]
    decoy: frozenset[int] = frozenset()
    padded: frozenset[int] = frozenset()

    def __post_init__(self):
        if not self.matched <= self.padded:
            raise ValueError("matched set must be contained in the padded set")


@dataclass
class UploadResult:
    ledger: CostLedger
    transcript: SessionTranscript


@dataclass
class QueryResult:
    images: dict[int, bytes]
    match: MatchSets
    sq_distances: dict[int, int]
    ledger: CostLedger
    transcript: SessionTranscript


UPLOAD_SHAPE = (C2S, MessageKind.UPLOAD.name)

QUERY_SHAPES: dict[Scheme, list[tuple[str, str]]] = {
    Scheme.SCHEME1: [
        (C2S, MessageKind.FEATURE_REQUEST.name),
        (S2C, MessageKind.FEATURES.name),
        (C2S, MessageKind.INDEX_SET.name),
        (S2C, MessageKind.IMAGES.name),
    ],
    Scheme.SCHEME2: [
        (C2S, MessageKind.QUERY_VECTOR.name),
        (S2C, MessageKind.DISTANCES.name),
        (C2S, MessageKind.INDEX_SET.name),
        (S2C, MessageKind.IMAGES.name),
    ],
    Scheme.REVISED: [
        (C2S, MessageKind.FEATURE_REQUEST.name),
        (S2C, MessageKind.FEATURES.name),
        (C2S, MessageKind.INDEX_SET.name),
        (S2C, MessageKind.IMAGES.name),
    ],
}


def verify_transcript(transcript: SessionTranscript, scheme: Scheme, phase: str = "query", n: int | None = None) -> None:
    """Raise ProtocolError unless the message order matches the scheme."""
    if phase == "query":
        expected = QUERY_SHAPES[Scheme(scheme)]
    elif phase == "upload":
        if n is None:
            raise ValueError("upload transcripts need the record count")
        expected = [UPLOAD_SHAPE] * n
    else:
        raise ValueError(phase)
    got = transcript.shape()
    if got != expected:
        raise ProtocolError(f"transcript {got} does not match {phase} shape {expected}")


# -- server -----------------------------------------------------------------


class Server:
    """Holds the uploaded records; knows only the public key."""

    def __init__(self, scheme: Scheme | str, pk: P.PublicKey | None = None, rng: random.Random | None = None):
        self.scheme = Scheme(scheme)
        if self.scheme.uses_paillier and pk is None:
            raise ConfigurationError(f"scheme {self.scheme.value} server needs the Paillier public key")
        self.pk = pk
        self.rng = rng or _SYSTEM_RNG
        self.records: dict[int, StoredRecord] = {}
        self.dim: int | None = None
        self._awaiting_index_set = False

    def __len__(self) -> int:
        return len(self.records)

    def _read_cts(self, r: Reader, t: int) -> tuple[P.Ciphertext, ...]:
        width = self.pk.ciphertext_width
        return tuple(P.Ciphertext.from_bytes(self.pk, r.raw(width)) for _ in range(t))

    def handle_upload(self, data: bytes) -> None:
        _, payload = parse_frame(data, MessageKind.UPLOAD)
        r = Reader(payload)
        index = r.u32()
        chi = None
        if self.scheme is Scheme.REVISED:
            features = Envelope.from_bytes(r.blob())
        else:
            if self.scheme is Scheme.SCHEME2:
                chi = P.Ciphertext.from_bytes(self.pk, r.raw(self.pk.ciphertext_width))
            t = r.u32()
            if self.dim is not None and t != self.dim:
                raise DomainError(f"record {index} has dimension {t}, store has {self.dim}")
            self.dim = t
            features = self._read_cts(r, t)
        image = Envelope.from_bytes(r.blob())
        r.done()
        if index in self.records:
            raise ProtocolError(f"duplicate upload for index {index}")
        self.records[index] = StoredRecord(index, features, image, chi)

    def handle_feature_request(self, data: bytes, channel: Channel) -> bytes:
        if self.scheme is Scheme.SCHEME2:
            raise ProtocolError("scheme 2 never returns stored features")
        parse_frame(data, MessageKind.FEATURE_REQUEST)
        with channel.ledger.timed(SERVER):
            w = Writer().u32(len(self.records))
            for i in sorted(self.records):
                rec = self.records[i]
                w.u32(i)
                if self.scheme is Scheme.REVISED:
                    w.blob(rec.enc_features.to_bytes())
                else:
                    w.u32(len(rec.enc_features))
                    for c in rec.enc_features:
                        w.raw(c.to_bytes(self.pk))
            self._awaiting_index_set = True
            return channel.send(SERVER, MessageKind.FEATURES, w.getvalue())

    def handle_query_vector(self, data: bytes, channel: Channel) -> bytes:
        if self.scheme is not Scheme.SCHEME2:
            raise ProtocolError("only scheme 2 accepts a plaintext query vector")
        _, payload = parse_frame(data, MessageKind.QUERY_VECTOR)
        with channel.ledger.timed(SERVER) as cost:
            q_enc = decode_feature_payload(payload)
            if q_enc.modulus != self.pk.n:
                raise DomainError("query encoded under a different modulus")
            if self.records and q_enc.dim != self.dim:
                raise DomainError(f"query has dimension {q_enc.dim}, store has {self.dim}")
            q_sq = sum(x * x for x in q_enc.signed()) % self.pk.n
            q_sq_ct = P.encrypt(self.pk, q_sq, self.rng)
            cost.pk_encrypts += 1
            w = Writer().u32(len(self.records))
            for i in sorted(self.records):
                h = compute_encrypted_distance(self.pk, self.records[i], q_enc, q_sq_ct, cost)
                w.u32(i).raw(h.to_bytes(self.pk))
            self._awaiting_index_set = True
            return channel.send(SERVER, MessageKind.DISTANCES, w.getvalue())

    def handle_index_set(self, data: bytes, channel: Channel) -> bytes:
        if not self._awaiting_index_set:
            raise ProtocolError("index set received before any query")
        _, payload = parse_frame(data, MessageKind.INDEX_SET)
        with channel.ledger.timed(SERVER):
            wanted = decode_index_set(payload)
            missing = [i for i in wanted if i not in self.records]
            if missing:
                raise ProtocolError(f"requested unknown indices {missing}")
            w = Writer().u32(len(wanted))
            for i in wanted:
                w.u32(i).blob(self.records[i].enc_image.to_bytes())
            self._awaiting_index_set = False
            return channel.send(SERVER, MessageKind.IMAGES, w.getvalue())


def compute_encrypted_distance(
    pk: P.PublicKey,
    record: StoredRecord,
    q_enc: EncodedVector,
    q_sq_ct: P.Ciphertext,
    cost: RoleCost | None = None,
) -> P.Ciphertext:
    """``h = chi * prod_l E(f_l)^(-2 q_l) * E(sum q_l^2)``.

    Charged as t exponentiations (the signed weights -2 q_l; negative terms
    share a single inversion inside :func:`hom_linear`) and 2 ciphertext
    multiplications, i.e. t + 2 operations per record.
    """
    if record.chi is None or isinstance(record.enc_features, Envelope):
        raise DomainError("record was not uploaded under scheme 2")
    if len(record.enc_features) != q_enc.dim:
        raise DomainError(f"dimension mismatch: {len(record.enc_features)} != {q_enc.dim}")
    cross = P.hom_linear(pk, record.enc_features, [-2 * x for x in q_enc.signed()])
    h = P.hom_add(pk, P.hom_add(pk, cross, q_sq_ct), record.chi)
    if cost is not None:
        cost.hom_exps += q_enc.dim
        cost.hom_mults += 2
    return h


def pad_index_set(matched, n: int, pad_count: int, rng: random.Random | None = None) -> MatchSets:
    """Union the matched set with ``pad_count`` indices drawn uniformly
    without replacement from 1..n."""
    if not 0 <= pad_count <= n:
        raise ConfigurationError(f"pad_count must lie in [0, {n}], got {pad_count}")
    matched = frozenset(matched)
    if any(not 1 <= i <= n for i in matched):
        raise DomainError("matched index out of range")
    decoy = frozenset((rng or _SYSTEM_RNG).sample(range(1, n + 1), pad_count))
    return MatchSets(matched, decoy, matched | decoy)


def default_pad_count(n: int) -> int:
    return math.ceil(n / 10)


# -- client -----------------------------------------------------------------


class Client:
    """Owns every secret: the Paillier key pair and the symmetric key."""

    def __init__(
        self,
        pk: P.PublicKey,
        sk: P.SecretKey,
        sym_key: SymKey,
        scale: int = DEFAULT_SCALE,
        rng: random.Random | None = None,
        *,
        enforce_bound: bool = True,
    ):
        self.pk = pk
        self.sk = sk
        self.sym_key = sym_key
        self.scale = int(scale)
        self.rng = rng or _SYSTEM_RNG
        # off only to demonstrate modular wraparound of encrypted distances
        self.enforce_bound = enforce_bound

    def encode(self, v, index: int | None = None) -> EncodedVector:
        enc = encode_vector(v, self.scale, self.pk.n)
        if self.enforce_bound:
            check_distance_bound(enc, index)
        return enc

    def threshold_sq(self, threshold: float) -> Fraction:
        threshold = float(threshold)
        if not math.isfinite(threshold) or threshold < 0:
            raise ConfigurationError(f"threshold must be a finite non-negative number, got {threshold}")
        return (Fraction(threshold) * self.scale) ** 2

    def _check_query_dim(self, q_enc: EncodedVector, t: int | None) -> None:
        if t is not None and q_enc.dim != t:
            raise DomainError(f"query has dimension {q_enc.dim}, stored features have {t}")

    def _open_images(self, data: bytes, keep, cost: RoleCost) -> dict[int, bytes]:
        _, payload = parse_frame(data, MessageKind.IMAGES)
        r = Reader(payload)
        out = {}
        for _ in range(r.u32()):
            i = r.u32()
            env = Envelope.from_bytes(r.blob())
            if i in keep:
                out[i] = sym_decrypt(self.sym_key, env)
                cost.sym_decrypts += 1
        r.done()
        return out


def _session() -> tuple[CostLedger, SessionTranscript, Channel]:
    ledger, transcript = CostLedger(), SessionTranscript()
    return ledger, transcript, Channel(ledger, transcript)


def upload(scheme: Scheme | str, client: Client, server: Server, images: Sequence[bytes], features) -> UploadResult:
    """Encrypt and send N (image, feature vector) pairs, indexed from 1."""
    scheme = Scheme(scheme)
    if server.scheme is not scheme:
        raise ConfigurationError(f"server was built for scheme {server.scheme.value}")
    if len(images) != len(features):
        raise DomainError(f"{len(images)} images but {len(features)} feature vectors")
    ledger, transcript, channel = _session()
    if len(features) == 0:
        return UploadResult(ledger, transcript)
    dims = {len(f) for f in features}
    if len(dims) != 1:
        raise DomainError(f"inconsistent feature dimensions {sorted(dims)}")
    base = len(server.records)
    with ledger.timed(CLIENT):
        # every vector is validated before any encryption happens
        encoded = [client.encode(f, index=base + k + 1) for k, f in enumerate(features)]
    pk, n = client.pk, client.pk.n
    for k, (img, enc) in enumerate(zip(images, encoded)):
        index = base + k + 1
        with ledger.timed(CLIENT) as cost:
            w = Writer().u32(index)
            if scheme is Scheme.REVISED:
                w.blob(sym_encrypt(client.sym_key, encode_feature_payload(enc), client.rng).to_bytes())
                cost.sym_encrypts += 1
            else:
                if scheme is Scheme.SCHEME2:
                    norm = sum(x * x for x in enc.signed()) % n
                    w.raw(P.encrypt(pk, norm, client.rng, sk=client.sk).to_bytes(pk))
                    cost.pk_encrypts += 1
                w.u32(enc.dim)
                for z in enc.residues:
                    w.raw(P.encrypt(pk, z, client.rng, sk=client.sk).to_bytes(pk))
                cost.pk_encrypts += enc.dim
            w.blob(sym_encrypt(client.sym_key, img, client.rng).to_bytes())
            cost.sym_encrypts += 1
            data = channel.send(CLIENT, MessageKind.UPLOAD, w.getvalue())
        with ledger.timed(SERVER):
            server.handle_upload(data)
    return UploadResult(ledger, transcript)


def _match(sq: dict[int, int], bound: Fraction) -> frozenset[int]:
    return frozenset(i for i, d in sq.items() if d <= bound)


def _fetch_features_and_match(scheme: Scheme, client: Client, server: Server, q, threshold: float) -> QueryResult:
    ledger, transcript, channel = _session()
    with ledger.timed(CLIENT) as cost:
        bound = client.threshold_sq(threshold)
        q_enc = client.encode(q)
        request = channel.send(CLIENT, MessageKind.FEATURE_REQUEST, b"")
    response = server.handle_feature_request(request, channel)
    with ledger.timed(CLIENT) as cost:
        _, payload = parse_frame(response, MessageKind.FEATURES)
        r = Reader(payload)
        sq: dict[int, int] = {}
        width = client.pk.ciphertext_width
        for _ in range(r.u32()):
            i = r.u32()
            if scheme is Scheme.REVISED:
                env = Envelope.from_bytes(r.blob())
                f_enc = decode_feature_payload(sym_decrypt(client.sym_key, env))
                cost.sym_decrypts += 1
                if f_enc.modulus != q_enc.modulus or f_enc.scale != q_enc.scale:
                    raise DomainError(f"record {i} was encoded with different parameters")
            else:
                t = r.u32()
                residues = []
                for _ in range(t):
                    c = P.Ciphertext.from_bytes(client.pk, r.raw(width))
                    residues.append(P.decrypt(client.pk, client.sk, c))
                    cost.pk_decrypts += 1
                f_enc = EncodedVector(tuple(residues), client.scale, client.pk.n)
            client._check_query_dim(q_enc, f_enc.dim)
            sq[i] = encoded_sq_distance(f_enc, q_enc)
        r.done()
        matched = _match(sq, bound)
        request = channel.send(CLIENT, MessageKind.INDEX_SET, encode_index_set(matched))
    response = server.handle_index_set(request, channel)
    with ledger.timed(CLIENT) as cost:
        images = client._open_images(response, matched, cost)
    return QueryResult(images, MatchSets(matched, frozenset(), matched), sq, ledger, transcript)


def scheme1_query(client: Client, server: Server, q, threshold: float) -> QueryResult:
    """Fetch every encrypted feature, decrypt all t*N components locally."""
    if server.scheme is not Scheme.SCHEME1:
        raise ConfigurationError("server does not hold a scheme 1 store")
    return _fetch_features_and_match(Scheme.SCHEME1, client, server, q, threshold)


def revised_query(client: Client, server: Server, q, threshold: float) -> QueryResult:
    """Fetch the N symmetric feature envelopes; no public-key work at all."""
    if server.scheme is not Scheme.REVISED:
        raise ConfigurationError("server does not hold a revised-scheme store")
    return _fetch_features_and_match(Scheme.REVISED, client, server, q, threshold)


def scheme2_query(
    client: Client,
    server: Server,
    q,
    threshold: float,
    pad_count: int | None = None,
    rng: random.Random | None = None,
) -> QueryResult:
    """Send q in the clear, decrypt the N returned h_i, request I' = I + decoys.

    Decoy images arrive with the matches but are discarded undecrypted.
    """
    if server.scheme is not Scheme.SCHEME2:
        raise ConfigurationError("server does not hold a scheme 2 store")
    n_records = len(server.records)
    if pad_count is None:
        pad_count = default_pad_count(n_records)
    if not 0 <= pad_count <= n_records:
        raise ConfigurationError(f"pad_count must lie in [0, {n_records}], got {pad_count}")
    ledger, transcript, channel = _session()
    with ledger.timed(CLIENT):
        bound = client.threshold_sq(threshold)
        q_enc = client.encode(q)
        request = channel.send(CLIENT, MessageKind.QUERY_VECTOR, encode_feature_payload(q_enc))
    response = server.handle_query_vector(request, channel)
    with ledger.timed(CLIENT) as cost:
        _, payload = parse_frame(response, MessageKind.DISTANCES)
        r = Reader(payload)
        sq: dict[int, int] = {}
        width = client.pk.ciphertext_width
        for _ in range(r.u32()):
            i = r.u32()
            sq[i] = P.decrypt(client.pk, client.sk, P.Ciphertext.from_bytes(client.pk, r.raw(width)))
            cost.pk_decrypts += 1
        r.done()
        if sorted(sq) != list(range(1, len(sq) + 1)):
            raise ProtocolError("distance indices are not 1..N")
        sets = pad_index_set(_match(sq, bound), len(sq), pad_count, rng or client.rng)
        request = channel.send(CLIENT, MessageKind.INDEX_SET, encode_index_set(sets.padded))
    response = server.handle_index_set(request, channel)
    with ledger.timed(CLIENT) as cost:
        images = client._open_images(response, sets.matched, cost)
    return QueryResult(images, sets, sq, ledger, transcript)


def query(scheme: Scheme | str, client: Client, server: Server, q, threshold: float, *, pad_count: int | None = None, rng=None) -> QueryResult:
    scheme = Scheme(scheme)
    if scheme is Scheme.SCHEME1:
        return scheme1_query(client, server, q, threshold)
    if scheme is Scheme.SCHEME2:
        return scheme2_query(client, server, q, threshold, pad_count, rng)
    return revised_query(client, server, q, threshold)
