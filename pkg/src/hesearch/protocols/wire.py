"""Length-prefixed binary framing and the in-process channel.

A frame is ``u32 length || u8 kind || payload`` where length covers the
kind byte and the payload. The channel moves real frames so byte counts
are what a socket transport would carry.
"""

from __future__ import annotations

import struct
from enum import IntEnum

from ..errors import PayloadFormatError, ProtocolError
from .ledger import C2S, CLIENT, S2C, SERVER, CostLedger, SessionTranscript

_U32 = struct.Struct(">I")
_HEADER = struct.Struct(">IB")


class MessageKind(IntEnum):
    UPLOAD = 1
    FEATURE_REQUEST = 2
    FEATURES = 3
    QUERY_VECTOR = 4
    DISTANCES = 5
    INDEX_SET = 6
    IMAGES = 7


def frame(kind: MessageKind, payload: bytes) -> bytes:
    return _HEADER.pack(len(payload) + 1, int(kind)) + payload


def parse_frame(data: bytes, expected: MessageKind | None = None) -> tuple[MessageKind, bytes]:
    if len(data) < _HEADER.size:
        raise PayloadFormatError("frame shorter than its header")
    length, kind = _HEADER.unpack_from(data)
    if length != len(data) - _U32.size:
        raise PayloadFormatError(f"frame length field {length} disagrees with {len(data) - 4}")
    try:
        kind = MessageKind(kind)
    except ValueError:
        raise PayloadFormatError(f"unknown message kind {kind}") from None
    if expected is not None and kind != expected:
        raise ProtocolError(f"expected {expected.name}, received {kind.name}")
    return kind, data[_HEADER.size :]


class Writer:
    def __init__(self):
        self._buf = bytearray()

    def u8(self, v: int) -> "Writer":
        self._buf.append(v)
        return self

    def u32(self, v: int) -> "Writer":
        self._buf += _U32.pack(v)
        return self

    def raw(self, b: bytes) -> "Writer":
        self._buf += b
        return self

    def blob(self, b: bytes) -> "Writer":
        return self.u32(len(b)).raw(b)

    def getvalue(self) -> bytes:
        return bytes(self._buf)


class Reader:
    def __init__(self, data: bytes):
        self._data = memoryview(data)
        self._pos = 0

    def raw(self, size: int) -> bytes:
        end = self._pos + size
        if end > len(self._data):
            raise PayloadFormatError("payload truncated")
        out = bytes(self._data[self._pos : end])
        self._pos = end
        return out

    def u8(self) -> int:
        return self.raw(1)[0]

    def u32(self) -> int:
        return _U32.unpack(self.raw(4))[0]

    def blob(self) -> bytes:
        return self.raw(self.u32())

    def done(self) -> None:
        if self._pos != len(self._data):
            raise PayloadFormatError(f"{len(self._data) - self._pos} trailing payload bytes")


def encode_index_set(indices) -> bytes:
    w = Writer().u32(len(indices))
    for i in sorted(indices):
        w.u32(i)
    return w.getvalue()


def decode_index_set(payload: bytes) -> list[int]:
    r = Reader(payload)
    out = [r.u32() for _ in range(r.u32())]
    r.done()
    if out != sorted(set(out)):
        raise PayloadFormatError("index set must be strictly increasing")
    return out


class Channel:
    """Carries frames between one client and one server, charging bytes
    to both ledgers and appending to the transcript."""

    def __init__(self, ledger: CostLedger, transcript: SessionTranscript):
        self.ledger = ledger
        self.transcript = transcript

    def send(self, sender: str, kind: MessageKind, payload: bytes) -> bytes:
        data = frame(kind, payload)
        if sender == CLIENT:
            direction, receiver = C2S, SERVER
        elif sender == SERVER:
            direction, receiver = S2C, CLIENT
        else:
            raise ValueError(sender)
        self.ledger.role(sender).bytes_sent += len(data)
        self.ledger.role(receiver).bytes_received += len(data)
        self.transcript.record(direction, kind.name, len(data))
        return data
