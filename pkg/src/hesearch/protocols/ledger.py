"""Per-role operation counters, wall-time, and message transcripts."""

from __future__ import annotations

import json
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator

CLIENT = "client"
SERVER = "server"
C2S = "client->server"
S2C = "server->client"

COUNTERS = (
    "pk_encrypts",
    "pk_decrypts",
    "hom_mults",
    "hom_exps",
    "sym_encrypts",
    "sym_decrypts",
    "bytes_sent",
    "bytes_received",
)


@dataclass
class RoleCost:
    pk_encrypts: int = 0
    pk_decrypts: int = 0
    hom_mults: int = 0
    hom_exps: int = 0
    sym_encrypts: int = 0
    sym_decrypts: int = 0
    bytes_sent: int = 0
    bytes_received: int = 0
    seconds: float = 0.0

    def counts(self) -> dict[str, int]:
        return {name: getattr(self, name) for name in COUNTERS}


@dataclass
class CostLedger:
    """Session-local; not shared between threads."""

    client: RoleCost = field(default_factory=RoleCost)
    server: RoleCost = field(default_factory=RoleCost)

    def role(self, name: str) -> RoleCost:
        if name == CLIENT:
            return self.client
        if name == SERVER:
            return self.server
        raise KeyError(name)

    @contextmanager
    def timed(self, role: str) -> Iterator[RoleCost]:
        cost = self.role(role)
        start = time.perf_counter()
        try:
            yield cost
        finally:
            cost.seconds += time.perf_counter() - start

    def as_dict(self) -> dict:
        return {CLIENT: asdict(self.client), SERVER: asdict(self.server)}


@dataclass(frozen=True)
class TranscriptEntry:
    direction: str
    kind: str
    size: int
    timestamp: float


@dataclass
class SessionTranscript:
    entries: list[TranscriptEntry] = field(default_factory=list)

    def record(self, direction: str, kind: str, size: int) -> None:
        self.entries.append(TranscriptEntry(direction, kind, size, time.monotonic()))

    def shape(self) -> list[tuple[str, str]]:
        return [(e.direction, e.kind) for e in self.entries]

    def sizes(self) -> list[int]:
        return [e.size for e in self.entries]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(e), sort_keys=True) + "\n" for e in self.entries)

    @classmethod
    def from_jsonl(cls, text: str | Iterable[str]) -> "SessionTranscript":
        lines = text.splitlines() if isinstance(text, str) else text
        return cls([TranscriptEntry(**json.loads(line)) for line in lines if line.strip()])

    def __len__(self) -> int:
        return len(self.entries)
