"""End-to-end experiments: fixtures, timed runs of each scheme, reports."""

from __future__ import annotations

import csv
import functools
import io
import json
import logging
import math
import random
import statistics
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

from . import paillier as P
from .encoding import DEFAULT_SCALE, check_range, encode_vector, is_within_bound, read_features_csv
from .envelope import SymKey
from .errors import ConfigurationError, HESearchError
from .protocols import Client, QueryResult, Scheme, Server, default_pad_count, query, upload

log = logging.getLogger(__name__)

SCHEME_ORDER = (Scheme.SCHEME1, Scheme.SCHEME2, Scheme.REVISED)
REPORT_COLUMNS = (
    "scheme",
    "pk_dec",
    "sym_dec",
    "client_ms",
    "server_ms",
    "bytes_up",
    "bytes_down",
    "matched",
    "padded",
)


@dataclass
class ExperimentConfig:
    scheme: str = "all"
    num_images: int = 100
    dim: int = 128
    key_bits: int = 2048
    scale: int = DEFAULT_SCALE
    threshold: float | None = None
    pad_count: int | None = None
    image_bytes: int = 4096
    seed: int = 0
    repeats: int = 1
    value_range: tuple[float, float] = (0.0, 1.0)
    features_path: str | None = None
    test_key: bool = False

    def schemes(self) -> tuple[Scheme, ...]:
        if self.scheme == "all":
            return SCHEME_ORDER
        return (Scheme(str(self.scheme)),)

    def validate(self) -> None:
        if self.scheme != "all":
            try:
                Scheme(str(self.scheme))
            except ValueError:
                raise ConfigurationError(f"unknown scheme {self.scheme!r}") from None
        for name in ("num_images", "dim", "key_bits", "scale", "repeats"):
            if getattr(self, name) < 1 and not (name == "num_images" and self.features_path):
                raise ConfigurationError(f"{name} must be positive")
        if self.key_bits < 16:
            raise ConfigurationError("key_bits must be at least 16")
        if self.image_bytes < 0:
            raise ConfigurationError("image_bytes must be non-negative")
        if self.threshold is not None and not (math.isfinite(self.threshold) and self.threshold >= 0):
            raise ConfigurationError("threshold must be finite and non-negative")
        if self.pad_count is not None and not 0 <= self.pad_count <= self.num_images:
            raise ConfigurationError(f"pad_count must lie in [0, {self.num_images}]")


@dataclass
class ReportRow:
    scheme: str
    pk_dec: int
    sym_dec: int
    client_ms: float
    server_ms: float
    bytes_up: int
    bytes_down: int
    matched: int
    padded: int


@dataclass
class Fixture:
    features: np.ndarray
    images: list[bytes]
    query: np.ndarray
    threshold: float
    planted: list[int] = field(default_factory=list)


@dataclass
class SchemeRun:
    scheme: Scheme
    upload_ledger: object
    results: list[QueryResult]
    row: ReportRow


def generate_fixture(
    seed: int,
    n: int,
    t: int,
    value_range: tuple[float, float] = (0.0, 1.0),
    *,
    image_bytes: int = 256,
    modulus: int | None = None,
    scale: int = DEFAULT_SCALE,
) -> Fixture:
    """Seeded features uniform in ``value_range`` plus random-byte images.

    About one image in twenty is a jittered copy of the query vector, so the
    default threshold (the jitter radius) yields a small non-empty match set.
    Passing ``modulus`` checks the range against the safe magnitude first.
    """
    lo, hi = value_range
    if modulus is not None:
        check_range(value_range, modulus, t, scale)
    elif not lo <= hi:
        raise ConfigurationError(f"empty value range {value_range}")
    rng = np.random.default_rng(seed)
    width = hi - lo
    jitter = 0.01 * width
    base = rng.uniform(lo, hi, size=t)
    features = rng.uniform(lo, hi, size=(n, t))
    planted = sorted(rng.choice(n, size=math.ceil(n / 20), replace=False).tolist()) if n else []
    for k in planted:
        features[k] = np.clip(base + rng.uniform(-jitter, jitter, size=t), lo, hi)
    images = [rng.bytes(image_bytes) for _ in range(n)]
    return Fixture(features, images, base, jitter * math.sqrt(t), [k + 1 for k in planted])


@functools.lru_cache(maxsize=8)
def pinned_keypair(bits: int) -> tuple[P.PublicKey, P.SecretKey]:
    """Pinned key pair for a bit length; identical across runs and hosts."""
    return P.keygen(bits, random.Random(f"hesearch-test-key-{bits}"))


def _fixture_for(cfg: ExperimentConfig, pk: P.PublicKey) -> Fixture:
    if cfg.features_path:
        feats = read_features_csv(cfg.features_path)
        if feats.size == 0:
            raise ConfigurationError(f"{cfg.features_path} holds no feature rows")
        rng = np.random.default_rng(cfg.seed)
        images = [rng.bytes(cfg.image_bytes) for _ in range(len(feats))]
        return Fixture(feats, images, feats[0].copy(), 0.0)
    return generate_fixture(
        cfg.seed,
        cfg.num_images,
        cfg.dim,
        cfg.value_range,
        image_bytes=cfg.image_bytes,
        modulus=pk.n,
        scale=cfg.scale,
    )


def _preflight(fixture: Fixture, pk: P.PublicKey, scale: int) -> None:
    """Encode everything once so bound violations surface before any crypto."""
    t = fixture.query.shape[0]
    worst = 0
    for k, row in enumerate([*fixture.features, fixture.query]):
        enc = encode_vector(row, scale, pk.n)
        worst = max(worst, enc.max_abs())
        if not is_within_bound(worst, t, pk.n):
            where = "query" if k == len(fixture.features) else f"record {k + 1}"
            raise ConfigurationError(f"{where} exceeds the safe magnitude for this key and scale")


def run_scheme(
    scheme: Scheme,
    client: Client,
    fixture: Fixture,
    threshold: float,
    *,
    pad_count: int,
    repeats: int = 1,
    pad_seed: int = 0,
) -> SchemeRun:
    server = Server(scheme, client.pk)
    up = upload(scheme, client, server, fixture.images, fixture.features)
    results = []
    for _ in range(repeats):
        rng = random.Random(pad_seed)
        results.append(query(scheme, client, server, fixture.query, threshold, pad_count=pad_count, rng=rng))
    last = results[-1]
    c = last.ledger.client
    row = ReportRow(
        scheme=scheme.value,
        pk_dec=c.pk_decrypts,
        sym_dec=c.sym_decrypts,
        client_ms=round(1000 * statistics.median(r.ledger.client.seconds for r in results), 3),
        server_ms=round(1000 * statistics.median(r.ledger.server.seconds for r in results), 3),
        bytes_up=c.bytes_sent,
        bytes_down=c.bytes_received,
        matched=len(last.match.matched),
        padded=len(last.match.padded),
    )
    return SchemeRun(scheme, up.ledger, results, row)


def run_experiment_detailed(cfg: ExperimentConfig, keys=None) -> list[SchemeRun]:
    cfg.validate()
    if keys is None:
        keys = pinned_keypair(cfg.key_bits) if cfg.test_key else P.keygen(cfg.key_bits)
    pk, sk = keys
    fixture = _fixture_for(cfg, pk)
    _preflight(fixture, pk, cfg.scale)
    n = len(fixture.images)
    threshold = fixture.threshold if cfg.threshold is None else cfg.threshold
    pad_count = default_pad_count(n) if cfg.pad_count is None else cfg.pad_count
    if not 0 <= pad_count <= n:
        raise ConfigurationError(f"pad_count must lie in [0, {n}]")
    seeded = random.Random(cfg.seed)
    client = Client(pk, sk, SymKey.generate(seeded if cfg.test_key else None), cfg.scale)
    runs = []
    for scheme in cfg.schemes():
        log.info("running scheme %s with N=%d t=%d", scheme.value, n, fixture.query.shape[0])
        runs.append(
            run_scheme(scheme, client, fixture, threshold, pad_count=pad_count, repeats=cfg.repeats, pad_seed=cfg.seed)
        )
    matched = {frozenset(r.results[-1].match.matched) for r in runs}
    if len(matched) > 1:
        raise HESearchError("schemes disagree on the matched set")
    return runs


def run_experiment(cfg: ExperimentConfig, keys=None) -> list[ReportRow]:
    return [run.row for run in run_experiment_detailed(cfg, keys)]


def emit_report(rows: Sequence[ReportRow], fmt: str = "table") -> str:
    if not rows:
        raise ValueError("no rows to report")
    records = [asdict(r) for r in rows]
    if fmt == "json":
        return json.dumps(records, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(records)
        return buf.getvalue()
    if fmt == "table":
        cells = [list(REPORT_COLUMNS)] + [[_cell(rec[c]) for c in REPORT_COLUMNS] for rec in records]
        widths = [max(len(row[j]) for row in cells) for j in range(len(REPORT_COLUMNS))]
        lines = ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}; expected table, json or csv")


def _cell(v) -> str:
    return f"{v:.3f}" if isinstance(v, float) else str(v)


def rows_from_json(text: str) -> list[ReportRow]:
    names = {f.name for f in fields(ReportRow)}
    return [ReportRow(**{k: v for k, v in rec.items() if k in names}) for rec in json.loads(text)]
