"""Fixed-point embedding of real feature vectors into Z_n^t.

A real component v becomes the integer ``round(v * S)`` (half away from
zero, computed exactly on the binary value of the float) and is stored as
its residue modulo n; negatives occupy the upper half of Z_n. Squared
distances between encoded vectors are only meaningful while they stay
below n/2, which is what :class:`DistanceBound` and
:func:`check_distance_bound` guard.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, EncodingOverflowError, PayloadFormatError

DEFAULT_SCALE = 10_000

FeatureVector = Sequence[float]


@dataclass(frozen=True)
class EncodedVector:
    residues: tuple[int, ...]
    scale: int
    modulus: int

    def __post_init__(self):
        if len(self.residues) < 1:
            raise DomainError("encoded vector needs at least one component")
        if self.scale < 1:
            raise DomainError("scale must be a positive integer")
        if any(not 0 <= z < self.modulus for z in self.residues):
            raise DomainError("residue outside [0, n)")

    @property
    def dim(self) -> int:
        return len(self.residues)

    def signed(self) -> tuple[int, ...]:
        return tuple(decode_centered(z, self.modulus) for z in self.residues)

    def max_abs(self) -> int:
        return max(abs(x) for x in self.signed())

    def decode(self) -> tuple[float, ...]:
        return tuple(x / self.scale for x in self.signed())


@dataclass(frozen=True)
class DistanceBound:
    max_component_magnitude: float
    max_sq_distance_representable: int


def round_half_away(x: Fraction) -> int:
    mag = math.floor(abs(x) + Fraction(1, 2))
    return -mag if x < 0 else mag


def quantize(v: Iterable[float], scale: int) -> tuple[int, ...]:
    """Signed fixed-point integers ``round(v_j * scale)``."""
    out = []
    for j, x in enumerate(v):
        x = float(x)
        if not math.isfinite(x):
            raise DomainError(f"component {j} is not finite")
        out.append(round_half_away(Fraction(x) * scale))
    return tuple(out)


def encode_vector(v: FeatureVector, scale: int, n: int) -> EncodedVector:
    """Encode v into Z_n^t. Raises EncodingOverflowError naming the index
    of the first component whose fixed-point value reaches n/2."""
    if len(v) < 1:
        raise DomainError("feature vector must have at least one component")
    n = int(n)
    ints = quantize(v, scale)
    for j, x in enumerate(ints):
        if 2 * abs(x) >= n:
            raise EncodingOverflowError(
                f"component {j} encodes to {x}, outside the half-range of Z_n", index=j
            )
    return EncodedVector(tuple(x % n for x in ints), int(scale), n)


def encode_integers(ints: Sequence[int], scale: int, n: int) -> EncodedVector:
    """Embed already-quantized signed integers (no rounding)."""
    for j, x in enumerate(ints):
        if 2 * abs(x) >= n:
            raise EncodingOverflowError(f"component {j} outside the half-range of Z_n", index=j)
    return EncodedVector(tuple(int(x) % n for x in ints), int(scale), int(n))


def decode_centered(z: int, n: int) -> int:
    z, n = int(z), int(n)
    return z if 2 * z < n else z - n


def plain_sq_distance(f: FeatureVector, q: FeatureVector) -> float:
    if len(f) != len(q):
        raise DomainError(f"dimension mismatch: {len(f)} != {len(q)}")
    return float(sum((float(a) - float(b)) ** 2 for a, b in zip(f, q)))


def encoded_sq_distance(a: EncodedVector, b: EncodedVector) -> int:
    """Exact integer squared distance between the signed encoded values."""
    if a.dim != b.dim:
        raise DomainError(f"dimension mismatch: {a.dim} != {b.dim}")
    return sum((x - y) ** 2 for x, y in zip(a.signed(), b.signed()))


def max_safe_magnitude(n: int, t: int, scale: int) -> float:
    """Largest component magnitude M with ``4 t (S M)^2 < n/2``, i.e. the
    closed form ``sqrt(n / 8t) / S``. Returns ``inf`` when M exceeds the
    float range (moduli beyond roughly 2^2050)."""
    n = int(n)
    if t < 1 or scale < 1:
        raise ConfigurationError("dimension and scale must be positive")
    if n <= 4 * t * scale * scale:
        raise ConfigurationError(
            f"modulus too small: n={n} leaves no safe magnitude for t={t}, S={scale}"
        )
    try:
        return math.sqrt(n / (8 * t)) / scale
    except OverflowError:
        try:
            return math.exp(0.5 * (math.log(n) - math.log(8 * t)) - math.log(scale))
        except OverflowError:
            return math.inf


def distance_bound(n: int, t: int, scale: int) -> DistanceBound:
    return DistanceBound(max_safe_magnitude(n, t, scale), (int(n) - 1) // 2)


def is_within_bound(max_abs_encoded: int, t: int, n: int) -> bool:
    """Whether vectors with fixed-point magnitudes at most ``max_abs_encoded``
    keep every pairwise squared distance, worst case ``4 t A^2``, below n/2."""
    return 8 * t * int(max_abs_encoded) ** 2 < int(n)


def check_distance_bound(vec: EncodedVector, index: int | None = None) -> None:
    if not is_within_bound(vec.max_abs(), vec.dim, vec.modulus):
        where = "" if index is None else f" (record {index})"
        raise EncodingOverflowError(
            f"encoded magnitude {vec.max_abs()} lets squared distances reach n/2{where}",
            index=index,
        )


def check_range(value_range: tuple[float, float], n: int, t: int, scale: int) -> None:
    """Reject a feature range whose extreme magnitude is not safe."""
    lo, hi = value_range
    if not lo <= hi:
        raise ConfigurationError(f"empty value range {value_range}")
    mag = max(abs(lo), abs(hi))
    limit = max_safe_magnitude(n, t, scale)
    encoded = max(abs(x) for x in quantize((lo, hi), scale))
    if mag > limit or not is_within_bound(encoded, t, n):
        raise EncodingOverflowError(
            f"value range {value_range} exceeds the safe magnitude {limit:.6g} "
            f"for t={t}, S={scale}"
        )


def read_features_csv(path: str | Path) -> np.ndarray:
    """Load an (N, t) float array: one row per image, optional header row."""
    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                if lineno == 1 and not rows:
                    continue  # header
                raise PayloadFormatError(f"{path}:{lineno}: non-numeric feature value") from None
            if not all(math.isfinite(x) for x in values):
                raise PayloadFormatError(f"{path}:{lineno}: non-finite feature value")
            if rows and len(values) != len(rows[0]):
                raise PayloadFormatError(
                    f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(values)}"
                )
            rows.append(values)
    if not rows:
        return np.zeros((0, 0))
    return np.asarray(rows, dtype=float)
