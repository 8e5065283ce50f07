"""Canonical serialization and hashing helpers.

Every digest in the protocol is SHA-256 over canonical JSON: keys sorted,
compact separators, UTF-8. Exact fractions (config thresholds, curve
parameters, reputation weights) serialize as reduced "p/q" strings so the
byte form is unique; token amounts stay plain integers.
"""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from typing import Any

# predecessor digest of the first event in a log
ZERO_DIGEST = "00" * 32


def to_jsonable(value: Any) -> Any:
    """Recursively convert a value into plain JSON types."""
    if isinstance(value, Fraction):
        return ratio_str(value)
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    # str-valued enums and ids
    return str(value)


def canonical_json(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def canonical_bytes(obj: Any) -> bytes:
    return canonical_json(obj).encode("utf-8")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_obj(obj: Any) -> str:
    """Hex SHA-256 of an object's canonical JSON form."""
    return sha256_hex(canonical_bytes(obj))


def ratio_str(value: Fraction) -> str:
    # Fraction.__str__ gives "3" or "51/100", already reduced
    return str(value)


def parse_ratio(value: Any) -> Fraction:
    """Parse an exact non-float rational from JSON-ish input.

    Floats go through str() so e.g. 0.1 becomes exactly 1/10 rather than the
    nearest binary double.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValueError("boolean is not a ratio")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, str):
        return Fraction(value)
    raise ValueError(f"cannot parse ratio from {value!r}")


def id_sort_key(identifier: str) -> tuple:
    """Sort key for protocol ids like "sbt#12" (prefix, numeric suffix)."""
    prefix, sep, suffix = identifier.partition("#")
    if sep and suffix.isdigit():
        return (prefix, int(suffix))
    return (identifier, -1)


def largest_remainder(total: int, weights: list, keys: list) -> dict:
    """Split an integer total proportionally to weights, exactly.

    Floors each proportional share, then hands the leftover units to the
    largest fractional remainders; ties break by ascending key. Weights may
    be floats or Fractions; an all-zero weight vector splits equally.
    """
    if total < 0:
        raise ValueError("total must be non-negative")
    if len(weights) != len(keys) or not keys:
        raise ValueError("weights and keys must be non-empty and aligned")
    exact_weights = [Fraction(w) for w in weights]
    wsum = sum(exact_weights)
    if wsum == 0:
        exact_weights = [Fraction(1)] * len(keys)
        wsum = Fraction(len(keys))
    shares = {}
    remainders = []
    floor_sum = 0
    for key, w in zip(keys, exact_weights):
        exact = Fraction(total) * w / wsum
        base = int(exact)  # floor for non-negative shares
        shares[key] = base
        floor_sum += base
        remainders.append((exact - base, key))
    leftover = total - floor_sum
    order = sorted(remainders, key=lambda rk: (-rk[0], id_sort_key(str(rk[1]))))
    for i in range(leftover):
        shares[order[i][1]] += 1
    return shares
