"""IEEE-754 helpers: bit casts and single-rounding fused multiply-add."""
from __future__ import annotations

import math
import struct
from fractions import Fraction

import numpy as np


def f64_from_bits(bits: int) -> float:
    return struct.unpack("<d", struct.pack("<Q", bits & 0xFFFF_FFFF_FFFF_FFFF))[0]


def f64_bits(value: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", value))[0]


def f32_from_bits(bits: int) -> float:
    return struct.unpack("<f", struct.pack("<I", bits & 0xFFFF_FFFF))[0]


def f32_bits(value: float) -> int:
    return int(np.float32(value).view(np.uint32))


def _fma_special(a: float, b: float, c: float):
    """Result for non-finite operands or exact-zero sums, else None."""
    if not (math.isfinite(a) and math.isfinite(b)):
        return a * b + c  # the product is exactly inf or nan
    if not math.isfinite(c):
        return c
    return None


def _zero_sign(a: float, b: float, c: float) -> float:
    prod_neg = math.copysign(1.0, a) * math.copysign(1.0, b) < 0
    c_neg = math.copysign(1.0, c) < 0
    prod_zero = a == 0.0 or b == 0.0
    if prod_zero and c == 0.0 and prod_neg and c_neg:
        return -0.0
    return 0.0


def fma64(a: float, b: float, c: float) -> float:
    """a*b + c rounded once to binary64 (round-to-nearest-even)."""
    special = _fma_special(a, b, c)
    if special is not None:
        return special
    exact = Fraction(a) * Fraction(b) + Fraction(c)
    if exact == 0:
        return _zero_sign(a, b, c)
    try:
        return float(exact)  # int/int true division rounds correctly
    except OverflowError:
        return math.inf if exact > 0 else -math.inf


def round_to_f32(q: Fraction) -> float:
    """Correctly round an exact rational to binary32, returned as a Python float."""
    if q == 0:
        return 0.0
    try:
        d = float(q)
    except OverflowError:
        return math.inf if q > 0 else -math.inf
    with np.errstate(over="ignore"):
        f = np.float32(d)
    if np.isinf(f) or Fraction(d) == q:
        return float(f)
    # double rounding only goes wrong when d sits exactly on a binary32 midpoint
    other = np.nextafter(f, np.float32(math.inf) if Fraction(float(f)) < Fraction(d) else np.float32(-math.inf))
    if np.isfinite(other) and Fraction(float(f)) + Fraction(float(other)) == 2 * Fraction(d):
        lo, hi = sorted((float(f), float(other)))
        return hi if q > Fraction(d) else lo
    return float(f)


def fma32(a: float, b: float, c: float) -> float:
    """a*b + c rounded once to binary32."""
    special = _fma_special(a, b, c)
    if special is not None:
        return float(np.float32(special))
    exact = Fraction(a) * Fraction(b) + Fraction(c)
    if exact == 0:
        return _zero_sign(a, b, c)
    return round_to_f32(exact)
